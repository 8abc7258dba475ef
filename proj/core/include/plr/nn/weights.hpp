#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plr/nn/network.hpp"

namespace plr::nn {

// Weight file: "PLRW", u32 version, architecture fields, u64 fingerprint,
// u32 tensor count, then per tensor: u32 name length + bytes, u8 dtype tag,
// u32 rank, u64 dims, little-endian payload. Everything little-endian.
inline constexpr std::uint32_t kWeightsVersion = 1;

enum class DType : std::uint8_t { kF32 = 1, kF64 = 2 };

template <typename T>
std::vector<std::uint8_t> encode_weights(const ModelWeights<T>& weights);

/// Values stored in the other precision are converted on load.
template <typename T>
ModelWeights<T> decode_weights(const std::vector<std::uint8_t>& bytes, const std::string& name = "weights");

template <typename T>
void save_weights(const ModelWeights<T>& weights, const std::string& path);

template <typename T>
ModelWeights<T> load_weights(const std::string& path);

/// Also throws FingerprintMismatch unless the file was written for `expected`.
template <typename T>
ModelWeights<T> load_weights(const std::string& path, const ArchSpec& expected);

/// Reads only the header, e.g. to decide which model kind a file holds.
ArchSpec peek_arch(const std::string& path);

}  // namespace plr::nn
