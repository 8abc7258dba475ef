#include "plr/nn/weights.hpp"

#include <cstring>
#include <set>

#include "../binio.hpp"
#include "plr/error.hpp"

namespace plr::nn {

namespace {

constexpr char kMagic[4] = {'P', 'L', 'R', 'W'};

template <typename T>
constexpr DType dtype_of() {
  return sizeof(T) == 4 ? DType::kF32 : DType::kF64;
}

ArchSpec read_header(binio::Reader& in, const std::string& name) {
  char magic[4];
  in.get_bytes(magic, 4);
  require(std::memcmp(magic, kMagic, 4) == 0, ErrorCode::kCorruptFile, name + ": bad magic, not a weight file");
  const auto version = in.get<std::uint32_t>();
  require(version == kWeightsVersion, ErrorCode::kVersionMismatch,
          name + ": weight format version " + std::to_string(version) + ", expected " +
              std::to_string(kWeightsVersion));
  ArchSpec arch;
  const auto kind = in.get<std::uint32_t>();
  require(kind == 1 || kind == 2, ErrorCode::kCorruptFile, name + ": unknown model kind");
  arch.kind = static_cast<ModelKind>(kind);
  arch.unet.levels = static_cast<int>(in.get<std::uint32_t>());
  arch.unet.base_channels = static_cast<int>(in.get<std::uint32_t>());
  arch.unet.convs_per_level = static_cast<int>(in.get<std::uint32_t>());
  arch.unet.kernel = static_cast<int>(in.get<std::uint32_t>());
  arch.head_units = static_cast<int>(in.get<std::uint32_t>());
  const auto fp = in.get<std::uint64_t>();
  require(fp == arch.fingerprint(), ErrorCode::kCorruptFile, name + ": stored fingerprint does not match header");
  try {
    arch.unet.validate();
  } catch (const Error& e) {
    fail(ErrorCode::kCorruptFile, name + ": " + e.what());
  }
  return arch;
}

template <typename Stored, typename T>
void read_payload(binio::Reader& in, Tensor<T>& dst) {
  for (auto& v : dst.values()) v = static_cast<T>(in.get<Stored>());
}

}  // namespace

template <typename T>
std::vector<std::uint8_t> encode_weights(const ModelWeights<T>& weights) {
  binio::Writer out;
  out.put_bytes(kMagic, 4);
  out.put(kWeightsVersion);
  const ArchSpec& a = weights.arch;
  out.put(static_cast<std::uint32_t>(a.kind));
  out.put(static_cast<std::uint32_t>(a.unet.levels));
  out.put(static_cast<std::uint32_t>(a.unet.base_channels));
  out.put(static_cast<std::uint32_t>(a.unet.convs_per_level));
  out.put(static_cast<std::uint32_t>(a.unet.kernel));
  out.put(static_cast<std::uint32_t>(a.head_units));
  out.put(a.fingerprint());
  out.put(static_cast<std::uint32_t>(weights.tensors.size()));
  for (const auto& t : weights.tensors) {
    out.put_string(t.name);
    out.put(static_cast<std::uint8_t>(dtype_of<T>()));
    const Shape& s = t.value.shape();
    out.put(std::uint32_t{4});
    for (std::size_t d : {s.n, s.c, s.h, s.w}) out.put(static_cast<std::uint64_t>(d));
    for (T v : t.value.values()) out.put(v);
  }
  return out.bytes();
}

template <typename T>
ModelWeights<T> decode_weights(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  binio::Reader in(bytes, name);
  const ArchSpec arch = read_header(in, name);
  // Reference layout: every stored tensor must match it by name and shape.
  ModelWeights<T> w = zero_model<T>(arch);
  const auto count = in.get<std::uint32_t>();
  require(count == w.tensors.size(), ErrorCode::kCorruptFile,
          name + ": holds " + std::to_string(count) + " tensors, architecture needs " +
              std::to_string(w.tensors.size()));
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string tname = in.get_string();
    require(seen.insert(tname).second, ErrorCode::kCorruptFile, name + ": duplicate tensor '" + tname + "'");
    auto& slot = w.tensors[i];
    require(slot.name == tname, ErrorCode::kCorruptFile,
            name + ": tensor '" + tname + "' out of order (expected '" + slot.name + "')");
    const auto dtype = in.get<std::uint8_t>();
    require(dtype == 1 || dtype == 2, ErrorCode::kCorruptFile, name + ": bad dtype tag");
    const auto rank = in.get<std::uint32_t>();
    require(rank == 4, ErrorCode::kCorruptFile, name + ": tensor rank must be 4");
    Shape s;
    s.n = in.get<std::uint64_t>();
    s.c = in.get<std::uint64_t>();
    s.h = in.get<std::uint64_t>();
    s.w = in.get<std::uint64_t>();
    require(s == slot.value.shape(), ErrorCode::kCorruptFile,
            name + ": tensor '" + tname + "' has shape " + s.str() + ", expected " + slot.value.shape().str());
    const std::size_t elem = dtype == 1 ? 4 : 8;
    in.need(s.numel() * elem);
    if (dtype == 1) {
      read_payload<float>(in, slot.value);
    } else {
      read_payload<double>(in, slot.value);
    }
    check_finite(slot.value, name + ": tensor '" + tname + "'");
  }
  require(in.remaining() == 0, ErrorCode::kCorruptFile, name + ": trailing bytes after last tensor");
  return w;
}

template <typename T>
void save_weights(const ModelWeights<T>& weights, const std::string& path) {
  binio::write_all(path, encode_weights(weights));
}

template <typename T>
ModelWeights<T> load_weights(const std::string& path) {
  return decode_weights<T>(binio::read_all(path), path);
}

template <typename T>
ModelWeights<T> load_weights(const std::string& path, const ArchSpec& expected) {
  auto w = load_weights<T>(path);
  require(w.arch.fingerprint() == expected.fingerprint(), ErrorCode::kFingerprintMismatch,
          path + ": weights were saved for a different architecture");
  return w;
}

ArchSpec peek_arch(const std::string& path) {
  const auto bytes = binio::read_all(path);
  binio::Reader in(bytes, path);
  return read_header(in, path);
}

template std::vector<std::uint8_t> encode_weights(const ModelWeights<float>&);
template std::vector<std::uint8_t> encode_weights(const ModelWeights<double>&);
template ModelWeights<float> decode_weights(const std::vector<std::uint8_t>&, const std::string&);
template ModelWeights<double> decode_weights(const std::vector<std::uint8_t>&, const std::string&);
template void save_weights(const ModelWeights<float>&, const std::string&);
template void save_weights(const ModelWeights<double>&, const std::string&);
template ModelWeights<float> load_weights(const std::string&);
template ModelWeights<double> load_weights(const std::string&);
template ModelWeights<float> load_weights(const std::string&, const ArchSpec&);
template ModelWeights<double> load_weights(const std::string&, const ArchSpec&);

}  // namespace plr::nn
