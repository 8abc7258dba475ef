#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "plr/imgcore.hpp"

namespace plr::lesion {

struct SizeRange {
  int min = 5;
  int max = 25;

  bool contains(int v) const { return v >= min && v <= max; }
  bool operator==(const SizeRange&) const = default;
};

struct LesionPatch {
  img::GrayImage pixels;
  std::uint32_t source_image = 0;
  int source_x = 0;
  int source_y = 0;
  double mean_intensity = 0.0;

  int width() const { return pixels.width(); }
  int height() const { return pixels.height(); }
  bool operator==(const LesionPatch&) const = default;
};

struct BankParams {
  SizeRange size;
  double threshold = 180.0;
  std::uint64_t seed = 0;
  std::uint32_t source_count = 0;

  bool operator==(const BankParams&) const = default;
};

struct PatchBank {
  BankParams params;
  std::vector<LesionPatch> patches;

  std::size_t count() const { return patches.size(); }
  bool operator==(const PatchBank&) const = default;
};

double mean_intensity(const img::GrayImage& patch);

/// Cuts one rectangle with independently uniform width/height in the size
/// range and a uniform top-left position. The mean is filled in but no
/// threshold is applied.
LesionPatch sample_patch(const img::GrayImage& noise_img, std::uint64_t seed, SizeRange size);

/// Rejection-samples candidates until target_count patches with mean strictly
/// above the threshold are accepted. Candidate k derives its own seed from
/// (seed, k), so the result depends only on the inputs. Throws
/// AttemptsExhausted once at least 1e6 candidates were drawn with an
/// acceptance rate below 1e-6.
PatchBank build_bank(std::span<const img::GrayImage> noise_imgs, std::size_t target_count,
                     double threshold, SizeRange size, std::uint64_t seed);

std::vector<std::uint8_t> encode_bank(const PatchBank& bank);
PatchBank decode_bank(const std::vector<std::uint8_t>& bytes, const std::string& name = "bank");

void save_bank(const PatchBank& bank, const std::filesystem::path& path);
PatchBank load_bank(const std::filesystem::path& path);

}  // namespace plr::lesion
