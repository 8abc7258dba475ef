#pragma once

#include <array>
#include <span>
#include <vector>

#include "plr/imgcore.hpp"

namespace plr::sim {

inline constexpr int kPatchSide = 32;
inline constexpr std::size_t kPatchDim = kPatchSide * kPatchSide;

using PatchVector = std::array<double, kPatchDim>;

/// Resizes to 32x32 (bilinear) and flattens row-major.
PatchVector to_vector(const img::GrayImage& patch);

/// 1 - cos(a, b). Throws ZeroVector if either argument is all zeros.
double cosine_distance(std::span<const double> a, std::span<const double> b);

/// Jensen-Shannon divergence (natural log) after adding 1e-12 to every entry
/// and normalizing each vector to unit mass. Bounded by ln 2.
double js_divergence(std::span<const double> a, std::span<const double> b);

struct SimilarityReport {
  double mean_cosine_distance = 0.0;
  double mean_js_divergence = 0.0;
  std::size_t pair_count = 0;
  std::size_t size_a = 0;
  std::size_t size_b = 0;
};

/// Averages both measures over every (a, b) pair.
SimilarityReport set_similarity(std::span<const PatchVector> a, std::span<const PatchVector> b);
SimilarityReport set_similarity(std::span<const img::GrayImage> a, std::span<const img::GrayImage> b);

}  // namespace plr::sim
