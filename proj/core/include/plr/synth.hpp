#pragma once

#include <cstdint>
#include <vector>

#include "plr/imgcore.hpp"

// Synthetic stand-ins for chest CT slices, used by the desk-scale pipeline,
// the demo data command and the tests.
namespace plr::synth {

/// Axial-slice phantom: dark air outside an elliptical body, two dark lung
/// fields with Perlin texture and a few bright vessel dots. derive_lung_mask
/// with threshold 100 recovers the lung fields.
img::GrayImage normal_scan(int size, std::uint64_t seed);

/// Copy of `scan` with one bright square centered on a lung pixel.
img::GrayImage with_bright_square(const img::GrayImage& scan, std::uint64_t seed);

struct LabeledScans {
  std::vector<img::GrayImage> images;
  std::vector<int> labels;
};

/// Alternating labels 0, 1, 0, ...; sample i uses seed mix_seed(seed, i) and
/// positives carry a bright square.
LabeledScans bright_square_set(int count, int size, std::uint64_t seed);

}  // namespace plr::synth
