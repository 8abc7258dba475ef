#include "plr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "plr/error.hpp"
#include "plr/perlin.hpp"
#include "plr/rng.hpp"

namespace plr::synth {

namespace {

bool inside_ellipse(double x, double y, double cx, double cy, double rx, double ry) {
  const double dx = (x - cx) / rx, dy = (y - cy) / ry;
  return dx * dx + dy * dy <= 1.0;
}

}  // namespace

img::GrayImage normal_scan(int size, std::uint64_t seed) {
  require(size >= 16, ErrorCode::kInvalidArgument, "phantom size must be >= 16");
  Rng rng(seed);
  const double s = size;
  const double body_rx = s * rng.uniform(0.42, 0.47), body_ry = s * rng.uniform(0.34, 0.40);
  const double lung_rx = s * rng.uniform(0.13, 0.16), lung_ry = s * rng.uniform(0.22, 0.27);
  const double lung_dx = s * rng.uniform(0.19, 0.22);
  const double body_level = rng.uniform(150.0, 175.0);
  const double lung_level = rng.uniform(25.0, 40.0);
  const double c = (s - 1) * 0.5;

  const auto table = perlin::build_table(mix_seed(seed, 1));
  perlin::OctaveParams texture{3, 6.0 / s, 0.5, 2.0};

  img::GrayImage out(size, size, 0);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      if (!inside_ellipse(x, y, c, c, body_rx, body_ry)) continue;
      const double n = perlin::octave_noise(table, x, y, texture);
      const bool lung = inside_ellipse(x, y, c - lung_dx, c, lung_rx, lung_ry) ||
                        inside_ellipse(x, y, c + lung_dx, c, lung_rx, lung_ry);
      out.at(x, y) = img::quantize(lung ? lung_level + 30.0 * n : body_level + 20.0 * n);
    }
  }
  // Vessel cross-sections: small bright discs inside the lungs, kept below the
  // mask threshold so they read as lung tissue.
  const int vessels = static_cast<int>(rng.uniform_int(4, 8));
  const double radius = std::max(1.0, s / 64.0);
  for (int v = 0; v < vessels; ++v) {
    const double side = rng.uniform01() < 0.5 ? -1.0 : 1.0;
    const double vx = c + side * lung_dx + rng.uniform(-0.6, 0.6) * lung_rx;
    const double vy = c + rng.uniform(-0.6, 0.6) * lung_ry;
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        if (inside_ellipse(x, y, vx, vy, radius, radius)) out.at(x, y) = 85;
      }
    }
  }
  return out;
}

img::GrayImage with_bright_square(const img::GrayImage& scan, std::uint64_t seed) {
  Rng rng(seed);
  const auto mask = img::derive_lung_mask(scan, 100);
  std::vector<std::pair<int, int>> lung;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.at(x, y)) lung.emplace_back(x, y);
    }
  }
  require(!lung.empty(), ErrorCode::kEmptyMask, "scan has no lung region");
  const int side = std::max(3, static_cast<int>(std::lround(scan.width() * rng.uniform(0.22, 0.3))));
  const auto [cx, cy] = lung[rng.index(lung.size())];
  const auto value = static_cast<std::uint8_t>(rng.uniform_int(235, 255));
  img::GrayImage out = scan;
  for (int y = cy - side / 2; y < cy - side / 2 + side; ++y) {
    for (int x = cx - side / 2; x < cx - side / 2 + side; ++x) {
      if (x >= 0 && y >= 0 && x < out.width() && y < out.height()) out.at(x, y) = value;
    }
  }
  return out;
}

LabeledScans bright_square_set(int count, int size, std::uint64_t seed) {
  require(count >= 0, ErrorCode::kInvalidArgument, "sample count must be >= 0");
  LabeledScans set;
  for (int i = 0; i < count; ++i) {
    const std::uint64_t s = mix_seed(seed, static_cast<std::uint64_t>(i));
    const int label = i % 2;
    auto scan = normal_scan(size, s);
    if (label == 1) scan = with_bright_square(scan, mix_seed(s, 1));
    set.images.push_back(std::move(scan));
    set.labels.push_back(label);
  }
  return set;
}

}  // namespace plr::synth
