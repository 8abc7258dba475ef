#pragma once

#include <array>
#include <cstdint>
#include <functional>

#include "plr/imgcore.hpp"

namespace plr::perlin {

struct Gradient {
  double x;
  double y;
};

/// Permutation and gradient tables for improved 2D gradient noise. The
/// first 256 permutation entries are a seeded shuffle of 0..255 and the
/// second half repeats them, so perm[perm[i] + j] never needs wrapping.
struct PerlinTable {
  std::array<std::uint16_t, 512> perm{};
  std::array<Gradient, 8> grads{};

  const Gradient& gradient(int i, int j) const {
    return grads[perm[static_cast<std::size_t>(perm[static_cast<std::size_t>(i & 255)] + (j & 255))] & 7];
  }
};

// Three octaves at persistence 0.3 leave enough bright area for patches with
// mean > 180; five octaves at 0.5 average the tails away.
struct OctaveParams {
  int octaves = 3;
  double base_frequency = 4.0 / 512.0;
  double persistence = 0.3;
  double lacunarity = 2.0;

  void validate() const;
};

PerlinTable build_table(std::uint64_t seed);

/// Quintic fade 6t^5 - 15t^4 + 10t^3.
double fade(double t);

/// Single-octave gradient noise in [-1, 1]; exactly zero on integer lattice points.
double noise2(const PerlinTable& table, double x, double y);

using NoiseFn = std::function<double(double x, double y)>;

/// Amplitude-normalized octave sum over an arbitrary base noise. Exposed so
/// the normalization can be checked with a stub noise source.
double octave_sum(const NoiseFn& noise, double x, double y, const OctaveParams& params);

double octave_noise(const PerlinTable& table, double x, double y, const OctaveParams& params);

/// Square noise image; pixel (u, v) maps octave_noise(u, v) from [-1, 1] to [0, 255].
img::GrayImage render_noise_image(std::uint64_t seed, int size, const OctaveParams& params);

}  // namespace plr::perlin
