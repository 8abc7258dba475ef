#include "plr/perlin.hpp"

#include <cmath>
#include <numeric>

#include "plr/error.hpp"
#include "plr/rng.hpp"

namespace plr::perlin {

void OctaveParams::validate() const {
  require(octaves >= 1, ErrorCode::kInvalidArgument, "octaves must be >= 1");
  require(base_frequency > 0.0 && std::isfinite(base_frequency), ErrorCode::kInvalidArgument,
          "base frequency must be positive");
  require(persistence > 0.0 && persistence <= 1.0, ErrorCode::kInvalidArgument,
          "persistence must lie in (0, 1]");
  require(lacunarity > 1.0 && std::isfinite(lacunarity), ErrorCode::kInvalidArgument,
          "lacunarity must be > 1");
}

PerlinTable build_table(std::uint64_t seed) {
  PerlinTable table;
  std::array<std::uint16_t, 256> p{};
  std::iota(p.begin(), p.end(), std::uint16_t{0});
  Rng rng(seed);
  for (std::size_t i = p.size() - 1; i > 0; --i) {
    std::swap(p[i], p[rng.index(i + 1)]);
  }
  for (std::size_t i = 0; i < 256; ++i) {
    table.perm[i] = p[i];
    table.perm[i + 256] = p[i];
  }
  // Eight directions at 45 degree steps; the diagonals use sqrt(1/2).
  const double d = std::sqrt(0.5);
  table.grads = {{{1.0, 0.0}, {d, d}, {0.0, 1.0}, {-d, d}, {-1.0, 0.0}, {-d, -d}, {0.0, -1.0}, {d, -d}}};
  return table;
}

double fade(double t) {
  return t * t * t * (t * (t * 6.0 - 15.0) + 10.0);
}

double noise2(const PerlinTable& table, double x, double y) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const int i = static_cast<int>(static_cast<long long>(fx) & 255);
  const int j = static_cast<int>(static_cast<long long>(fy) & 255);
  const double tx = x - fx;
  const double ty = y - fy;

  auto corner = [&](int di, int dj) {
    const Gradient& g = table.gradient(i + di, j + dj);
    return g.x * (tx - di) + g.y * (ty - dj);
  };
  const double n00 = corner(0, 0);
  const double n10 = corner(1, 0);
  const double n01 = corner(0, 1);
  const double n11 = corner(1, 1);

  const double u = fade(tx);
  const double v = fade(ty);
  const double nx0 = n00 + u * (n10 - n00);
  const double nx1 = n01 + u * (n11 - n01);
  return nx0 + v * (nx1 - nx0);
}

double octave_sum(const NoiseFn& noise, double x, double y, const OctaveParams& params) {
  double total = 0.0;
  double norm = 0.0;
  double amplitude = 1.0;
  double frequency = params.base_frequency;
  for (int k = 0; k < params.octaves; ++k) {
    total += amplitude * noise(x * frequency, y * frequency);
    norm += amplitude;
    amplitude *= params.persistence;
    frequency *= params.lacunarity;
  }
  return total / norm;
}

double octave_noise(const PerlinTable& table, double x, double y, const OctaveParams& params) {
  double total = 0.0;
  double norm = 0.0;
  double amplitude = 1.0;
  double frequency = params.base_frequency;
  for (int k = 0; k < params.octaves; ++k) {
    total += amplitude * noise2(table, x * frequency, y * frequency);
    norm += amplitude;
    amplitude *= params.persistence;
    frequency *= params.lacunarity;
  }
  return total / norm;
}

img::GrayImage render_noise_image(std::uint64_t seed, int size, const OctaveParams& params) {
  require(size > 0, ErrorCode::kInvalidArgument, "noise image size must be positive");
  params.validate();
  const PerlinTable table = build_table(seed);
  img::GrayImage out(size, size);
  for (int v = 0; v < size; ++v) {
    for (int u = 0; u < size; ++u) {
      const double n = octave_noise(table, u, v, params);
      out.at(u, v) = img::quantize((n + 1.0) * 0.5 * 255.0);
    }
  }
  return out;
}

}  // namespace plr::perlin
