#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>

#include "plr/error.hpp"
#include "plr/perlin.hpp"
#include "plr/rng.hpp"

using namespace plr::perlin;

TEST(PerlinTable, PermutationRepeatsAndIsSeeded) {
  const auto t = build_table(42);
  std::array<std::uint16_t, 256> first{};
  std::copy(t.perm.begin(), t.perm.begin() + 256, first.begin());
  std::array<std::uint16_t, 256> sorted = first;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 256; ++i) {
    EXPECT_EQ(sorted[static_cast<std::size_t>(i)], i);
    EXPECT_EQ(t.perm[static_cast<std::size_t>(i)], t.perm[static_cast<std::size_t>(i + 256)]);
  }
  EXPECT_EQ(build_table(42).perm, t.perm);
  EXPECT_NE(build_table(43).perm, t.perm);
  for (const auto& g : t.grads) EXPECT_NEAR(std::hypot(g.x, g.y), 1.0, 1e-15);
}

TEST(Fade, EndpointsAndMidpointAreExact) {
  EXPECT_EQ(fade(0.0), 0.0);
  EXPECT_EQ(fade(1.0), 1.0);
  EXPECT_EQ(fade(0.5), 0.5);
}

TEST(Fade, FirstAndSecondDerivativesVanishAtEndpoints) {
  // Central differences; the polynomial is evaluated just outside [0, 1].
  const double h = 1e-4;
  for (double t : {0.0, 1.0}) {
    EXPECT_NEAR((fade(t + h) - fade(t - h)) / (2 * h), 0.0, 1e-6) << t;
    EXPECT_NEAR((fade(t + h) - 2 * fade(t) + fade(t - h)) / (h * h), 0.0, 1e-6) << t;
  }
}

TEST(Fade, MatchesPolynomial) {
  for (int i = 0; i <= 100; ++i) {
    const double t = i / 100.0;
    EXPECT_NEAR(fade(t), 6 * std::pow(t, 5) - 15 * std::pow(t, 4) + 10 * std::pow(t, 3), 1e-14);
  }
}

TEST(Noise2, ZeroOnIntegerLattice) {
  const auto t = build_table(7);
  plr::Rng rng(1);
  for (int k = 0; k < 10000; ++k) {
    const double x = static_cast<double>(rng.uniform_int(-100000, 100000));
    const double y = static_cast<double>(rng.uniform_int(-100000, 100000));
    ASSERT_EQ(noise2(t, x, y), 0.0) << x << "," << y;
  }
}

TEST(Noise2, SlopeAtLatticePointIsTheCornerGradient) {
  // fade'(0) = 0, so only the corner's own dot product has a first-order term.
  const auto t = build_table(11);
  const double h = 1e-5;
  for (int i = -3; i < 20; ++i) {
    for (int j = -2; j < 5; ++j) {
      const auto& g = t.gradient(i, j);
      const double dx = (noise2(t, i + h, j) - noise2(t, i - h, j)) / (2 * h);
      const double dy = (noise2(t, i, j + h) - noise2(t, i, j - h)) / (2 * h);
      EXPECT_NEAR(dx, g.x, 1e-6);
      EXPECT_NEAR(dy, g.y, 1e-6);
    }
  }
}

TEST(Noise2, BoundedAndPeriodicIn256) {
  const auto t = build_table(3);
  plr::Rng rng(2);
  for (int k = 0; k < 5000; ++k) {
    const double x = rng.uniform(-300, 300), y = rng.uniform(-300, 300);
    const double n = noise2(t, x, y);
    EXPECT_LE(std::abs(n), 1.0);
    EXPECT_NEAR(noise2(t, x + 256, y), n, 1e-9);
  }
}

TEST(OctaveSum, NormalizesByAmplitudeSum) {
  OctaveParams p{4, 1.0, 0.5, 2.0};
  EXPECT_DOUBLE_EQ(octave_sum([](double, double) { return 1.0; }, 3.0, 4.0, p), 1.0);
  EXPECT_DOUBLE_EQ(octave_sum([](double, double) { return -1.0; }, 3.0, 4.0, p), -1.0);

  // noise(x, y) = x picks up sum a_k f_k / sum a_k.
  OctaveParams q{3, 0.25, 0.5, 3.0};
  const double expect = 2.0 * (1.0 * 0.25 + 0.5 * 0.75 + 0.25 * 2.25) / 1.75;
  EXPECT_NEAR(octave_sum([](double x, double) { return x; }, 2.0, 0.0, q), expect, 1e-15);
}

TEST(OctaveNoise, AgreesWithOctaveSumOverNoise2) {
  const auto t = build_table(5);
  const OctaveParams p;
  NoiseFn base = [&](double x, double y) { return noise2(t, x, y); };
  for (int k = 0; k < 100; ++k) {
    const double x = k * 3.7, y = k * 1.3;
    EXPECT_DOUBLE_EQ(octave_noise(t, x, y, p), octave_sum(base, x, y, p));
  }
}

TEST(RenderNoise, MapsUnitRangeToBytesAndRepeats) {
  const OctaveParams p;
  const auto img = render_noise_image(9, 64, p);
  ASSERT_EQ(img.width(), 64);
  EXPECT_EQ(img.at(0, 0), 128);  // lattice point: (0 + 1) / 2 * 255 = 127.5
  const auto t = build_table(9);
  for (int v = 0; v < 64; v += 7) {
    for (int u = 0; u < 64; u += 5) {
      EXPECT_EQ(img.at(u, v), plr::img::quantize((octave_noise(t, u, v, p) + 1.0) * 127.5));
    }
  }
  EXPECT_EQ(render_noise_image(9, 64, p), img);
  EXPECT_NE(render_noise_image(10, 64, p), img);
}

TEST(OctaveParams, ValidationRejectsBadValues) {
  EXPECT_THROW((OctaveParams{0, 0.1, 0.5, 2.0}.validate()), plr::Error);
  EXPECT_THROW((OctaveParams{1, 0.0, 0.5, 2.0}.validate()), plr::Error);
  EXPECT_THROW((OctaveParams{1, 0.1, 1.5, 2.0}.validate()), plr::Error);
  EXPECT_THROW((OctaveParams{1, 0.1, 0.5, 1.0}.validate()), plr::Error);
  EXPECT_THROW(render_noise_image(1, 0, OctaveParams{}), plr::Error);
}

TEST(Noise2, ContinuousAndBoundedOverManySamples) {
  const auto t = build_table(0);
  plr::Rng rng(12);
  double max_abs = 0.0;
  for (int k = 0; k < 1000000; ++k) {
    const double x = rng.uniform(-512, 512), y = rng.uniform(-512, 512);
    const double n = noise2(t, x, y);
    max_abs = std::max(max_abs, std::abs(n));
    if (k < 1000) EXPECT_LT(std::abs(n - noise2(t, x + 1e-6, y)), 1e-4);
  }
  EXPECT_LE(max_abs, 1.0);
  EXPECT_EQ(noise2(t, 3.0, 7.0), 0.0);
}

TEST(OctaveNoise, SingleOctaveIsScaledNoise2) {
  const auto t = build_table(4);
  const OctaveParams one{1, 0.05, 0.5, 2.0};
  for (int k = 0; k < 50; ++k) EXPECT_EQ(octave_noise(t, k * 2.1, k * 0.7, one), noise2(t, k * 2.1 * 0.05, k * 0.7 * 0.05));
  const OctaveParams flat{2, 1.0, 1.0, 2.0};
  EXPECT_EQ(octave_noise(t, 5.0, 9.0, flat), 0.0);
}

TEST(RenderNoise, DefaultMeanIsNearMidGray) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto img = render_noise_image(seed, 512, {});
    double sum = 0;
    for (auto p : img.pixels()) sum += p;
    const double mean = sum / static_cast<double>(img.size());
    EXPECT_GE(mean, 96.0);
    EXPECT_LE(mean, 160.0);
  }
  EXPECT_EQ(render_noise_image(1, 1, {}).size(), 1u);
}
