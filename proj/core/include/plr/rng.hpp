#pragma once

#include <cstdint>
#include <random>

namespace plr {

/// Seeded random stream used throughout the pipeline.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The distribution helpers are implemented here rather than via
/// <random> distributions because the latter are implementation-defined and
/// would make generated artifacts differ between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform integer on the closed range [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  /// Uniform index on [0, n).
  std::size_t index(std::size_t n);

  /// Uniform double on [0, 1) with 53 random bits.
  double uniform01();

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via Box-Muller (no cached second value).
  double normal();

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; used to derive independent seeds from a base seed
/// and a stream index (counter-based seeding).
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace plr
