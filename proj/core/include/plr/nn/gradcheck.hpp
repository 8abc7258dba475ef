#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace plr::nn {

inline constexpr double kGradStep = 1e-6;
inline constexpr double kOpTolerance = 1e-4;
inline constexpr double kEndToEndTolerance = 1e-3;

/// |a - n| / max(|a|, |n|, 1e-3). The floor keeps round-off in near-zero
/// gradients (about 1e-9 at h = 1e-6) from reading as large relative errors.
double relative_error(double analytic, double numeric);

struct GradCheckReport {
  std::string op;
  int trials = 0;
  std::size_t checked = 0;  // scalar derivatives compared
  std::size_t skipped = 0;  // entries whose finite difference straddled a kink
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// conv2d, relu, maxpool2, upsample_nearest2, concat_channels,
/// global_avg_pool, dense, sigmoid, mse_loss, bce_loss, then the end-to-end
/// "unet" and "classifier" checks.
std::vector<std::string> gradcheck_ops();

/// kOpTolerance for single ops, kEndToEndTolerance for the full networks.
double default_tolerance(std::string_view op);

/// Central finite differences at f64 on random small shapes. Each trial
/// draws fresh shapes and values. Full networks run on 8x8 inputs and compare
/// a random slice of their weights. Throws InvalidArgument for an unknown op.
GradCheckReport grad_check(std::string_view op, int trials, double tolerance, std::uint64_t seed);

}  // namespace plr::nn
