#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "plr/nn/network.hpp"

namespace plr::nn {

enum class OptimizerKind { kSgd, kAdadelta };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view text);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kSgd;
  double lr = 1e-3;
  double momentum = 0.0;  // SGD only
  double rho = 0.95;      // Adadelta only
  double eps = 1e-6;      // Adadelta only

  void validate() const;
  bool operator==(const OptimizerConfig&) const = default;
};

/// SGD:      v = momentum*v - lr*g;  p += v
/// Adadelta: E[g2] = rho*E[g2] + (1-rho)*g^2
///           d = -sqrt(E[dx2] + eps) / sqrt(E[g2] + eps) * g
///           p += lr*d;  E[dx2] = rho*E[dx2] + (1-rho)*d^2
template <typename T>
class Optimizer {
 public:
  Optimizer(const OptimizerConfig& config, const ModelWeights<T>& params);

  /// Throws NonFinite (naming the tensor) if any gradient is NaN or infinite;
  /// parameters are left untouched in that case.
  void step(ModelWeights<T>& params, const ModelWeights<T>& grads);

  double lr() const { return config_.lr; }
  void set_lr(double lr) { config_.lr = lr; }
  const OptimizerConfig& config() const { return config_; }
  long steps() const { return steps_; }

  // Per-parameter accumulators, same order and shapes as the parameters.
  // SGD uses `first` for velocity; Adadelta uses first = E[g2], second = E[dx2].
  const std::vector<Tensor<T>>& first() const { return first_; }
  const std::vector<Tensor<T>>& second() const { return second_; }

 private:
  OptimizerConfig config_;
  std::vector<Tensor<T>> first_;
  std::vector<Tensor<T>> second_;
  long steps_ = 0;
};

enum class MetricMode { kMin, kMax };

struct PlateauConfig {
  MetricMode mode = MetricMode::kMin;
  int patience = 10;
  double factor = 0.5;
  double min_lr = 1e-6;

  void validate() const;
  bool operator==(const PlateauConfig&) const = default;
};

/// Reduce-on-plateau: once `patience` consecutive epochs fail to improve on
/// the best metric, the lr is multiplied by `factor` (floored at min_lr) and
/// the counter restarts. Any strict improvement resets the counter.
class PlateauScheduler {
 public:
  explicit PlateauScheduler(const PlateauConfig& config);

  /// Returns the lr to use from the next epoch on.
  double step(double metric, double lr);

  std::optional<double> best() const { return best_; }
  int bad_epochs() const { return bad_epochs_; }
  int reductions() const { return reductions_; }
  /// True if the last metric passed to step() was a new best.
  bool last_improved() const { return last_improved_; }

 private:
  PlateauConfig config_;
  std::optional<double> best_;
  int bad_epochs_ = 0;
  int reductions_ = 0;
  bool last_improved_ = false;
};

}  // namespace plr::nn
