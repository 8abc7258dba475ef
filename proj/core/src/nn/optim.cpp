#include "plr/nn/optim.hpp"

#include <algorithm>
#include <cmath>

#include "plr/error.hpp"

namespace plr::nn {

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::kSgd ? "sgd" : "adadelta";
}

OptimizerKind parse_optimizer(std::string_view text) {
  if (text == "sgd") return OptimizerKind::kSgd;
  if (text == "adadelta") return OptimizerKind::kAdadelta;
  fail(ErrorCode::kInvalidArgument, "unknown optimizer '" + std::string(text) + "' (expected sgd or adadelta)");
}

void OptimizerConfig::validate() const {
  require(std::isfinite(lr) && lr > 0.0, ErrorCode::kInvalidArgument, "lr must be positive");
  require(momentum >= 0.0 && momentum < 1.0, ErrorCode::kInvalidArgument, "momentum must lie in [0, 1)");
  require(rho > 0.0 && rho < 1.0, ErrorCode::kInvalidArgument, "rho must lie in (0, 1)");
  require(eps > 0.0, ErrorCode::kInvalidArgument, "eps must be positive");
}

template <typename T>
Optimizer<T>::Optimizer(const OptimizerConfig& config, const ModelWeights<T>& params) : config_(config) {
  config_.validate();
  for (const auto& p : params.tensors) {
    first_.emplace_back(p.value.shape());
    if (config_.kind == OptimizerKind::kAdadelta) second_.emplace_back(p.value.shape());
  }
}

template <typename T>
void Optimizer<T>::step(ModelWeights<T>& params, const ModelWeights<T>& grads) {
  require(params.tensors.size() == first_.size() && grads.tensors.size() == first_.size(),
          ErrorCode::kShapeMismatch, "optimizer: parameter count changed");
  for (std::size_t i = 0; i < grads.tensors.size(); ++i) {
    check_shape(grads.tensors[i].value.shape(), params.tensors[i].value.shape(), grads.tensors[i].name);
    check_finite(grads.tensors[i].value, "gradient of " + grads.tensors[i].name);
  }
  const double lr = config_.lr;
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    T* p = params.tensors[i].value.data();
    const T* g = grads.tensors[i].value.data();
    T* a = first_[i].data();
    const std::size_t n = first_[i].size();
    if (config_.kind == OptimizerKind::kSgd) {
      const double m = config_.momentum;
      for (std::size_t j = 0; j < n; ++j) {
        const double v = m * static_cast<double>(a[j]) - lr * static_cast<double>(g[j]);
        a[j] = static_cast<T>(v);
        p[j] = static_cast<T>(static_cast<double>(p[j]) + v);
      }
    } else {
      T* b = second_[i].data();
      const double rho = config_.rho;
      const double eps = config_.eps;
      for (std::size_t j = 0; j < n; ++j) {
        const double gj = static_cast<double>(g[j]);
        const double eg = rho * static_cast<double>(a[j]) + (1.0 - rho) * gj * gj;
        const double d = -std::sqrt(static_cast<double>(b[j]) + eps) / std::sqrt(eg + eps) * gj;
        a[j] = static_cast<T>(eg);
        b[j] = static_cast<T>(rho * static_cast<double>(b[j]) + (1.0 - rho) * d * d);
        p[j] = static_cast<T>(static_cast<double>(p[j]) + lr * d);
      }
    }
  }
  ++steps_;
}

void PlateauConfig::validate() const {
  require(patience >= 1, ErrorCode::kInvalidArgument, "scheduler patience must be >= 1");
  require(factor > 0.0 && factor < 1.0, ErrorCode::kInvalidArgument, "scheduler factor must lie in (0, 1)");
  require(min_lr >= 0.0, ErrorCode::kInvalidArgument, "scheduler min_lr must be >= 0");
}

PlateauScheduler::PlateauScheduler(const PlateauConfig& config) : config_(config) { config_.validate(); }

double PlateauScheduler::step(double metric, double lr) {
  const bool better = !best_ || (config_.mode == MetricMode::kMin ? metric < *best_ : metric > *best_);
  last_improved_ = better;
  if (better) {
    best_ = metric;
    bad_epochs_ = 0;
    return lr;
  }
  if (++bad_epochs_ < config_.patience) return lr;
  bad_epochs_ = 0;
  const double reduced = std::max(lr * config_.factor, config_.min_lr);
  if (reduced < lr) ++reductions_;
  return reduced;
}

template class Optimizer<float>;
template class Optimizer<double>;

}  // namespace plr::nn
