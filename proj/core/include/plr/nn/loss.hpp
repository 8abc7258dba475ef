#pragma once

#include <span>

#include "plr/nn/tensor.hpp"

namespace plr::nn {

template <typename T>
struct LossResult {
  T loss{};
  Tensor<T> grad;  // dL/d(prediction)
};

/// Mean over all elements of (pred - target)^2.
template <typename T>
LossResult<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target);

inline constexpr double kProbabilityClamp = 1e-7;

/// Batch-mean binary cross-entropy on probabilities of shape (n, 1, 1, 1).
/// Probabilities are clamped to [1e-7, 1 - 1e-7] for both value and gradient.
template <typename T>
LossResult<T> bce_loss(const Tensor<T>& prob, std::span<const int> labels);

}  // namespace plr::nn
