#include "plr/nn/loss.hpp"

#include <algorithm>
#include <cmath>

#include "plr/error.hpp"

namespace plr::nn {

template <typename T>
LossResult<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  check_shape(target.shape(), pred.shape(), "mse_loss target");
  require(!pred.empty(), ErrorCode::kEmptyInput, "mse_loss on an empty tensor");
  LossResult<T> r{T{0}, Tensor<T>(pred.shape())};
  const T n = static_cast<T>(pred.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T d = pred[i] - target[i];
    sum += static_cast<double>(d) * static_cast<double>(d);
    r.grad[i] = T{2} * d / n;
  }
  r.loss = static_cast<T>(sum / static_cast<double>(pred.size()));
  return r;
}

template <typename T>
LossResult<T> bce_loss(const Tensor<T>& prob, std::span<const int> labels) {
  const Shape& s = prob.shape();
  require(s.c == 1 && s.h == 1 && s.w == 1 && s.n == labels.size(), ErrorCode::kShapeMismatch,
          "bce_loss expects (n,1,1,1) probabilities and n labels, got " + s.str());
  require(s.n > 0, ErrorCode::kEmptyInput, "bce_loss on an empty batch");
  LossResult<T> r{T{0}, Tensor<T>(s)};
  const T lo = static_cast<T>(kProbabilityClamp);
  const T hi = T{1} - lo;
  const T n = static_cast<T>(s.n);
  double sum = 0.0;
  for (std::size_t i = 0; i < s.n; ++i) {
    const T p = std::clamp(prob[i], lo, hi);
    const int y = labels[i];
    require(y == 0 || y == 1, ErrorCode::kInvalidArgument, "labels must be 0 or 1");
    if (y == 1) {
      sum -= std::log(static_cast<double>(p));
      r.grad[i] = -T{1} / (p * n);
    } else {
      sum -= std::log1p(-static_cast<double>(p));
      r.grad[i] = T{1} / ((T{1} - p) * n);
    }
  }
  r.loss = static_cast<T>(sum / static_cast<double>(s.n));
  return r;
}

template LossResult<float> mse_loss(const Tensor<float>&, const Tensor<float>&);
template LossResult<double> mse_loss(const Tensor<double>&, const Tensor<double>&);
template LossResult<float> bce_loss(const Tensor<float>&, std::span<const int>);
template LossResult<double> bce_loss(const Tensor<double>&, std::span<const int>);

}  // namespace plr::nn
