#include "plr/nn/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "plr/error.hpp"

namespace plr::nn {

std::string Shape::str() const {
  return "(" + std::to_string(n) + ", " + std::to_string(c) + ", " + std::to_string(h) + ", " +
         std::to_string(w) + ")";
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
  require(data_.size() == shape_.numel(), ErrorCode::kShapeMismatch,
          "tensor data length " + std::to_string(data_.size()) + " does not match shape " + shape_.str());
}

template <typename T>
void Tensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
bool Tensor<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
void check_finite(const Tensor<T>& t, std::string_view what) {
  if (t.all_finite()) return;
  const auto values = t.values();
  const auto it = std::find_if(values.begin(), values.end(), [](T v) { return !std::isfinite(v); });
  fail(ErrorCode::kNonFinite, std::string(what) + " contains a non-finite value at index " +
                                  std::to_string(it - values.begin()) + " (shape " + t.shape().str() + ")");
}

void check_shape(const Shape& actual, const Shape& expected, std::string_view what) {
  require(actual == expected, ErrorCode::kShapeMismatch,
          std::string(what) + ": expected shape " + expected.str() + ", got " + actual.str());
}

template class Tensor<float>;
template class Tensor<double>;
template void check_finite(const Tensor<float>&, std::string_view);
template void check_finite(const Tensor<double>&, std::string_view);

}  // namespace plr::nn
