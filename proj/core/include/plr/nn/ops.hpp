#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "plr/nn/tensor.hpp"

// Forward ops and their hand-derived gradients. Every backward function takes
// the upstream gradient dL/d(output) and returns dL/d(inputs).
namespace plr::nn {

/// Stride-1 cross-correlation with zero "same" padding.
/// weight: (out_ch, in_ch, k, k) with odd k; bias: (out_ch, 1, 1, 1).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T>
struct ConvGrads {
  Tensor<T> input;  // left empty when not requested
  Tensor<T> weight;
  Tensor<T> bias;
};

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& grad_out,
                             bool want_input_grad = true);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

/// Uses the forward output: the gradient passes where output > 0.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& output, const Tensor<T>& grad_out);

template <typename T>
struct PoolResult {
  Tensor<T> output;
  std::vector<std::uint32_t> argmax;  // flat input index per output element
};

/// 2x2 window, stride 2. Odd spatial sizes are rejected.
template <typename T>
PoolResult<T> maxpool2(const Tensor<T>& x);

template <typename T>
Tensor<T> maxpool2_backward(const Shape& input_shape, const std::vector<std::uint32_t>& argmax,
                            const Tensor<T>& grad_out);

template <typename T>
Tensor<T> upsample_nearest2(const Tensor<T>& x);

/// Transpose of nearest upsampling: sums each 2x2 block.
template <typename T>
Tensor<T> upsample_nearest2_backward(const Tensor<T>& grad_out);

/// Stacks b after a on the channel axis.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
std::pair<Tensor<T>, Tensor<T>> concat_channels_backward(const Tensor<T>& grad_out, std::size_t a_channels);

/// (n, c, h, w) -> (n, c, 1, 1)
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x);

template <typename T>
Tensor<T> global_avg_pool_backward(const Shape& input_shape, const Tensor<T>& grad_out);

/// input: (n, in, 1, 1); weight: (out, in, 1, 1); bias: (out, 1, 1, 1).
template <typename T>
Tensor<T> dense(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T>
struct DenseGrads {
  Tensor<T> input;
  Tensor<T> weight;
  Tensor<T> bias;
};

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& grad_out);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& output, const Tensor<T>& grad_out);

}  // namespace plr::nn
