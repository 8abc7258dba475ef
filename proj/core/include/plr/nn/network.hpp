#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "plr/nn/tensor.hpp"

namespace plr::nn {

/// Encoder/decoder layout. Level l carries base_channels * 2^l channels and
/// runs convs_per_level 3x3 conv+ReLU units; levels are separated by 2x2 max
/// pooling. The decoder mirrors the encoder with nearest upsampling and skip
/// concatenation.
struct UNetConfig {
  int levels = 5;
  int base_channels = 64;
  int convs_per_level = 2;
  int kernel = 3;

  /// Five levels of 64..1024 channels: ten encoder convolutions.
  static UNetConfig faithful() { return {}; }
  /// Three levels of 8..32 channels, small enough for CPU runs on 64x64 inputs.
  static UNetConfig desk() { return {3, 8, 2, 3}; }

  int channels(int level) const { return base_channels << level; }
  int encoder_conv_count() const { return levels * convs_per_level; }
  /// Input height and width must be multiples of this.
  int size_divisor() const { return 1 << (levels - 1); }
  void validate() const;

  bool operator==(const UNetConfig&) const = default;
};

enum class ModelKind : std::uint32_t { kRestoration = 1, kClassifier = 2 };

struct ArchSpec {
  ModelKind kind = ModelKind::kRestoration;
  UNetConfig unet;
  int head_units = 512;  // classifier only

  /// FNV-1a over every architecture field.
  std::uint64_t fingerprint() const;
  /// FNV-1a over the encoder fields only; equal values allow an encoder transplant.
  std::uint64_t encoder_fingerprint() const;

  bool operator==(const ArchSpec&) const = default;
};

struct ConvLayerSpec {
  std::string name;  // "conv_<k>", numbered from 1 in forward order
  int in_channels;
  int out_channels;
  int kernel;
  bool encoder;
};

/// Every 3x3 conv layer in forward order: encoder first, then decoder (the
/// decoder only exists for restoration models). The 1x1 output conv is not
/// listed.
std::vector<ConvLayerSpec> conv_layers(const ArchSpec& arch);

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> value;

  bool operator==(const NamedTensor&) const = default;
};

/// Named parameters in fixed topological order plus the architecture they belong to.
template <typename T>
class ModelWeights {
 public:
  ArchSpec arch;
  std::vector<NamedTensor<T>> tensors;

  const Tensor<T>& get(std::string_view name) const;
  Tensor<T>& get(std::string_view name);
  const Tensor<T>* find(std::string_view name) const;

  /// Same names and shapes, all zeros.
  ModelWeights zeros_like() const;
  std::size_t parameter_count() const;

  bool operator==(const ModelWeights&) const = default;
};

/// Kaiming-normal weights (std = sqrt(2 / fan_in)) and zero biases.
template <typename T>
ModelWeights<T> init_unet(const UNetConfig& config, std::uint64_t seed);

template <typename T>
ModelWeights<T> init_classifier(const UNetConfig& config, int head_units, std::uint64_t seed);

/// All-zero parameters laid out for `arch`.
template <typename T>
ModelWeights<T> zero_model(const ArchSpec& arch);

/// Copies encoder tensors from `source` into `target`. Throws
/// FingerprintMismatch when the encoder layouts differ.
template <typename T>
void transplant_encoder(const ModelWeights<T>& source, ModelWeights<T>& target);

template <typename T>
struct EncoderTape {
  std::vector<Tensor<T>> conv_inputs;
  std::vector<Tensor<T>> conv_outputs;  // post-ReLU
  std::vector<std::vector<std::uint32_t>> pool_argmax;
  std::vector<Shape> pool_inputs;
};

template <typename T>
struct UNetTape {
  EncoderTape<T> encoder;
  std::vector<Tensor<T>> decoder_inputs;
  std::vector<Tensor<T>> decoder_outputs;
  Tensor<T> head_input;
  Tensor<T> output;  // post-sigmoid
};

template <typename T>
struct ClassifierTape {
  EncoderTape<T> encoder;
  Shape pooled_from;
  Tensor<T> pooled;
  Tensor<T> hidden;  // post-ReLU fc_1 output
  Tensor<T> output;  // post-sigmoid
};

/// Restoration network; output has the input's shape with values in (0, 1).
template <typename T>
Tensor<T> unet_forward(const ModelWeights<T>& weights, const Tensor<T>& input, UNetTape<T>* tape = nullptr);

template <typename T>
ModelWeights<T> unet_backward(const ModelWeights<T>& weights, const UNetTape<T>& tape, const Tensor<T>& grad_out);

/// Encoder -> global average pooling -> fc_1 + ReLU -> fc_2 -> sigmoid.
/// Returns (n, 1, 1, 1) probabilities.
template <typename T>
Tensor<T> classifier_forward(const ModelWeights<T>& weights, const Tensor<T>& input,
                             ClassifierTape<T>* tape = nullptr);

template <typename T>
ModelWeights<T> classifier_backward(const ModelWeights<T>& weights, const ClassifierTape<T>& tape,
                                    const Tensor<T>& grad_out);

/// Post-ReLU output of conv layer `layer` ("conv_<k>") for either model kind.
template <typename T>
Tensor<T> layer_activation(const ModelWeights<T>& weights, const Tensor<T>& input, std::string_view layer);

}  // namespace plr::nn
