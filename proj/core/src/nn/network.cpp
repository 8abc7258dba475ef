#include "plr/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "plr/error.hpp"
#include "plr/nn/ops.hpp"
#include "plr/rng.hpp"

namespace plr::nn {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void fnv_mix(std::uint64_t& h, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    h ^= (v >> (8 * i)) & 0xFF;
    h *= kFnvPrime;
  }
}

std::string weight_name(const std::string& layer) { return layer + ".weight"; }
std::string bias_name(const std::string& layer) { return layer + ".bias"; }

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  check_shape(src.shape(), dst.shape(), "gradient accumulation");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename T>
void check_input(const ArchSpec& arch, const Tensor<T>& input) {
  const Shape& s = input.shape();
  require(s.c == 1, ErrorCode::kShapeMismatch, "network input must have one channel, got " + s.str());
  const auto div = static_cast<std::size_t>(arch.unet.size_divisor());
  require(s.h > 0 && s.w > 0 && s.h % div == 0 && s.w % div == 0, ErrorCode::kShapeMismatch,
          "input size " + std::to_string(s.h) + "x" + std::to_string(s.w) + " is not divisible by " +
              std::to_string(div) + " (2^(levels-1))");
}

template <typename T>
Tensor<T> conv_relu(const ModelWeights<T>& w, const std::string& layer, const Tensor<T>& x) {
  return relu(conv2d(x, w.get(weight_name(layer)), w.get(bias_name(layer))));
}

// Runs the encoder, returning the output of every level (the last one is the
// bottleneck). With a tape, records what backward needs.
template <typename T>
std::vector<Tensor<T>> encoder_forward(const ModelWeights<T>& w, const Tensor<T>& input, EncoderTape<T>* tape) {
  const UNetConfig& cfg = w.arch.unet;
  std::vector<Tensor<T>> level_outputs;
  level_outputs.reserve(static_cast<std::size_t>(cfg.levels));
  Tensor<T> h = input;
  int idx = 0;
  for (int l = 0; l < cfg.levels; ++l) {
    if (l > 0) {
      auto pooled = maxpool2(h);
      if (tape) {
        tape->pool_inputs.push_back(h.shape());
        tape->pool_argmax.push_back(std::move(pooled.argmax));
      }
      h = std::move(pooled.output);
    }
    for (int c = 0; c < cfg.convs_per_level; ++c, ++idx) {
      Tensor<T> y = conv_relu(w, "conv_" + std::to_string(idx + 1), h);
      if (tape) {
        tape->conv_inputs.push_back(std::move(h));
        tape->conv_outputs.push_back(y);
      }
      h = std::move(y);
    }
    level_outputs.push_back(h);
  }
  return level_outputs;
}

// Backward through the encoder. skip_grads[l] (possibly empty) is the extra
// gradient reaching level l's output through a decoder skip connection.
template <typename T>
void encoder_backward(const ModelWeights<T>& w, const EncoderTape<T>& tape, Tensor<T> grad_bottom,
                      const std::vector<Tensor<T>>& skip_grads, ModelWeights<T>& grads) {
  const UNetConfig& cfg = w.arch.unet;
  Tensor<T> g = std::move(grad_bottom);
  int idx = cfg.encoder_conv_count() - 1;
  for (int l = cfg.levels - 1; l >= 0; --l) {
    for (int c = cfg.convs_per_level - 1; c >= 0; --c, --idx) {
      const std::string layer = "conv_" + std::to_string(idx + 1);
      const auto i = static_cast<std::size_t>(idx);
      Tensor<T> gz = relu_backward(tape.conv_outputs[i], g);
      auto cg = conv2d_backward(tape.conv_inputs[i], w.get(weight_name(layer)), gz, idx > 0);
      add_into(grads.get(weight_name(layer)), cg.weight);
      add_into(grads.get(bias_name(layer)), cg.bias);
      g = std::move(cg.input);
    }
    if (l > 0) {
      const auto p = static_cast<std::size_t>(l - 1);
      g = maxpool2_backward(tape.pool_inputs[p], tape.pool_argmax[p], g);
      if (p < skip_grads.size() && !skip_grads[p].empty()) add_into(g, skip_grads[p]);
    }
  }
}

template <typename T>
void append_param(ModelWeights<T>& w, Rng& rng, const std::string& layer, Shape weight_shape, bool init) {
  Tensor<T> weight(weight_shape);
  if (init) {
    const double fan_in = static_cast<double>(weight_shape.c * weight_shape.h * weight_shape.w);
    const double stddev = std::sqrt(2.0 / fan_in);
    for (auto& v : weight.values()) v = static_cast<T>(rng.normal() * stddev);
  }
  w.tensors.push_back({weight_name(layer), std::move(weight)});
  w.tensors.push_back({bias_name(layer), Tensor<T>({weight_shape.n, 1, 1, 1})});
}

template <typename T>
ModelWeights<T> build_weights(const ArchSpec& arch, std::uint64_t seed, bool init) {
  arch.unet.validate();
  ModelWeights<T> w;
  w.arch = arch;
  Rng rng(seed);
  for (const auto& layer : conv_layers(arch)) {
    append_param(w, rng, layer.name,
                 {static_cast<std::size_t>(layer.out_channels), static_cast<std::size_t>(layer.in_channels),
                  static_cast<std::size_t>(layer.kernel), static_cast<std::size_t>(layer.kernel)},
                 init);
  }
  const auto top = static_cast<std::size_t>(arch.unet.channels(arch.unet.levels - 1));
  const auto first = static_cast<std::size_t>(arch.unet.channels(0));
  if (arch.kind == ModelKind::kRestoration) {
    append_param(w, rng, "conv_out", {1, first, 1, 1}, init);
  } else {
    require(arch.head_units > 0, ErrorCode::kInvalidArgument, "classifier head needs at least one unit");
    const auto hidden = static_cast<std::size_t>(arch.head_units);
    append_param(w, rng, "fc_1", {hidden, top, 1, 1}, init);
    append_param(w, rng, "fc_2", {1, hidden, 1, 1}, init);
  }
  return w;
}

}  // namespace

void UNetConfig::validate() const {
  require(levels >= 1 && levels <= 8, ErrorCode::kInvalidArgument, "levels must lie in [1, 8]");
  require(base_channels >= 1, ErrorCode::kInvalidArgument, "base_channels must be >= 1");
  require(convs_per_level >= 1, ErrorCode::kInvalidArgument, "convs_per_level must be >= 1");
  require(kernel >= 1 && kernel % 2 == 1, ErrorCode::kInvalidArgument, "kernel must be odd");
}

std::uint64_t ArchSpec::encoder_fingerprint() const {
  std::uint64_t h = kFnvOffset;
  fnv_mix(h, static_cast<std::uint32_t>(unet.levels));
  fnv_mix(h, static_cast<std::uint32_t>(unet.base_channels));
  fnv_mix(h, static_cast<std::uint32_t>(unet.convs_per_level));
  fnv_mix(h, static_cast<std::uint32_t>(unet.kernel));
  return h;
}

std::uint64_t ArchSpec::fingerprint() const {
  std::uint64_t h = encoder_fingerprint();
  fnv_mix(h, static_cast<std::uint32_t>(kind));
  if (kind == ModelKind::kClassifier) fnv_mix(h, static_cast<std::uint32_t>(head_units));
  return h;
}

std::vector<ConvLayerSpec> conv_layers(const ArchSpec& arch) {
  const UNetConfig& cfg = arch.unet;
  std::vector<ConvLayerSpec> layers;
  int idx = 1;
  int in = 1;
  for (int l = 0; l < cfg.levels; ++l) {
    for (int c = 0; c < cfg.convs_per_level; ++c) {
      layers.push_back({"conv_" + std::to_string(idx++), in, cfg.channels(l), cfg.kernel, true});
      in = cfg.channels(l);
    }
  }
  if (arch.kind == ModelKind::kRestoration) {
    for (int l = cfg.levels - 2; l >= 0; --l) {
      in = cfg.channels(l) + cfg.channels(l + 1);
      for (int c = 0; c < cfg.convs_per_level; ++c) {
        layers.push_back({"conv_" + std::to_string(idx++), in, cfg.channels(l), cfg.kernel, false});
        in = cfg.channels(l);
      }
    }
  }
  return layers;
}

template <typename T>
const Tensor<T>* ModelWeights<T>::find(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t.value;
  }
  return nullptr;
}

template <typename T>
const Tensor<T>& ModelWeights<T>::get(std::string_view name) const {
  const Tensor<T>* t = find(name);
  require(t != nullptr, ErrorCode::kInvalidArgument, "model has no tensor '" + std::string(name) + "'");
  return *t;
}

template <typename T>
Tensor<T>& ModelWeights<T>::get(std::string_view name) {
  return const_cast<Tensor<T>&>(std::as_const(*this).get(name));
}

template <typename T>
ModelWeights<T> ModelWeights<T>::zeros_like() const {
  ModelWeights out;
  out.arch = arch;
  out.tensors.reserve(tensors.size());
  for (const auto& t : tensors) out.tensors.push_back({t.name, Tensor<T>(t.value.shape())});
  return out;
}

template <typename T>
std::size_t ModelWeights<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.value.size();
  return n;
}

template <typename T>
ModelWeights<T> init_unet(const UNetConfig& config, std::uint64_t seed) {
  return build_weights<T>({ModelKind::kRestoration, config, 0}, seed, true);
}

template <typename T>
ModelWeights<T> init_classifier(const UNetConfig& config, int head_units, std::uint64_t seed) {
  return build_weights<T>({ModelKind::kClassifier, config, head_units}, seed, true);
}

template <typename T>
ModelWeights<T> zero_model(const ArchSpec& arch) {
  return build_weights<T>(arch, 0, false);
}

template <typename T>
void transplant_encoder(const ModelWeights<T>& source, ModelWeights<T>& target) {
  require(source.arch.encoder_fingerprint() == target.arch.encoder_fingerprint(),
          ErrorCode::kFingerprintMismatch, "encoder layouts differ between source and target models");
  for (const auto& layer : conv_layers(target.arch)) {
    if (!layer.encoder) continue;
    for (const auto& name : {weight_name(layer.name), bias_name(layer.name)}) {
      const Tensor<T>& src = source.get(name);
      Tensor<T>& dst = target.get(name);
      check_shape(src.shape(), dst.shape(), name);
      dst = src;
    }
  }
}

template <typename T>
Tensor<T> unet_forward(const ModelWeights<T>& w, const Tensor<T>& input, UNetTape<T>* tape) {
  require(w.arch.kind == ModelKind::kRestoration, ErrorCode::kFingerprintMismatch,
          "unet_forward needs restoration weights");
  check_input(w.arch, input);
  const UNetConfig& cfg = w.arch.unet;
  auto levels = encoder_forward(w, input, tape ? &tape->encoder : nullptr);

  Tensor<T> h = std::move(levels.back());
  int idx = cfg.encoder_conv_count();
  for (int l = cfg.levels - 2; l >= 0; --l) {
    h = concat_channels(levels[static_cast<std::size_t>(l)], upsample_nearest2(h));
    for (int c = 0; c < cfg.convs_per_level; ++c, ++idx) {
      Tensor<T> y = conv_relu(w, "conv_" + std::to_string(idx + 1), h);
      if (tape) {
        tape->decoder_inputs.push_back(std::move(h));
        tape->decoder_outputs.push_back(y);
      }
      h = std::move(y);
    }
  }
  Tensor<T> out = sigmoid(conv2d(h, w.get("conv_out.weight"), w.get("conv_out.bias")));
  check_finite(out, "unet output");
  if (tape) {
    tape->head_input = std::move(h);
    tape->output = out;
  }
  return out;
}

template <typename T>
ModelWeights<T> unet_backward(const ModelWeights<T>& w, const UNetTape<T>& tape, const Tensor<T>& grad_out) {
  const UNetConfig& cfg = w.arch.unet;
  ModelWeights<T> grads = w.zeros_like();

  Tensor<T> gz = sigmoid_backward(tape.output, grad_out);
  auto head = conv2d_backward(tape.head_input, w.get("conv_out.weight"), gz);
  grads.get("conv_out.weight") = std::move(head.weight);
  grads.get("conv_out.bias") = std::move(head.bias);
  Tensor<T> g = std::move(head.input);

  std::vector<Tensor<T>> skip_grads(static_cast<std::size_t>(cfg.levels));
  int idx = static_cast<int>(tape.decoder_outputs.size()) - 1;
  for (int l = 0; l <= cfg.levels - 2; ++l) {
    for (int c = cfg.convs_per_level - 1; c >= 0; --c, --idx) {
      const std::string layer = "conv_" + std::to_string(cfg.encoder_conv_count() + idx + 1);
      const auto i = static_cast<std::size_t>(idx);
      Tensor<T> gzz = relu_backward(tape.decoder_outputs[i], g);
      auto cg = conv2d_backward(tape.decoder_inputs[i], w.get(weight_name(layer)), gzz);
      add_into(grads.get(weight_name(layer)), cg.weight);
      add_into(grads.get(bias_name(layer)), cg.bias);
      g = std::move(cg.input);
    }
    auto [g_skip, g_up] = concat_channels_backward(g, static_cast<std::size_t>(cfg.channels(l)));
    skip_grads[static_cast<std::size_t>(l)] = std::move(g_skip);
    g = upsample_nearest2_backward(g_up);
  }
  encoder_backward(w, tape.encoder, std::move(g), skip_grads, grads);
  return grads;
}

template <typename T>
Tensor<T> classifier_forward(const ModelWeights<T>& w, const Tensor<T>& input, ClassifierTape<T>* tape) {
  require(w.arch.kind == ModelKind::kClassifier, ErrorCode::kFingerprintMismatch,
          "classifier_forward needs classifier weights");
  check_input(w.arch, input);
  auto levels = encoder_forward(w, input, tape ? &tape->encoder : nullptr);
  const Tensor<T>& bottom = levels.back();
  Tensor<T> pooled = global_avg_pool(bottom);
  Tensor<T> hidden = relu(dense(pooled, w.get("fc_1.weight"), w.get("fc_1.bias")));
  Tensor<T> out = sigmoid(dense(hidden, w.get("fc_2.weight"), w.get("fc_2.bias")));
  check_finite(out, "classifier output");
  if (tape) {
    tape->pooled_from = bottom.shape();
    tape->pooled = std::move(pooled);
    tape->hidden = std::move(hidden);
    tape->output = out;
  }
  return out;
}

template <typename T>
ModelWeights<T> classifier_backward(const ModelWeights<T>& w, const ClassifierTape<T>& tape,
                                    const Tensor<T>& grad_out) {
  ModelWeights<T> grads = w.zeros_like();
  Tensor<T> gz = sigmoid_backward(tape.output, grad_out);
  auto fc2 = dense_backward(tape.hidden, w.get("fc_2.weight"), gz);
  grads.get("fc_2.weight") = std::move(fc2.weight);
  grads.get("fc_2.bias") = std::move(fc2.bias);
  Tensor<T> gh = relu_backward(tape.hidden, fc2.input);
  auto fc1 = dense_backward(tape.pooled, w.get("fc_1.weight"), gh);
  grads.get("fc_1.weight") = std::move(fc1.weight);
  grads.get("fc_1.bias") = std::move(fc1.bias);
  Tensor<T> g = global_avg_pool_backward(tape.pooled_from, fc1.input);
  encoder_backward(w, tape.encoder, std::move(g), {}, grads);
  return grads;
}

template <typename T>
Tensor<T> layer_activation(const ModelWeights<T>& w, const Tensor<T>& input, std::string_view layer) {
  const auto layers = conv_layers(w.arch);
  const auto it = std::find_if(layers.begin(), layers.end(), [&](const auto& l) { return l.name == layer; });
  require(it != layers.end(), ErrorCode::kUnknownLayer, "no conv layer named '" + std::string(layer) + "'");
  const auto pos = static_cast<std::size_t>(it - layers.begin());
  const auto encoder_count = static_cast<std::size_t>(w.arch.unet.encoder_conv_count());

  if (pos < encoder_count) {
    check_input(w.arch, input);
    EncoderTape<T> tape;
    encoder_forward(w, input, &tape);
    return tape.conv_outputs[pos];
  }
  UNetTape<T> tape;
  unet_forward(w, input, &tape);
  return tape.decoder_outputs[pos - encoder_count];
}

#define PLR_INSTANTIATE_NETWORK(T)                                                                        \
  template class ModelWeights<T>;                                                                        \
  template ModelWeights<T> init_unet(const UNetConfig&, std::uint64_t);                                  \
  template ModelWeights<T> init_classifier(const UNetConfig&, int, std::uint64_t);                       \
  template ModelWeights<T> zero_model(const ArchSpec&);                                                  \
  template void transplant_encoder(const ModelWeights<T>&, ModelWeights<T>&);                            \
  template Tensor<T> unet_forward(const ModelWeights<T>&, const Tensor<T>&, UNetTape<T>*);               \
  template ModelWeights<T> unet_backward(const ModelWeights<T>&, const UNetTape<T>&, const Tensor<T>&);  \
  template Tensor<T> classifier_forward(const ModelWeights<T>&, const Tensor<T>&, ClassifierTape<T>*);   \
  template ModelWeights<T> classifier_backward(const ModelWeights<T>&, const ClassifierTape<T>&,         \
                                               const Tensor<T>&);                                        \
  template Tensor<T> layer_activation(const ModelWeights<T>&, const Tensor<T>&, std::string_view);

PLR_INSTANTIATE_NETWORK(float)
PLR_INSTANTIATE_NETWORK(double)

#undef PLR_INSTANTIATE_NETWORK

}  // namespace plr::nn
