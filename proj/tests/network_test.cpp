#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "plr/error.hpp"
#include "plr/nn/loss.hpp"
#include "plr/nn/network.hpp"
#include "plr/nn/ops.hpp"
#include "plr/nn/optim.hpp"
#include "plr/nn/weights.hpp"
#include "plr/rng.hpp"
#include "test_util.hpp"

using namespace plr::nn;

namespace {

const UNetConfig kDesk = UNetConfig::desk();

Tensor<float> random_input(std::size_t n, std::size_t size, std::uint64_t seed) {
  plr::Rng rng(seed);
  Tensor<float> t({n, 1, size, size});
  for (auto& v : t.values()) v = static_cast<float>(rng.uniform01());
  return t;
}

plr::ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const plr::Error& e) {
    return e.code();
  }
  return plr::ErrorCode::kIo;
}

}  // namespace

TEST(UNetConfig, FaithfulHasTenEncoderConvsUpTo1024Channels) {
  const auto f = UNetConfig::faithful();
  EXPECT_EQ(f.encoder_conv_count(), 10);
  EXPECT_EQ(f.channels(0), 64);
  EXPECT_EQ(f.channels(4), 1024);
  EXPECT_EQ(f.size_divisor(), 16);
  EXPECT_EQ(kDesk.channels(2), 32);
}

TEST(ConvLayers, EncoderThenDecoderWithSkipWidths) {
  const auto layers = conv_layers({ModelKind::kRestoration, kDesk, 0});
  ASSERT_EQ(layers.size(), 10u);
  EXPECT_EQ(layers[0].name, "conv_1");
  EXPECT_EQ(layers[0].in_channels, 1);
  EXPECT_EQ(layers[0].out_channels, 8);
  EXPECT_EQ(layers[5].in_channels, 32);
  EXPECT_TRUE(layers[5].encoder);
  EXPECT_FALSE(layers[6].encoder);
  EXPECT_EQ(layers[6].in_channels, 32 + 16);  // upsampled level 2 plus the level 1 skip
  EXPECT_EQ(layers[8].in_channels, 16 + 8);
  EXPECT_EQ(layers[9].out_channels, 8);
  EXPECT_EQ(conv_layers({ModelKind::kClassifier, kDesk, 16}).size(), 6u);
}

TEST(Fingerprint, EncoderPartIgnoresHeadAndKind) {
  const ArchSpec r{ModelKind::kRestoration, kDesk, 0};
  const ArchSpec c{ModelKind::kClassifier, kDesk, 64};
  const ArchSpec c2{ModelKind::kClassifier, kDesk, 32};
  EXPECT_EQ(r.encoder_fingerprint(), c.encoder_fingerprint());
  EXPECT_NE(r.fingerprint(), c.fingerprint());
  EXPECT_NE(c.fingerprint(), c2.fingerprint());
  EXPECT_NE(r.encoder_fingerprint(), (ArchSpec{ModelKind::kRestoration, {4, 8, 2, 3}, 0}.encoder_fingerprint()));
}

TEST(Init, KaimingScaleAndZeroBiases) {
  const auto w = init_unet<double>({3, 16, 2, 3}, 5);
  const auto& k = w.get("conv_2.weight");  // fan_in = 16 * 9
  double ss = 0;
  for (double v : k.values()) ss += v * v;
  const double sd = std::sqrt(ss / static_cast<double>(k.size()));
  EXPECT_NEAR(sd, std::sqrt(2.0 / 144.0), 0.1 * std::sqrt(2.0 / 144.0));
  for (double v : w.get("conv_2.bias").values()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(init_unet<double>({3, 16, 2, 3}, 5), w);
  EXPECT_NE(init_unet<double>({3, 16, 2, 3}, 6), w);
}

TEST(UNet, OutputShapeRangeAndDeterminism) {
  const auto w = init_unet<float>(kDesk, 1);
  const auto x = random_input(2, 16, 2);
  const auto y = unet_forward(w, x);
  EXPECT_EQ(y.shape(), x.shape());
  for (float v : y.values()) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
  EXPECT_EQ(unet_forward(w, x), y);
}

TEST(UNet, RejectsInputsTheEncoderCannotHalve) {
  const auto w = init_unet<float>(kDesk, 1);
  EXPECT_EQ(code_of([&] { unet_forward(w, Tensor<float>({1, 1, 10, 10})); }), plr::ErrorCode::kShapeMismatch);
  EXPECT_EQ(code_of([&] { unet_forward(w, Tensor<float>({1, 2, 16, 16})); }), plr::ErrorCode::kShapeMismatch);
  const auto c = init_classifier<float>(kDesk, 8, 1);
  EXPECT_THROW(unet_forward(c, Tensor<float>({1, 1, 16, 16})), plr::Error);
}

TEST(UNet, OneSgdStepLowersThatPairsLoss) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto w = init_unet<float>(kDesk, seed);
    const auto x = random_input(1, 16, 10 + seed);
    const auto target = random_input(1, 16, 20 + seed);
    UNetTape<float> tape;
    const auto before = mse_loss(unet_forward(w, x, &tape), target);
    Optimizer<float> opt({OptimizerKind::kSgd, 1e-3}, w);
    opt.step(w, unet_backward(w, tape, before.grad));
    const auto after = mse_loss(unet_forward(w, x), target);
    EXPECT_LT(after.loss, before.loss) << seed;
  }
}

TEST(Classifier, ProbabilitiesPerSample) {
  const auto w = init_classifier<float>(kDesk, 16, 3);
  const auto p = classifier_forward(w, random_input(5, 16, 4));
  EXPECT_EQ(p.shape(), (Shape{5, 1, 1, 1}));
  for (float v : p.values()) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
}

TEST(Transplant, EncoderActivationsMatchTheRestorationNet) {
  const auto unet = init_unet<float>(kDesk, 7);
  auto cls = init_classifier<float>(kDesk, 16, 8);
  transplant_encoder(unet, cls);
  const auto x = random_input(2, 16, 9);
  for (int k = 1; k <= kDesk.encoder_conv_count(); ++k) {
    const std::string name = "conv_" + std::to_string(k);
    EXPECT_EQ(layer_activation(cls, x, name), layer_activation(unet, x, name)) << name;
  }
  EXPECT_EQ(cls.get("fc_1.weight"), init_classifier<float>(kDesk, 16, 8).get("fc_1.weight"));

  auto other = init_classifier<float>({2, 8, 2, 3}, 16, 8);
  EXPECT_EQ(code_of([&] { transplant_encoder(unet, other); }), plr::ErrorCode::kFingerprintMismatch);
}

TEST(LayerActivation, ShapesAndUnknownNames) {
  const auto unet = init_unet<float>(kDesk, 1);
  const auto x = random_input(1, 16, 2);
  EXPECT_EQ(layer_activation(unet, x, "conv_1").shape(), (Shape{1, 8, 16, 16}));
  EXPECT_EQ(layer_activation(unet, x, "conv_5").shape(), (Shape{1, 32, 4, 4}));
  EXPECT_EQ(layer_activation(unet, x, "conv_10").shape(), (Shape{1, 8, 16, 16}));
  EXPECT_EQ(code_of([&] { layer_activation(unet, x, "conv_11"); }), plr::ErrorCode::kUnknownLayer);
  EXPECT_EQ(code_of([&] { layer_activation(unet, x, "fc_1"); }), plr::ErrorCode::kUnknownLayer);
  const auto cls = init_classifier<float>(kDesk, 16, 1);
  EXPECT_EQ(code_of([&] { layer_activation(cls, x, "conv_7"); }), plr::ErrorCode::kUnknownLayer);
}

TEST(Weights, SaveLoadIsBitwise) {
  plr::test::TempDir dir;
  const auto w = init_unet<float>(kDesk, 11);
  save_weights(w, (dir / "w.plrw").string());
  EXPECT_EQ(load_weights<float>((dir / "w.plrw").string()), w);
  EXPECT_EQ(load_weights<float>((dir / "w.plrw").string(), w.arch), w);
  EXPECT_EQ(peek_arch((dir / "w.plrw").string()), w.arch);
  EXPECT_EQ(encode_weights(w), encode_weights(decode_weights<float>(encode_weights(w))));

  const auto d = init_classifier<double>(kDesk, 4, 2);
  const auto as_float = decode_weights<float>(encode_weights(d));
  EXPECT_EQ(as_float.arch, d.arch);
  EXPECT_EQ(as_float.get("fc_2.weight")[0], static_cast<float>(d.get("fc_2.weight")[0]));
}

TEST(Weights, FingerprintMismatchOnDifferentConfig) {
  plr::test::TempDir dir;
  const auto w = init_unet<float>(kDesk, 11);
  save_weights(w, (dir / "w.plrw").string());
  const ArchSpec other{ModelKind::kRestoration, {3, 4, 2, 3}, 0};
  EXPECT_EQ(code_of([&] { load_weights<float>((dir / "w.plrw").string(), other); }),
            plr::ErrorCode::kFingerprintMismatch);
  const ArchSpec cls{ModelKind::kClassifier, kDesk, 16};
  EXPECT_EQ(code_of([&] { load_weights<float>((dir / "w.plrw").string(), cls); }),
            plr::ErrorCode::kFingerprintMismatch);
}

TEST(Weights, RejectsDamagedFiles) {
  const auto bytes = encode_weights(init_classifier<float>(kDesk, 4, 1));
  auto code = [](std::vector<std::uint8_t> b) { return code_of([&] { decode_weights<float>(b); }); };
  EXPECT_EQ(code({bytes.begin(), bytes.end() - 3}), plr::ErrorCode::kCorruptFile);
  EXPECT_EQ(code({bytes.begin(), bytes.begin() + 10}), plr::ErrorCode::kCorruptFile);
  auto magic = bytes;
  magic[1] = 'X';
  EXPECT_EQ(code(magic), plr::ErrorCode::kCorruptFile);
  auto version = bytes;
  version[4] = 2;
  EXPECT_EQ(code(version), plr::ErrorCode::kVersionMismatch);
  auto trailing = bytes;
  trailing.push_back(1);
  EXPECT_EQ(code(trailing), plr::ErrorCode::kCorruptFile);
  // Stored fingerprint no longer matching the header fields.
  auto fp = bytes;
  fp[4 + 4 + 4 + 4 * 5] ^= 0x01;
  EXPECT_EQ(code(fp), plr::ErrorCode::kCorruptFile);

  plr::test::TempDir dir;
  EXPECT_EQ(code_of([&] { load_weights<float>((dir / "absent.plrw").string()); }), plr::ErrorCode::kIo);
}

TEST(Weights, NonFiniteValuesAreRejected) {
  auto w = init_classifier<float>(kDesk, 4, 1);
  w.get("fc_1.bias")[0] = std::nanf("");
  const auto bytes = encode_weights(w);
  EXPECT_EQ(code_of([&] { decode_weights<float>(bytes); }), plr::ErrorCode::kNonFinite);
}
