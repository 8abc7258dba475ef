#include <gtest/gtest.h>

#include <json.hpp>

#include "plr/error.hpp"
#include "plr/experiments.hpp"
#include "plr/rng.hpp"
#include "plr/synth.hpp"

using namespace plr::pipeline;
using plr::img::GrayImage;

namespace {

ModelConfig tiny_model() {
  ModelConfig m = ModelConfig::desk();
  m.input_size = 16;
  m.head_units = 8;
  return m;
}

Metrics with(double acc, std::optional<double> auc) {
  Metrics m;
  m.accuracy = acc;
  m.precision = acc / 2;
  m.recall = 1 - acc;
  m.f1 = acc / 3;
  m.auc = auc;
  return m;
}

}  // namespace

TEST(ExportActivations, TilesChannelsIntoSquareGrid) {
  const auto model = tiny_model();
  auto w = plr::nn::init_unet<float>(model.unet, 3);
  const auto scan = plr::synth::normal_scan(16, 1);
  const auto grid = export_activations(w, scan, "conv_1");  // 8 channels -> 3x3 tiles of 16
  EXPECT_EQ(grid.width(), 48);
  EXPECT_EQ(grid.height(), 48);
  for (int y = 32; y < 48; ++y)
    for (int x = 32; x < 48; ++x) ASSERT_EQ(grid.at(x, y), 0) << "unused ninth tile";

  const auto deep = export_activations(w, scan, "conv_5");  // 32 channels at 4x4 -> 6x6 tiles
  EXPECT_EQ(deep.width(), 24);
}

TEST(ExportActivations, ConstantInputWithZeroBiasIsBlack) {
  const auto model = tiny_model();
  const auto w = plr::nn::init_unet<float>(model.unet, 4);  // biases start at zero
  const auto grid = export_activations(w, GrayImage(16, 16, 0), "conv_1");
  for (auto p : grid.pixels()) ASSERT_EQ(p, 0);
}

TEST(ExportActivations, ChannelIsMinMaxScaled) {
  const auto model = tiny_model();
  const auto w = plr::nn::init_unet<float>(model.unet, 5);
  const auto scan = plr::synth::normal_scan(16, 2);
  const auto grid = export_activations(w, scan, "conv_2");
  const auto act = plr::nn::layer_activation(w, to_tensor(scan), "conv_2");
  // The first tile reaches both ends of the scale unless its channel is flat.
  int lo = 255, hi = 0;
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      lo = std::min<int>(lo, grid.at(x, y));
      hi = std::max<int>(hi, grid.at(x, y));
    }
  const float* c0 = act.plane(0, 0);
  const auto [mn, mx] = std::minmax_element(c0, c0 + act.shape().plane());
  if (*mx > *mn) {
    EXPECT_EQ(lo, 0);
    EXPECT_EQ(hi, 255);
  } else {
    EXPECT_EQ(hi, 0);
  }
  EXPECT_THROW(export_activations(w, scan, "conv_99"), plr::Error);
}

TEST(Repeats, HighestIsPerMetricMaximum) {
  const std::vector<Metrics> runs{with(0.6, 0.7), with(0.8, 0.65), with(0.7, 0.9)};
  const auto s = summarize_repeats(runs);
  EXPECT_DOUBLE_EQ(s.highest.accuracy, 0.8);
  EXPECT_DOUBLE_EQ(s.highest.recall, 0.4);  // from the 0.6 run, not the best-accuracy run
  EXPECT_DOUBLE_EQ(*s.highest.auc, 0.9);
  EXPECT_NEAR(s.average.accuracy, 0.7, 1e-12);
  EXPECT_NEAR(*s.average.auc, 0.75, 1e-12);

  const auto j = nlohmann::json::parse(repeats_json(s));
  EXPECT_EQ(j["runs"].size(), 3u);
  EXPECT_DOUBLE_EQ(j["highest"]["accuracy"].get<double>(), 0.8);

  const std::vector<Metrics> partial{with(0.5, std::nullopt), with(0.6, 0.7)};
  EXPECT_FALSE(summarize_repeats(partial).average.auc);
  EXPECT_TRUE(nlohmann::json::parse(repeats_json(summarize_repeats(partial)))["average"]["auc"].is_null());
  EXPECT_THROW(summarize_repeats({}), plr::Error);
}

TEST(Sweep, OneCellPerPatchAndImageCount) {
  SweepInputs in;
  for (std::uint64_t i = 0; i < 3; ++i) in.normals.push_back(plr::synth::normal_scan(16, i));
  auto tr = plr::synth::bright_square_set(8, 16, 1);
  in.train = {tr.images, tr.labels};
  in.val = {tr.images, tr.labels};
  SweepConfig cfg;
  cfg.patch_counts = {0, 2};
  cfg.image_counts = {4, 5};
  cfg.spec.strategy = plr::corrupt::Strategy::kShuffle;  // no bank needed
  cfg.spec.grid = 4;
  cfg.model = tiny_model();
  cfg.pretrain.epochs = 1;
  cfg.finetune.epochs = 1;
  cfg.finetune.batch_size = 4;
  const auto cells = sweep(in, cfg);
  ASSERT_EQ(cells.size(), 4u);
  EXPECT_EQ(cells[1].patches, 0);
  EXPECT_EQ(cells[1].images, 5u);
  EXPECT_EQ(cells[2].patches, 2);
  for (const auto& c : cells) {
    EXPECT_EQ(c.metrics.total(), 8u);
    EXPECT_EQ(c.finetune_best_epoch, 1);
    EXPECT_GE(c.pretrain_val_mse, 0.0);
  }
  const auto j = nlohmann::json::parse(sweep_json(cells));
  ASSERT_EQ(j.size(), 4u);
  for (const char* key : {"P", "M", "metrics", "pretrain_val_mse", "finetune_best_epoch"})
    EXPECT_TRUE(j[0].contains(key)) << key;

  cfg.patch_counts.clear();
  EXPECT_THROW(sweep(in, cfg), plr::Error);
}
