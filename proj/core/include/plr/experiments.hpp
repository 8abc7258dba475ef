#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "plr/corruption_spec.hpp"
#include "plr/imgcore.hpp"
#include "plr/lesionbank.hpp"
#include "plr/metrics.hpp"
#include "plr/training.hpp"

namespace plr::pipeline {

struct SweepInputs {
  std::vector<img::GrayImage> normals;
  std::vector<img::BinaryMask> masks;  // empty: derived from each normal
  const lesion::PatchBank* bank = nullptr;
  LabeledSet train;
  LabeledSet val;
};

struct SweepConfig {
  std::vector<int> patch_counts;          // P
  std::vector<std::size_t> image_counts;  // M
  corrupt::CorruptionSpec spec;
  ModelConfig model;
  TrainConfig pretrain = TrainConfig::pretrain_defaults();
  TrainConfig finetune = TrainConfig::finetune_defaults();
};

struct SweepCell {
  int patches = 0;
  std::size_t images = 0;
  Metrics metrics;
  double pretrain_val_mse = 0.0;
  int finetune_best_epoch = 0;
};

/// Row-major over (P, M): for each cell, corrupt M images with P patches
/// each, pretrain, fine-tune from the pretrained encoder and evaluate on the
/// validation set.
std::vector<SweepCell> sweep(const SweepInputs& inputs, const SweepConfig& config);

std::string sweep_json(std::span<const SweepCell> cells);

/// Forward pass to conv layer `layer`; every channel is min-max scaled to
/// [0, 255] (a constant channel maps to 0) and the channels are tiled
/// row-major into a ceil(sqrt(C)) x ceil(sqrt(C)) grid. Unused tiles are black.
img::GrayImage export_activations(const Weights& weights, const img::GrayImage& image, std::string_view layer);

/// "Highest" is the per-metric maximum over runs, "average" the per-metric mean.
struct RepeatSummary {
  std::vector<Metrics> runs;
  Metrics highest;
  Metrics average;
};

RepeatSummary summarize_repeats(std::span<const Metrics> runs);
std::string repeats_json(const RepeatSummary& summary);

}  // namespace plr::pipeline
