#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "plr/imgcore.hpp"
#include "plr/manifest.hpp"
#include "plr/metrics.hpp"
#include "plr/nn/network.hpp"
#include "plr/nn/optim.hpp"

namespace plr::pipeline {

using Weights = nn::ModelWeights<float>;

enum class Phase { kPretrain, kFinetune };

struct ModelConfig {
  nn::UNetConfig unet = nn::UNetConfig::faithful();
  int head_units = 512;
  /// Images whose size differs are bilinearly resized to input_size x input_size.
  int input_size = 512;

  /// levels 3, base 8, 64x64 inputs.
  static ModelConfig desk();
  nn::ArchSpec restoration_arch() const { return {nn::ModelKind::kRestoration, unet, 0}; }
  nn::ArchSpec classifier_arch() const { return {nn::ModelKind::kClassifier, unet, head_units}; }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct TrainConfig {
  Phase phase = Phase::kPretrain;
  int batch_size = 4;
  nn::OptimizerConfig optimizer;  // kind and initial lr
  nn::PlateauConfig scheduler;    // mode follows the phase: val MSE (min) or val accuracy (max)
  int epochs = 100;
  double label_fraction = 1.0;  // finetune only
  bool augment = false;
  double val_fraction = 0.1;  // pretrain from a single manifest: share held out for validation
  long max_steps = 0;         // 0 means no cap
  std::optional<double> stop_at;  // finetune: stop once validation accuracy reaches this
  std::uint64_t seed = 0;
  std::filesystem::path log_path;  // per-epoch JSON Lines; empty disables

  /// Batch 4, SGD lr 1e-3, no augmentation.
  static TrainConfig pretrain_defaults();
  /// Batch 16, Adadelta lr 0.1, zoom/shear augmentation.
  static TrainConfig finetune_defaults();
  void validate() const;
};

struct RestorationSet {
  std::vector<img::GrayImage> inputs;
  std::vector<img::GrayImage> targets;
  std::size_t size() const { return inputs.size(); }
};

struct LabeledSet {
  std::vector<img::GrayImage> images;
  std::vector<int> labels;
  std::size_t size() const { return images.size(); }
};

RestorationSet load_restoration_set(const corrupt::DatasetManifest& manifest, int input_size);
LabeledSet load_labeled_set(const corrupt::DatasetManifest& manifest, int input_size);

/// Indices (ascending) of a stratified subset: round(fraction * n_c) entries
/// of each class c, taken as a prefix of a per-class seeded permutation, so
/// smaller fractions give subsets of larger ones. Throws InvalidArgument if
/// either class ends up empty.
std::vector<std::size_t> select_label_fraction(std::span<const int> labels, double fraction, std::uint64_t seed);

/// Deterministic holdout: returns (train, val). fraction 0 validates on the
/// training set itself.
std::pair<RestorationSet, RestorationSet> split_restoration(const RestorationSet& all, double fraction,
                                                            std::uint64_t seed);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_metric = 0.0;
  double lr = 0.0;  // lr used during this epoch
  long steps = 0;   // cumulative optimizer steps
};

struct TrainResult {
  Weights best;
  int best_epoch = 0;
  double best_metric = 0.0;
  std::vector<EpochRecord> history;
  std::vector<double> step_losses;  // batch loss before each update
  long steps = 0;
  std::optional<int> stop_epoch;  // first epoch meeting stop_at
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// U-Net on (corrupted, original) pairs with MSE; keeps the weights with the
/// lowest validation MSE.
TrainResult pretrain(const RestorationSet& train, const RestorationSet& val, const ModelConfig& model,
                     const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Classifier with BCE; the encoder is copied from `encoder` (restoration or
/// classifier weights) when given, otherwise randomly initialized. Keeps the
/// weights with the highest validation accuracy.
TrainResult finetune(const Weights* encoder, const LabeledSet& train, const LabeledSet& val,
                     const ModelConfig& model, const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Mean squared error over every pixel of the set, in [0,1] intensity units.
double restoration_mse(const Weights& unet, const RestorationSet& set, int batch_size = 4);

/// Class-1 probabilities.
std::vector<double> predict(const Weights& classifier, std::span<const img::GrayImage> images, int batch_size = 16);

Metrics evaluate(const Weights& classifier, const LabeledSet& set);

/// (1, 1, h, w) tensor scaled to [0, 1].
nn::Tensor<float> to_tensor(const img::GrayImage& image);

std::string epoch_json(const EpochRecord& r);

}  // namespace plr::pipeline
