#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "plr/corruption_spec.hpp"
#include "plr/lesionbank.hpp"
#include "plr/perlin.hpp"
#include "plr/training.hpp"

namespace plr {

/// Everything the command line tool can be configured with. Precedence, low
/// to high: built-in defaults, PLR_SEED, the --config INI file, flags.
///
/// INI layout (unknown sections or keys are errors):
///   [train]      seed
///   [noise]      size count octaves base_frequency persistence lacunarity
///   [bank]       count threshold min_size max_size
///   [corrupt]    strategy patches count kernel_size sigma grid paste_mode mask_threshold
///   [model]      levels base_channels convs_per_level kernel head_units input_size
///   [optimizer]  momentum rho eps              (shared by both phases)
///   [scheduler]  patience factor min_lr        (shared by both phases)
///   [pretrain]   batch_size lr optimizer epochs val_fraction max_steps augment
///   [finetune]   batch_size lr optimizer epochs label_fraction max_steps augment stop_at
///   [gradcheck]  trials
struct CliConfig {
  std::uint64_t seed = 0;

  perlin::OctaveParams noise;
  int noise_size = 512;
  int noise_count = 10;

  std::size_t bank_count = 5000;
  double bank_threshold = 180.0;
  lesion::SizeRange bank_size;

  corrupt::CorruptionSpec corruption;
  std::size_t corrupt_count = 1856;  // M

  pipeline::ModelConfig model;
  pipeline::TrainConfig pretrain = pipeline::TrainConfig::pretrain_defaults();
  pipeline::TrainConfig finetune = pipeline::TrainConfig::finetune_defaults();

  int gradcheck_trials = 20;

  /// Copies the global seed into every stage that draws random numbers.
  void propagate_seed();
  void validate() const;
};

CliConfig default_config();

/// Reads PLR_SEED when set; a malformed value throws InvalidArgument.
void apply_env(CliConfig& config);

void apply_ini(CliConfig& config, const std::filesystem::path& path);
void apply_ini_text(CliConfig& config, const std::string& text, const std::string& name = "config");

/// Stable, human-readable dump of the effective configuration.
std::string config_json(const CliConfig& config);

}  // namespace plr
