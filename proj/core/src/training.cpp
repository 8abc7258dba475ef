#include "plr/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "plr/error.hpp"
#include "plr/nn/loss.hpp"
#include "plr/rng.hpp"

namespace plr::pipeline {

namespace {

// Independent random streams derived from the run seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kSplitStream = 2;
constexpr std::uint64_t kShuffleStream = 3;
constexpr std::uint64_t kAugmentStream = 4;
constexpr std::uint64_t kFractionStream = 5;

img::GrayImage fit(const img::GrayImage& im, int size) {
  if (im.width() == size && im.height() == size) return im;
  return img::resize_bilinear(im, size, size);
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(mix_seed(seed, kShuffleStream), static_cast<std::uint64_t>(epoch)));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  return order;
}

nn::Tensor<float> stack(std::span<const img::GrayImage* const> images) {
  const auto& first = *images.front();
  const auto h = static_cast<std::size_t>(first.height());
  const auto w = static_cast<std::size_t>(first.width());
  nn::Tensor<float> t({images.size(), 1, h, w});
  for (std::size_t b = 0; b < images.size(); ++b) {
    require(images[b]->width() == first.width() && images[b]->height() == first.height(),
            ErrorCode::kShapeMismatch, "batch images differ in size");
    float* dst = t.plane(b, 0);
    const auto px = images[b]->pixels();
    for (std::size_t i = 0; i < px.size(); ++i) dst[i] = static_cast<float>(px[i]) / 255.0f;
  }
  return t;
}

class EpochLog {
 public:
  explicit EpochLog(const std::filesystem::path& path) {
    if (path.empty()) return;
    out_.open(path, std::ios::binary | std::ios::trunc);
    require(out_.good(), ErrorCode::kIo, "cannot write training log " + path.string());
  }
  void write(const EpochRecord& r) {
    if (out_.is_open()) out_ << epoch_json(r) << '\n' << std::flush;
  }

 private:
  std::ofstream out_;
};

void check_images(std::span<const img::GrayImage> images, const ModelConfig& model, const char* what) {
  for (const auto& im : images) {
    require(im.width() == model.input_size && im.height() == model.input_size, ErrorCode::kShapeMismatch,
            std::string(what) + ": image is " + std::to_string(im.width()) + "x" + std::to_string(im.height()) +
                ", model expects " + std::to_string(model.input_size) + "x" + std::to_string(model.input_size));
  }
}

}  // namespace

ModelConfig ModelConfig::desk() {
  ModelConfig m;
  m.unet = nn::UNetConfig::desk();
  m.input_size = 64;
  return m;
}

void ModelConfig::validate() const {
  unet.validate();
  require(head_units >= 1, ErrorCode::kInvalidArgument, "head_units must be >= 1");
  require(input_size >= 1 && input_size % unet.size_divisor() == 0, ErrorCode::kInvalidArgument,
          "input_size " + std::to_string(input_size) + " must be a positive multiple of " +
              std::to_string(unet.size_divisor()) + " (2^(levels-1))");
}

TrainConfig TrainConfig::pretrain_defaults() {
  TrainConfig c;
  c.phase = Phase::kPretrain;
  c.batch_size = 4;
  c.optimizer.kind = nn::OptimizerKind::kSgd;
  c.optimizer.lr = 1e-3;
  c.scheduler.mode = nn::MetricMode::kMin;
  c.augment = false;
  return c;
}

TrainConfig TrainConfig::finetune_defaults() {
  TrainConfig c;
  c.phase = Phase::kFinetune;
  c.batch_size = 16;
  c.optimizer.kind = nn::OptimizerKind::kAdadelta;
  c.optimizer.lr = 0.1;
  c.scheduler.mode = nn::MetricMode::kMax;
  c.augment = true;
  return c;
}

void TrainConfig::validate() const {
  require(batch_size >= 1, ErrorCode::kInvalidArgument, "batch_size must be >= 1");
  require(epochs >= 1, ErrorCode::kInvalidArgument, "epochs must be >= 1");
  require(label_fraction > 0.0 && label_fraction <= 1.0, ErrorCode::kInvalidArgument,
          "label_fraction must lie in (0, 1]");
  require(val_fraction >= 0.0 && val_fraction < 1.0, ErrorCode::kInvalidArgument, "val_fraction must lie in [0, 1)");
  require(max_steps >= 0, ErrorCode::kInvalidArgument, "max_steps must be >= 0");
  optimizer.validate();
  scheduler.validate();
}

RestorationSet load_restoration_set(const corrupt::DatasetManifest& manifest, int input_size) {
  manifest.validate();
  require(!manifest.entries.empty(), ErrorCode::kEmptyInput, "restoration manifest is empty");
  require(manifest.is_restoration(), ErrorCode::kInvalidArgument, "manifest holds labels, not restoration pairs");
  RestorationSet set;
  for (const auto& e : manifest.entries) {
    set.inputs.push_back(fit(img::load_image(e.input), input_size));
    set.targets.push_back(fit(img::load_image(*e.target), input_size));
  }
  return set;
}

LabeledSet load_labeled_set(const corrupt::DatasetManifest& manifest, int input_size) {
  manifest.validate();
  require(!manifest.entries.empty(), ErrorCode::kEmptyInput, "classification manifest is empty");
  require(manifest.is_classification(), ErrorCode::kInvalidArgument, "manifest holds pairs, not labels");
  LabeledSet set;
  for (const auto& e : manifest.entries) {
    set.images.push_back(fit(img::load_image(e.input), input_size));
    set.labels.push_back(*e.label);
  }
  return set;
}

std::vector<std::size_t> select_label_fraction(std::span<const int> labels, double fraction, std::uint64_t seed) {
  require(fraction > 0.0 && fraction <= 1.0, ErrorCode::kInvalidArgument, "label_fraction must lie in (0, 1]");
  std::vector<std::size_t> chosen;
  for (int cls = 0; cls <= 1; ++cls) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) members.push_back(i);
    }
    Rng rng(mix_seed(mix_seed(seed, kFractionStream), static_cast<std::uint64_t>(cls)));
    for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[rng.index(i)]);
    const auto keep = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
    require(keep > 0, ErrorCode::kInvalidArgument,
            "label_fraction " + std::to_string(fraction) + " leaves no samples of class " + std::to_string(cls));
    chosen.insert(chosen.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(keep));
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

std::pair<RestorationSet, RestorationSet> split_restoration(const RestorationSet& all, double fraction,
                                                            std::uint64_t seed) {
  require(all.size() > 0, ErrorCode::kEmptyInput, "restoration set is empty");
  if (fraction <= 0.0 || all.size() < 2) return {all, all};
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(seed, kSplitStream));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(all.size())));
  n_val = std::clamp<std::size_t>(n_val, 1, all.size() - 1);
  std::vector<bool> is_val(all.size(), false);
  for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;
  RestorationSet train;
  RestorationSet val;
  for (std::size_t i = 0; i < all.size(); ++i) {
    auto& dst = is_val[i] ? val : train;
    dst.inputs.push_back(all.inputs[i]);
    dst.targets.push_back(all.targets[i]);
  }
  return {std::move(train), std::move(val)};
}

nn::Tensor<float> to_tensor(const img::GrayImage& image) {
  const img::GrayImage* p = &image;
  return stack(std::span<const img::GrayImage* const>(&p, 1));
}

double restoration_mse(const Weights& unet, const RestorationSet& set, int batch_size) {
  require(set.size() > 0, ErrorCode::kEmptyInput, "restoration set is empty");
  double sum = 0.0;
  std::size_t count = 0;
  const auto bs = static_cast<std::size_t>(std::max(batch_size, 1));
  for (std::size_t start = 0; start < set.size(); start += bs) {
    std::vector<const img::GrayImage*> in;
    std::vector<const img::GrayImage*> tg;
    for (std::size_t i = start; i < std::min(set.size(), start + bs); ++i) {
      in.push_back(&set.inputs[i]);
      tg.push_back(&set.targets[i]);
    }
    const auto out = nn::unet_forward(unet, stack(in));
    const auto target = stack(tg);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double d = static_cast<double>(out[i]) - static_cast<double>(target[i]);
      sum += d * d;
    }
    count += out.size();
  }
  return sum / static_cast<double>(count);
}

std::vector<double> predict(const Weights& classifier, std::span<const img::GrayImage> images, int batch_size) {
  std::vector<double> scores;
  scores.reserve(images.size());
  const auto bs = static_cast<std::size_t>(std::max(batch_size, 1));
  for (std::size_t start = 0; start < images.size(); start += bs) {
    std::vector<const img::GrayImage*> batch;
    for (std::size_t i = start; i < std::min(images.size(), start + bs); ++i) batch.push_back(&images[i]);
    const auto out = nn::classifier_forward(classifier, stack(batch));
    for (float p : out.values()) scores.push_back(static_cast<double>(p));
  }
  return scores;
}

Metrics evaluate(const Weights& classifier, const LabeledSet& set) {
  require(set.size() > 0, ErrorCode::kEmptyInput, "evaluation set is empty");
  const auto scores = predict(classifier, set.images);
  return compute_metrics(set.labels, scores);
}

std::string epoch_json(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["train_loss"] = r.train_loss;
  j["val_metric"] = r.val_metric;
  j["lr"] = r.lr;
  j["steps"] = r.steps;
  return j.dump();
}

TrainResult pretrain(const RestorationSet& train, const RestorationSet& val, const ModelConfig& model,
                     const TrainConfig& config, const EpochCallback& on_epoch) {
  model.validate();
  config.validate();
  require(train.size() > 0, ErrorCode::kEmptyInput, "pretraining set is empty");
  require(val.size() > 0, ErrorCode::kEmptyInput, "pretraining validation set is empty");
  require(train.inputs.size() == train.targets.size(), ErrorCode::kShapeMismatch, "inputs and targets differ in count");
  check_images(train.inputs, model, "pretrain input");
  check_images(train.targets, model, "pretrain target");
  check_images(val.inputs, model, "pretrain validation input");

  Weights w = nn::init_unet<float>(model.unet, mix_seed(config.seed, kInitStream));
  nn::Optimizer<float> opt(config.optimizer, w);
  nn::PlateauConfig sched_cfg = config.scheduler;
  sched_cfg.mode = nn::MetricMode::kMin;
  nn::PlateauScheduler scheduler(sched_cfg);
  EpochLog log(config.log_path);

  TrainResult result;
  const auto bs = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = epoch_order(train.size(), config.seed, epoch);
    double loss_sum = 0.0;
    std::size_t loss_n = 0;
    const double epoch_lr = opt.lr();
    for (std::size_t start = 0; start < order.size(); start += bs) {
      if (config.max_steps > 0 && result.steps >= config.max_steps) break;
      std::vector<const img::GrayImage*> in;
      std::vector<const img::GrayImage*> tg;
      for (std::size_t k = start; k < std::min(order.size(), start + bs); ++k) {
        in.push_back(&train.inputs[order[k]]);
        tg.push_back(&train.targets[order[k]]);
      }
      nn::UNetTape<float> tape;
      const auto out = nn::unet_forward(w, stack(in), &tape);
      const auto loss = nn::mse_loss(out, stack(tg));
      require(std::isfinite(loss.loss), ErrorCode::kNonFinite, "pretraining loss is not finite");
      opt.step(w, nn::unet_backward(w, tape, loss.grad));
      result.step_losses.push_back(static_cast<double>(loss.loss));
      loss_sum += static_cast<double>(loss.loss) * static_cast<double>(in.size());
      loss_n += in.size();
      ++result.steps;
    }
    if (loss_n == 0) break;  // step cap reached exactly at an epoch boundary

    const double val_mse = restoration_mse(w, val, config.batch_size);
    opt.set_lr(scheduler.step(val_mse, opt.lr()));
    if (scheduler.last_improved()) {
      result.best = w;
      result.best_epoch = epoch;
      result.best_metric = val_mse;
    }
    EpochRecord rec{epoch, loss_sum / static_cast<double>(loss_n), val_mse, epoch_lr, result.steps};
    result.history.push_back(rec);
    log.write(rec);
    if (on_epoch) on_epoch(rec);
    if (config.max_steps > 0 && result.steps >= config.max_steps) break;
  }
  return result;
}

TrainResult finetune(const Weights* encoder, const LabeledSet& train, const LabeledSet& val,
                     const ModelConfig& model, const TrainConfig& config, const EpochCallback& on_epoch) {
  model.validate();
  config.validate();
  require(train.size() > 0, ErrorCode::kEmptyInput, "fine-tuning set is empty");
  require(val.size() > 0, ErrorCode::kEmptyInput, "fine-tuning validation set is empty");
  require(train.images.size() == train.labels.size(), ErrorCode::kShapeMismatch, "images and labels differ in count");
  check_images(train.images, model, "finetune input");
  check_images(val.images, model, "finetune validation input");

  Weights w = nn::init_classifier<float>(model.unet, model.head_units, mix_seed(config.seed, kInitStream));
  if (encoder) nn::transplant_encoder(*encoder, w);

  const auto subset = select_label_fraction(train.labels, config.label_fraction, config.seed);

  nn::Optimizer<float> opt(config.optimizer, w);
  nn::PlateauConfig sched_cfg = config.scheduler;
  sched_cfg.mode = nn::MetricMode::kMax;
  nn::PlateauScheduler scheduler(sched_cfg);
  EpochLog log(config.log_path);

  TrainResult result;
  const auto bs = static_cast<std::size_t>(config.batch_size);
  const std::uint64_t aug_seed = mix_seed(config.seed, kAugmentStream);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = epoch_order(subset.size(), config.seed, epoch);
    const std::uint64_t epoch_aug = mix_seed(aug_seed, static_cast<std::uint64_t>(epoch));
    double loss_sum = 0.0;
    std::size_t loss_n = 0;
    const double epoch_lr = opt.lr();
    for (std::size_t start = 0; start < order.size(); start += bs) {
      if (config.max_steps > 0 && result.steps >= config.max_steps) break;
      std::vector<img::GrayImage> augmented;
      std::vector<const img::GrayImage*> batch;
      std::vector<int> labels;
      augmented.reserve(bs);
      for (std::size_t k = start; k < std::min(order.size(), start + bs); ++k) {
        const std::size_t idx = subset[order[k]];
        if (config.augment) {
          const auto draw = img::draw_augment(mix_seed(epoch_aug, idx));
          augmented.push_back(img::affine_augment(train.images[idx], draw.zoom, draw.shear));
          batch.push_back(&augmented.back());
        } else {
          batch.push_back(&train.images[idx]);
        }
        labels.push_back(train.labels[idx]);
      }
      nn::ClassifierTape<float> tape;
      const auto out = nn::classifier_forward(w, stack(batch), &tape);
      const auto loss = nn::bce_loss(out, std::span<const int>(labels));
      require(std::isfinite(loss.loss), ErrorCode::kNonFinite, "fine-tuning loss is not finite");
      opt.step(w, nn::classifier_backward(w, tape, loss.grad));
      result.step_losses.push_back(static_cast<double>(loss.loss));
      loss_sum += static_cast<double>(loss.loss) * static_cast<double>(labels.size());
      loss_n += labels.size();
      ++result.steps;
    }
    if (loss_n == 0) break;

    const double acc = evaluate(w, val).accuracy;
    opt.set_lr(scheduler.step(acc, opt.lr()));
    if (scheduler.last_improved()) {
      result.best = w;
      result.best_epoch = epoch;
      result.best_metric = acc;
    }
    EpochRecord rec{epoch, loss_sum / static_cast<double>(loss_n), acc, epoch_lr, result.steps};
    result.history.push_back(rec);
    log.write(rec);
    if (on_epoch) on_epoch(rec);
    if (config.stop_at && acc >= *config.stop_at) {
      result.stop_epoch = epoch;
      break;
    }
    if (config.max_steps > 0 && result.steps >= config.max_steps) break;
  }
  return result;
}

}  // namespace plr::pipeline
