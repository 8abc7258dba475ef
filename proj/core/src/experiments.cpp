#include "plr/experiments.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "plr/corruptor.hpp"
#include "plr/error.hpp"

namespace plr::pipeline {

namespace {

nlohmann::ordered_json scores_json(const Metrics& m) {
  nlohmann::ordered_json j;
  j["accuracy"] = m.accuracy;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["auc"] = m.auc ? nlohmann::ordered_json(*m.auc) : nlohmann::ordered_json(nullptr);
  return j;
}

nlohmann::ordered_json full_json(const Metrics& m) { return nlohmann::ordered_json::parse(metrics_json(m)); }

}  // namespace

std::vector<SweepCell> sweep(const SweepInputs& inputs, const SweepConfig& config) {
  require(!config.patch_counts.empty() && !config.image_counts.empty(), ErrorCode::kInvalidArgument,
          "sweep needs at least one P and one M value");
  require(!inputs.normals.empty(), ErrorCode::kEmptyInput, "sweep needs normal images");
  require(inputs.masks.empty() || inputs.masks.size() == inputs.normals.size(), ErrorCode::kInvalidArgument,
          "sweep: one mask per normal image");
  for (int p : config.patch_counts) require(p >= 0, ErrorCode::kInvalidArgument, "P values must be >= 0");
  for (auto m : config.image_counts) require(m >= 1, ErrorCode::kInvalidArgument, "M values must be >= 1");

  std::vector<img::BinaryMask> derived;
  const std::vector<img::BinaryMask>* masks = &inputs.masks;
  if (inputs.masks.empty()) {
    for (const auto& n : inputs.normals) derived.push_back(img::derive_lung_mask(n, config.spec.mask_threshold));
    masks = &derived;
  }

  std::vector<SweepCell> cells;
  for (int p : config.patch_counts) {
    for (std::size_t m : config.image_counts) {
      corrupt::CorruptionSpec spec = config.spec;
      spec.patches_per_image = p;
      spec.validate();
      RestorationSet all;
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t src = i % inputs.normals.size();
        all.inputs.push_back(corrupt::corrupt_image(inputs.normals[src], &(*masks)[src], inputs.bank, spec,
                                                    spec.seed + i));
        all.targets.push_back(inputs.normals[src]);
      }
      auto [train, val] = split_restoration(all, config.pretrain.val_fraction, config.pretrain.seed);
      const auto pre = pretrain(train, val, config.model, config.pretrain);
      const auto fine = finetune(&pre.best, inputs.train, inputs.val, config.model, config.finetune);
      SweepCell cell;
      cell.patches = p;
      cell.images = m;
      cell.metrics = evaluate(fine.best, inputs.val);
      cell.pretrain_val_mse = pre.best_metric;
      cell.finetune_best_epoch = fine.best_epoch;
      cells.push_back(cell);
    }
  }
  return cells;
}

std::string sweep_json(std::span<const SweepCell> cells) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& c : cells) {
    nlohmann::ordered_json j;
    j["P"] = c.patches;
    j["M"] = c.images;
    j["metrics"] = full_json(c.metrics);
    j["pretrain_val_mse"] = c.pretrain_val_mse;
    j["finetune_best_epoch"] = c.finetune_best_epoch;
    arr.push_back(std::move(j));
  }
  return arr.dump(2);
}

img::GrayImage export_activations(const Weights& weights, const img::GrayImage& image, std::string_view layer) {
  const auto act = nn::layer_activation(weights, to_tensor(image), layer);
  const nn::Shape& s = act.shape();
  const auto side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(s.c))));
  const std::size_t tiles = side * side < s.c ? side + 1 : side;  // guard against sqrt round-down
  img::GrayImage grid(static_cast<int>(tiles * s.w), static_cast<int>(tiles * s.h), 0);
  for (std::size_t c = 0; c < s.c; ++c) {
    const float* map = act.plane(0, c);
    const auto [lo, hi] = std::minmax_element(map, map + s.plane());
    const double range = static_cast<double>(*hi) - static_cast<double>(*lo);
    const std::size_t ox = (c % tiles) * s.w;
    const std::size_t oy = (c / tiles) * s.h;
    for (std::size_t y = 0; y < s.h; ++y) {
      for (std::size_t x = 0; x < s.w; ++x) {
        double v = 0.0;
        if (range > 0.0) v = (static_cast<double>(map[y * s.w + x]) - static_cast<double>(*lo)) / range * 255.0;
        grid.at(static_cast<int>(ox + x), static_cast<int>(oy + y)) = img::quantize(v);
      }
    }
  }
  return grid;
}

RepeatSummary summarize_repeats(std::span<const Metrics> runs) {
  require(!runs.empty(), ErrorCode::kEmptyInput, "no runs to summarize");
  RepeatSummary s;
  s.runs.assign(runs.begin(), runs.end());
  s.highest = runs.front();
  const double n = static_cast<double>(runs.size());
  bool all_auc = true;
  double auc_sum = 0.0;
  for (const auto& r : runs) {
    s.highest.accuracy = std::max(s.highest.accuracy, r.accuracy);
    s.highest.precision = std::max(s.highest.precision, r.precision);
    s.highest.recall = std::max(s.highest.recall, r.recall);
    s.highest.f1 = std::max(s.highest.f1, r.f1);
    if (r.auc) {
      s.highest.auc = s.highest.auc ? std::max(*s.highest.auc, *r.auc) : *r.auc;
      auc_sum += *r.auc;
    } else {
      all_auc = false;
    }
    s.average.accuracy += r.accuracy / n;
    s.average.precision += r.precision / n;
    s.average.recall += r.recall / n;
    s.average.f1 += r.f1 / n;
  }
  if (all_auc) s.average.auc = auc_sum / n;
  return s;
}

std::string repeats_json(const RepeatSummary& summary) {
  nlohmann::ordered_json j;
  j["runs"] = nlohmann::ordered_json::array();
  for (const auto& r : summary.runs) j["runs"].push_back(full_json(r));
  j["highest"] = scores_json(summary.highest);
  j["average"] = scores_json(summary.average);
  j["highest_rule"] = "per-metric maximum over runs";
  return j.dump(2);
}

}  // namespace plr::pipeline
