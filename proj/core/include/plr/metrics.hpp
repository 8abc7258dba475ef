#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>

namespace plr::pipeline {

inline constexpr double kDefaultThreshold = 0.5;

/// Binary classification scores; COVID-positive is class 1.
struct Metrics {
  std::size_t tp = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<double> auc;  // absent when only one class is present

  // Set when a denominator was zero and the value was defined as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;

  std::size_t total() const { return tp + tn + fp + fn; }
};

/// A score >= threshold predicts class 1.
Metrics compute_metrics(std::span<const int> labels, std::span<const double> scores,
                        double threshold = kDefaultThreshold);

/// Area under the ROC curve; tied scores count one half, which makes it equal
/// to the Mann-Whitney statistic. Throws InvalidArgument on single-class input.
double roc_auc(std::span<const int> labels, std::span<const double> scores);

/// Single JSON object; undefined flags are only written when set.
std::string metrics_json(const Metrics& m);

}  // namespace plr::pipeline
