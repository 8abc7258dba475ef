#include "plr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <json.hpp>

#include "plr/error.hpp"

namespace plr::pipeline {

namespace {

void check_inputs(std::span<const int> labels, std::span<const double> scores) {
  require(!labels.empty(), ErrorCode::kEmptyInput, "metrics need at least one sample");
  require(labels.size() == scores.size(), ErrorCode::kShapeMismatch,
          "labels and scores differ in length (" + std::to_string(labels.size()) + " vs " +
              std::to_string(scores.size()) + ")");
  for (int l : labels) require(l == 0 || l == 1, ErrorCode::kInvalidArgument, "labels must be 0 or 1");
  for (double s : scores) require(std::isfinite(s), ErrorCode::kNonFinite, "non-finite score");
}

}  // namespace

Metrics compute_metrics(std::span<const int> labels, std::span<const double> scores, double threshold) {
  check_inputs(labels, scores);
  Metrics m;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i] == 1) {
      predicted ? ++m.tp : ++m.fn;
    } else {
      predicted ? ++m.fp : ++m.tn;
    }
  }
  const auto d = [](std::size_t v) { return static_cast<double>(v); };
  m.accuracy = d(m.tp + m.tn) / d(m.total());
  if (m.tp + m.fp > 0) {
    m.precision = d(m.tp) / d(m.tp + m.fp);
  } else {
    m.precision_undefined = true;
  }
  if (m.tp + m.fn > 0) {
    m.recall = d(m.tp) / d(m.tp + m.fn);
  } else {
    m.recall_undefined = true;
  }
  if (m.precision + m.recall > 0.0) {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  } else {
    m.f1_undefined = true;
  }
  if (m.tp + m.fn > 0 && m.tn + m.fp > 0) m.auc = roc_auc(labels, scores);
  return m;
}

double roc_auc(std::span<const int> labels, std::span<const double> scores) {
  check_inputs(labels, scores);
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t neg = labels.size() - pos;
  require(pos > 0 && neg > 0, ErrorCode::kInvalidArgument, "roc_auc needs both classes");

  // Walk thresholds from high to low; a group of tied scores is one ROC
  // step, and the trapezoid over it gives ties their half credit. Counts stay
  // integral until the final division, so the result matches pair counting.
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t twice_area = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::uint64_t dtp = 0;
    std::uint64_t dfp = 0;
    const double s = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == s; ++i) labels[order[i]] == 1 ? ++dtp : ++dfp;
    twice_area += dfp * (2 * tp + dtp);
    tp += dtp;
    fp += dfp;
  }
  return static_cast<double>(twice_area) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

std::string metrics_json(const Metrics& m) {
  nlohmann::ordered_json j;
  j["accuracy"] = m.accuracy;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["auc"] = m.auc ? nlohmann::ordered_json(*m.auc) : nlohmann::ordered_json(nullptr);
  j["tp"] = m.tp;
  j["tn"] = m.tn;
  j["fp"] = m.fp;
  j["fn"] = m.fn;
  if (m.precision_undefined) j["precision_undefined"] = true;
  if (m.recall_undefined) j["recall_undefined"] = true;
  if (m.f1_undefined) j["f1_undefined"] = true;
  return j.dump(2);
}

}  // namespace plr::pipeline
