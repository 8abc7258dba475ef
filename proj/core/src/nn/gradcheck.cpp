#include "plr/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "plr/error.hpp"
#include "plr/nn/loss.hpp"
#include "plr/nn/network.hpp"
#include "plr/nn/ops.hpp"
#include "plr/rng.hpp"

namespace plr::nn {

namespace {

using Tn = Tensor<double>;
using LossFn = std::function<double()>;

struct Checker {
  GradCheckReport& report;
  Rng& rng;

  // Compares analytic[i] with a central difference of loss() in x[i] for up
  // to `limit` randomly chosen entries (all entries if x is small enough).
  void compare(Tn& x, const Tn& analytic, const LossFn& loss, std::size_t limit = 64) {
    check_shape(analytic.shape(), x.shape(), "gradcheck");
    std::vector<std::size_t> idx(x.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (idx.size() > limit) {
      for (std::size_t i = 0; i < limit; ++i) std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
      idx.resize(limit);
    }
    for (std::size_t i : idx) {
      const double saved = x[i];
      auto diff = [&](double h) {
        x[i] = saved + h;
        const double up = loss();
        x[i] = saved - h;
        const double down = loss();
        x[i] = saved;
        return (up - down) / (2.0 * h);
      };
      const double numeric = diff(kGradStep);
      // A kink inside [x-h, x+h] shows up as disagreement between step sizes;
      // such entries say nothing about the analytic gradient.
      if (relative_error(numeric, diff(kGradStep / 2)) > report.tolerance / 10) {
        ++report.skipped;
        continue;
      }
      report.max_rel_error = std::max(report.max_rel_error, relative_error(analytic[i], numeric));
      ++report.checked;
    }
  }
};

Tn random_tensor(Rng& rng, Shape s, double scale = 1.0) {
  Tn t(s);
  for (auto& v : t.values()) v = rng.normal() * scale;
  return t;
}

// Keeps values at least `gap` away from zero so ReLU is smooth around them.
Tn away_from_zero(Rng& rng, Shape s, double gap) {
  Tn t(s);
  for (auto& v : t.values()) {
    double x = 0.0;
    do {
      x = rng.normal();
    } while (std::abs(x) < gap);
    v = x;
  }
  return t;
}

double dot(const Tn& a, const Tn& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
}

Shape random_shape(Rng& rng, bool even) {
  Shape s{pick(rng, 1, 2), pick(rng, 1, 3), pick(rng, 2, 6), pick(rng, 2, 6)};
  if (even) {
    s.h = 2 * pick(rng, 1, 3);
    s.w = 2 * pick(rng, 1, 3);
  }
  return s;
}

void trial_conv2d(Checker& c) {
  const Shape s = random_shape(c.rng, false);
  const std::size_t k = 2 * pick(c.rng, 0, 2) + 1;
  const std::size_t out = pick(c.rng, 1, 3);
  Tn x = random_tensor(c.rng, s);
  Tn w = random_tensor(c.rng, {out, s.c, k, k}, 0.5);
  Tn b = random_tensor(c.rng, {out, 1, 1, 1});
  Tn r = random_tensor(c.rng, {s.n, out, s.h, s.w});
  auto g = conv2d_backward(x, w, r);
  LossFn loss = [&] { return dot(r, conv2d(x, w, b)); };
  c.compare(x, g.input, loss);
  c.compare(w, g.weight, loss);
  c.compare(b, g.bias, loss);
}

void trial_relu(Checker& c) {
  const Shape s = random_shape(c.rng, false);
  Tn x = away_from_zero(c.rng, s, 1e-3);
  Tn r = random_tensor(c.rng, s);
  Tn g = relu_backward(relu(x), r);
  c.compare(x, g, [&] { return dot(r, relu(x)); });
}

void trial_maxpool(Checker& c) {
  const Shape s = random_shape(c.rng, true);
  // Distinct values on a 1e-2 grid, shuffled: no window has a near tie.
  Tn x(s);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.01 * static_cast<double>(i) - 0.3;
  for (std::size_t i = x.size(); i > 1; --i) std::swap(x[i - 1], x[c.rng.index(i)]);
  auto pooled = maxpool2(x);
  Tn r = random_tensor(c.rng, pooled.output.shape());
  Tn g = maxpool2_backward(s, pooled.argmax, r);
  c.compare(x, g, [&] { return dot(r, maxpool2(x).output); });
}

void trial_upsample(Checker& c) {
  const Shape s = random_shape(c.rng, false);
  Tn x = random_tensor(c.rng, s);
  Tn r = random_tensor(c.rng, {s.n, s.c, 2 * s.h, 2 * s.w});
  Tn g = upsample_nearest2_backward(r);
  c.compare(x, g, [&] { return dot(r, upsample_nearest2(x)); });
}

void trial_concat(Checker& c) {
  const Shape sa = random_shape(c.rng, false);
  Shape sb = sa;
  sb.c = pick(c.rng, 1, 3);
  Tn a = random_tensor(c.rng, sa);
  Tn b = random_tensor(c.rng, sb);
  Tn r = random_tensor(c.rng, {sa.n, sa.c + sb.c, sa.h, sa.w});
  auto [ga, gb] = concat_channels_backward(r, sa.c);
  LossFn loss = [&] { return dot(r, concat_channels(a, b)); };
  c.compare(a, ga, loss);
  c.compare(b, gb, loss);
}

void trial_gap(Checker& c) {
  const Shape s = random_shape(c.rng, false);
  Tn x = random_tensor(c.rng, s);
  Tn r = random_tensor(c.rng, {s.n, s.c, 1, 1});
  Tn g = global_avg_pool_backward(s, r);
  c.compare(x, g, [&] { return dot(r, global_avg_pool(x)); });
}

void trial_dense(Checker& c) {
  const std::size_t n = pick(c.rng, 1, 3);
  const std::size_t in = pick(c.rng, 1, 8);
  const std::size_t out = pick(c.rng, 1, 6);
  Tn x = random_tensor(c.rng, {n, in, 1, 1});
  Tn w = random_tensor(c.rng, {out, in, 1, 1});
  Tn b = random_tensor(c.rng, {out, 1, 1, 1});
  Tn r = random_tensor(c.rng, {n, out, 1, 1});
  auto g = dense_backward(x, w, r);
  LossFn loss = [&] { return dot(r, dense(x, w, b)); };
  c.compare(x, g.input, loss);
  c.compare(w, g.weight, loss);
  c.compare(b, g.bias, loss);
}

void trial_sigmoid(Checker& c) {
  const Shape s = random_shape(c.rng, false);
  Tn x = random_tensor(c.rng, s, 3.0);
  Tn r = random_tensor(c.rng, s);
  Tn g = sigmoid_backward(sigmoid(x), r);
  c.compare(x, g, [&] { return dot(r, sigmoid(x)); });
}

void trial_mse(Checker& c) {
  const Shape s = random_shape(c.rng, false);
  Tn p = random_tensor(c.rng, s);
  Tn t = random_tensor(c.rng, s);
  auto res = mse_loss(p, t);
  c.compare(p, res.grad, [&] { return mse_loss(p, t).loss; });
}

void trial_bce(Checker& c) {
  const std::size_t n = pick(c.rng, 1, 6);
  Tn p({n, 1, 1, 1});
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = c.rng.uniform(0.02, 0.98);
    labels[i] = static_cast<int>(c.rng.index(2));
  }
  auto res = bce_loss(p, std::span<const int>(labels));
  c.compare(p, res.grad, [&] { return bce_loss(p, std::span<const int>(labels)).loss; });
}

// Draws random biases too, so no pre-activation sits exactly at a ReLU kink.
void jitter_biases(ModelWeights<double>& w, Rng& rng) {
  for (auto& t : w.tensors) {
    if (t.name.ends_with(".bias")) {
      for (auto& v : t.value.values()) v = 0.1 * rng.normal();
    }
  }
}

void compare_weight_slice(Checker& c, ModelWeights<double>& w, const ModelWeights<double>& grads,
                          const LossFn& loss) {
  // Four tensors per trial, a few entries each.
  for (int k = 0; k < 4; ++k) {
    const std::size_t t = c.rng.index(w.tensors.size());
    c.compare(w.tensors[t].value, grads.tensors[t].value, loss, 6);
  }
}

void trial_unet(Checker& c) {
  auto w = init_unet<double>(UNetConfig::desk(), c.rng.next_u64());
  jitter_biases(w, c.rng);
  const std::size_t n = pick(c.rng, 1, 2);
  Tn x = random_tensor(c.rng, {n, 1, 8, 8});
  Tn target(x.shape());
  for (auto& v : target.values()) v = c.rng.uniform01();
  UNetTape<double> tape;
  const Tn out = unet_forward(w, x, &tape);
  const auto grads = unet_backward(w, tape, mse_loss(out, target).grad);
  compare_weight_slice(c, w, grads, [&] { return mse_loss(unet_forward(w, x), target).loss; });
}

void trial_classifier(Checker& c) {
  auto w = init_classifier<double>(UNetConfig::desk(), 16, c.rng.next_u64());
  jitter_biases(w, c.rng);
  const std::size_t n = pick(c.rng, 1, 3);
  Tn x = random_tensor(c.rng, {n, 1, 8, 8});
  std::vector<int> labels(n);
  for (auto& l : labels) l = static_cast<int>(c.rng.index(2));
  ClassifierTape<double> tape;
  const Tn out = classifier_forward(w, x, &tape);
  const auto grads = classifier_backward(w, tape, bce_loss(out, std::span<const int>(labels)).grad);
  compare_weight_slice(c, w, grads,
                       [&] { return bce_loss(classifier_forward(w, x), std::span<const int>(labels)).loss; });
}

struct Entry {
  const char* name;
  void (*trial)(Checker&);
  bool end_to_end;
};

constexpr Entry kOps[] = {
    {"conv2d", trial_conv2d, false},
    {"relu", trial_relu, false},
    {"maxpool2", trial_maxpool, false},
    {"upsample_nearest2", trial_upsample, false},
    {"concat_channels", trial_concat, false},
    {"global_avg_pool", trial_gap, false},
    {"dense", trial_dense, false},
    {"sigmoid", trial_sigmoid, false},
    {"mse_loss", trial_mse, false},
    {"bce_loss", trial_bce, false},
    {"unet", trial_unet, true},
    {"classifier", trial_classifier, true},
};

const Entry& find_op(std::string_view op) {
  for (const auto& e : kOps) {
    if (op == e.name) return e;
  }
  fail(ErrorCode::kInvalidArgument, "gradcheck: unknown op '" + std::string(op) + "'");
}

}  // namespace

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
  return std::abs(analytic - numeric) / denom;
}

std::vector<std::string> gradcheck_ops() {
  std::vector<std::string> names;
  for (const auto& e : kOps) names.emplace_back(e.name);
  return names;
}

double default_tolerance(std::string_view op) {
  return find_op(op).end_to_end ? kEndToEndTolerance : kOpTolerance;
}

GradCheckReport grad_check(std::string_view op, int trials, double tolerance, std::uint64_t seed) {
  const Entry& entry = find_op(op);
  require(trials >= 1, ErrorCode::kInvalidArgument, "gradcheck needs at least one trial");
  require(tolerance > 0.0, ErrorCode::kInvalidArgument, "gradcheck tolerance must be positive");
  GradCheckReport report;
  report.op = entry.name;
  report.trials = trials;
  report.tolerance = tolerance;
  Rng rng(seed);
  Checker checker{report, rng};
  for (int t = 0; t < trials; ++t) entry.trial(checker);
  report.passed = report.checked > 0 && report.max_rel_error < tolerance;
  return report;
}

}  // namespace plr::nn
