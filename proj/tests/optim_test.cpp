#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "plr/error.hpp"
#include "plr/nn/optim.hpp"

using namespace plr::nn;

namespace {

// Single-tensor model so that scalar recurrences can be checked directly.
ModelWeights<double> scalar_model(std::vector<double> values) {
  ModelWeights<double> w;
  const std::size_t n = values.size();
  w.tensors.push_back({"p", Tensor<double>({n, 1, 1, 1}, std::move(values))});
  return w;
}

// Reference Adadelta on one scalar.
struct AdadeltaRef {
  double rho, eps, lr;
  double eg = 0, edx = 0;
  double step(double p, double g) {
    eg = rho * eg + (1 - rho) * g * g;
    const double d = -std::sqrt(edx + eps) / std::sqrt(eg + eps) * g;
    edx = rho * edx + (1 - rho) * d * d;
    return p + lr * d;
  }
};

}  // namespace

TEST(Sgd, ZeroGradientLeavesParameters) {
  for (auto kind : {OptimizerKind::kSgd, OptimizerKind::kAdadelta}) {
    auto w = scalar_model({1.0, -2.0});
    Optimizer<double> opt({kind, 0.5, 0.9}, w);
    for (int i = 0; i < 3; ++i) opt.step(w, w.zeros_like());
    EXPECT_EQ(w, scalar_model({1.0, -2.0}));
  }
}

TEST(Sgd, UnitRateMovesByTheGradient) {
  auto w = scalar_model({3.0});
  Optimizer<double> opt({OptimizerKind::kSgd, 1.0}, w);
  opt.step(w, scalar_model({1.0}));
  EXPECT_EQ(w.tensors[0].value[0], 2.0);
  EXPECT_EQ(opt.steps(), 1);
}

TEST(Sgd, MomentumAccumulatesVelocity) {
  auto w = scalar_model({0.0});
  Optimizer<double> opt({OptimizerKind::kSgd, 0.1, 0.5}, w);
  const auto g = scalar_model({1.0});
  opt.step(w, g);  // v = -0.1
  opt.step(w, g);  // v = -0.15
  EXPECT_NEAR(w.tensors[0].value[0], -0.25, 1e-15);
  EXPECT_NEAR(opt.first()[0][0], -0.15, 1e-15);
}

TEST(Adadelta, MatchesScalarReference) {
  OptimizerConfig cfg{OptimizerKind::kAdadelta, 0.1};
  auto w = scalar_model({0.7});
  Optimizer<double> opt(cfg, w);
  AdadeltaRef ref{cfg.rho, cfg.eps, cfg.lr};
  double p = 0.7;
  const std::vector<double> grads = {1.0, -0.5, 2.0, 0.25, 0.0, -3.0};
  for (double g : grads) {
    opt.step(w, scalar_model({g}));
    p = ref.step(p, g);
    EXPECT_NEAR(w.tensors[0].value[0], p, 1e-15);
  }
  EXPECT_NEAR(opt.first()[0][0], ref.eg, 1e-15);
  EXPECT_NEAR(opt.second()[0][0], ref.edx, 1e-15);
}

TEST(Adadelta, FirstStepSize) {
  // E[g2] = 0.05, E[dx2] = 0: d = -sqrt(eps) / sqrt(0.05 + eps).
  auto w = scalar_model({0.0});
  Optimizer<double> opt({OptimizerKind::kAdadelta, 0.1}, w);
  opt.step(w, scalar_model({1.0}));
  EXPECT_NEAR(w.tensors[0].value[0], -0.1 * std::sqrt(1e-6) / std::sqrt(0.05 + 1e-6), 1e-18);
}

TEST(Optimizer, NonFiniteGradientThrowsAndLeavesParameters) {
  auto w = scalar_model({1.0, 2.0});
  Optimizer<double> opt({OptimizerKind::kSgd, 0.1}, w);
  try {
    opt.step(w, scalar_model({0.5, std::nan("")}));
    FAIL();
  } catch (const plr::Error& e) {
    EXPECT_EQ(e.code(), plr::ErrorCode::kNonFinite);
  }
  EXPECT_EQ(w, scalar_model({1.0, 2.0}));
  EXPECT_EQ(opt.steps(), 0);
}

TEST(Optimizer, NamesAndValidation) {
  EXPECT_EQ(parse_optimizer("sgd"), OptimizerKind::kSgd);
  EXPECT_EQ(parse_optimizer(to_string(OptimizerKind::kAdadelta)), OptimizerKind::kAdadelta);
  EXPECT_THROW(parse_optimizer("adam"), plr::Error);
  EXPECT_THROW((OptimizerConfig{OptimizerKind::kSgd, -1.0}.validate()), plr::Error);
  EXPECT_THROW((OptimizerConfig{OptimizerKind::kAdadelta, 1.0, 0.0, 1.5}.validate()), plr::Error);
}

TEST(Plateau, ImprovingMetricNeverChangesLr) {
  PlateauScheduler s({MetricMode::kMin, 2, 0.5, 1e-6});
  double lr = 0.1;
  for (int e = 0; e < 20; ++e) {
    lr = s.step(1.0 / (e + 1), lr);
    EXPECT_TRUE(s.last_improved());
  }
  EXPECT_EQ(lr, 0.1);
  EXPECT_EQ(s.reductions(), 0);
}

TEST(Plateau, FlatMetricHalvesAtEpochThree) {
  // Epoch 1 sets the best; epochs 2 and 3 fail to improve, which exhausts a
  // patience of 2, so the rate used from epoch 4 on is halved.
  PlateauScheduler s({MetricMode::kMax, 2, 0.5, 1e-6});
  std::vector<double> lrs;
  double lr = 0.1;
  for (int e = 1; e <= 5; ++e) {
    lr = s.step(0.5, lr);
    lrs.push_back(lr);
  }
  EXPECT_EQ(lrs[0], 0.1);
  EXPECT_EQ(lrs[1], 0.1);
  EXPECT_EQ(lrs[2], 0.05);
  EXPECT_EQ(lrs[3], 0.05);
  EXPECT_EQ(lrs[4], 0.025);
  EXPECT_EQ(s.reductions(), 2);
}

TEST(Plateau, ModeDecidesDirection) {
  PlateauScheduler mx({MetricMode::kMax, 1, 0.5, 0.0});
  mx.step(0.5, 1.0);
  mx.step(0.6, 1.0);
  EXPECT_TRUE(mx.last_improved());
  PlateauScheduler mn({MetricMode::kMin, 1, 0.5, 0.0});
  mn.step(0.5, 1.0);
  EXPECT_EQ(mn.step(0.6, 1.0), 0.5);
  EXPECT_FALSE(mn.last_improved());
  EXPECT_EQ(*mn.best(), 0.5);
}

TEST(Plateau, NeverBelowMinLr) {
  PlateauScheduler s({MetricMode::kMin, 1, 0.1, 1e-3});
  double lr = 0.5;
  for (int e = 0; e < 50; ++e) {
    lr = s.step(1.0, lr);
    EXPECT_GE(lr, 1e-3);
  }
  EXPECT_EQ(lr, 1e-3);
}
