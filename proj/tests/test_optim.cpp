#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fedsem/optim.hpp"

namespace fedsem {
namespace {

double global_norm(const ParamList& g) { return std::sqrt(squared_norm(g)); }

TEST(Clip, RescalesToThreshold) {
  ParamList g{Tensor::from_values({3.0, 4.0})};
  EXPECT_DOUBLE_EQ(clip_gradients(g, 1.0), 5.0);
  EXPECT_NEAR(g[0][0], 0.6, 1e-15);
  EXPECT_NEAR(g[0][1], 0.8, 1e-15);
}

TEST(Clip, LeavesSmallGradientsAlone) {
  ParamList g{Tensor::from_values({0.3, 0.4})};
  const ParamList before = g;
  clip_gradients(g, 1.0);
  EXPECT_EQ(g, before);
}

TEST(Clip, NonPositiveThresholdIsConfigError) {
  ParamList g{Tensor::from_values({1.0})};
  EXPECT_THROW(clip_gradients(g, 0.0), ConfigError);
  EXPECT_THROW(clip_gradients(g, -1.0), ConfigError);
}

TEST(Clip, NormIsMinOfPreNormAndTauAndIdempotent) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-3.0, 3.0), t(0.1, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    ParamList g{Tensor({3}), Tensor({2, 2})};
    for (auto& x : g) for (Index i = 0; i < x.size(); ++i) x[i] = u(rng);
    const double tau = t(rng);
    const double pre = clip_gradients(g, tau);
    EXPECT_NEAR(global_norm(g), std::min(pre, tau), 1e-12);
    const ParamList once = g;
    clip_gradients(g, tau);
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (Index j = 0; j < g[i].size(); ++j) EXPECT_NEAR(g[i][j], once[i][j], 1e-15);
    }
  }
}

TEST(Adam, ZeroGradientAtZeroIsFixedPoint) {
  ParamList p{Tensor::from_values({0.0, 0.0})};
  OptimizerState st(AdamConfig{}, p);
  adam_step(st, p, zeros_like(p));
  EXPECT_EQ(p[0][0], 0.0);
  EXPECT_EQ(st.step, 1);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamList p{Tensor::from_values({1.0})};
  OptimizerState st(AdamConfig{.learning_rate = 0.1, .weight_decay = 0.0}, p);
  adam_step(st, p, {Tensor::from_values({1.0})});
  // m_hat = 1, v_hat = 1, so w = 1 - 0.1 * 1 / (1 + 1e-8).
  EXPECT_NEAR(p[0][0], 0.9, 1e-8);
}

TEST(Adam, WeightDecayShrinksWithZeroGradient) {
  ParamList p{Tensor::from_values({2.0, -2.0})};
  OptimizerState st(AdamConfig{.learning_rate = 0.01, .weight_decay = 0.1}, p);
  for (int i = 0; i < 5; ++i) adam_step(st, p, zeros_like(p));
  EXPECT_LT(std::abs(p[0][0]), 2.0);
  EXPECT_LT(std::abs(p[0][1]), 2.0);
  EXPECT_EQ(st.step, 5);
}

TEST(Adam, StepCounterStrictlyIncreases) {
  ParamList p{Tensor::from_values({1.0})};
  OptimizerState st(AdamConfig{}, p);
  for (int i = 1; i <= 4; ++i) {
    adam_step(st, p, {Tensor::from_values({0.5})});
    EXPECT_EQ(st.step, i);
  }
}

}  // namespace
}  // namespace fedsem
