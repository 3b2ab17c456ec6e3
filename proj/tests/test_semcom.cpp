#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <random>

#include "fedsem/data.hpp"
#include "fedsem/federation.hpp"
#include "fedsem/gradcheck_suite.hpp"
#include "fedsem/semcom.hpp"

namespace fedsem {
namespace {

Tensor random_image(const SemComConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor t({cfg.channels, cfg.height, cfg.width});
  for (Index i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

TEST(Channel, NoiseVariance) {
  EXPECT_DOUBLE_EQ(noise_variance(10.0), 0.1);
  EXPECT_DOUBLE_EQ(noise_variance(0.0), 1.0);
  EXPECT_NEAR(noise_variance(30.0), 0.001, 1e-18);
}

TEST(Channel, IdentityDrawPassesThrough) {
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(8, -1.0, 1.0);
  const auto draw = ChannelDraw::identity(4);
  EXPECT_EQ(apply_channel(x, draw), x);
  EXPECT_EQ(zf_equalize(x, draw, 0.0), x);
}

// Oracle: explicit complex multiplication with std::complex.
TEST(Channel, PairsAdjacentRealsIntoSymbols) {
  ChannelDraw d = ChannelDraw::identity(2);
  d.fading << std::complex<double>(0.0, 1.0), std::complex<double>(2.0, -1.0);
  d.noise << std::complex<double>(0.5, 0.0), std::complex<double>(0.0, 0.25);
  Eigen::VectorXd x(4);
  x << 1.0, 2.0, -1.0, 3.0;
  const auto y = apply_channel(x, d);
  const auto s0 = d.fading[0] * std::complex<double>(1.0, 2.0) + d.noise[0];
  const auto s1 = d.fading[1] * std::complex<double>(-1.0, 3.0) + d.noise[1];
  EXPECT_DOUBLE_EQ(y[0], s0.real());
  EXPECT_DOUBLE_EQ(y[1], s0.imag());
  EXPECT_DOUBLE_EQ(y[2], s1.real());
  EXPECT_DOUBLE_EQ(y[3], s1.imag());
}

TEST(Channel, ZeroForcingInvertsNoiselessFading) {
  SemComConfig cfg = SemComConfig::desk_scale();
  cfg.noise_enabled = false;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto draw = draw_channel(cfg, rng);
    Eigen::VectorXd x(cfg.channel_dim);
    for (Index i = 0; i < x.size(); ++i) x[i] = n(rng);
    const auto back = zf_equalize(apply_channel(x, draw), draw, 0.0);
    EXPECT_LE((back - x).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Channel, UnitFadingLeavesOnlyNoise) {
  SemComConfig cfg = SemComConfig::desk_scale();
  cfg.fading_enabled = false;
  std::mt19937_64 rng(6);
  const auto draw = draw_channel(cfg, rng);
  const Eigen::VectorXd x = Eigen::VectorXd::Zero(cfg.channel_dim);
  const auto y = zf_equalize(apply_channel(x, draw), draw, 0.0);
  for (Index i = 0; i < draw.noise.size(); ++i) {
    EXPECT_DOUBLE_EQ(y[2 * i], draw.noise[i].real());
    EXPECT_DOUBLE_EQ(y[2 * i + 1], draw.noise[i].imag());
  }
}

TEST(Channel, DeepFadeStaysFinite) {
  ChannelDraw d = ChannelDraw::identity(1);
  d.fading[0] = {1e-300, 0.0};
  d.noise[0] = {0.1, 0.1};
  Eigen::VectorXd x(2);
  x << 1.0, 1.0;
  const auto y = zf_equalize(apply_channel(x, d), d, 1e-8);
  EXPECT_TRUE(y.allFinite());
}

TEST(Channel, NoiseEnergyMatchesSnr) {
  SemComConfig cfg = SemComConfig::desk_scale();
  cfg.fading_enabled = false;
  std::mt19937_64 rng(7);
  double energy = 0.0;
  long count = 0;
  while (count < 100000) {
    const auto d = draw_channel(cfg, rng);
    for (Index i = 0; i < d.noise.size() && count < 100000; ++i, ++count) energy += std::norm(d.noise[i]);
  }
  const double mean = energy / static_cast<double>(count);
  EXPECT_GE(mean, 0.095);
  EXPECT_LE(mean, 0.105);
}

TEST(Loss, WorkedExample) {
  const Tensor x = Tensor::from_values({0.0, 0.0});
  const Tensor y = Tensor::from_values({0.5, -0.5});
  // MSE 0.25, MAE 0.5: 0.5 * 0.25 + 0.5 * 0.5.
  EXPECT_DOUBLE_EQ(reconstruction_loss(x, y, 0.5), 0.375);
  EXPECT_DOUBLE_EQ(reconstruction_loss(x, y, 1.0), 0.25);
  EXPECT_DOUBLE_EQ(reconstruction_loss(x, y, 0.0), 0.5);
}

TEST(Loss, AlphaZeroPointEightExample) {
  const Tensor x = Tensor::from_values({1.0});
  const Tensor y = Tensor::from_values({0.5});
  // 0.8 * 0.25 + 0.2 * 0.5
  EXPECT_NEAR(reconstruction_loss(x, y, 0.8), 0.3, 1e-15);
}

TEST(Loss, GradientSignAtZeroIsZero) {
  const Tensor x = Tensor::from_values({1.0, 1.0});
  const Tensor g = reconstruction_loss_grad(x, Tensor::from_values({1.0, 2.0}), 0.0);
  EXPECT_EQ(g[0], 0.0);
  EXPECT_DOUBLE_EQ(g[1], 0.5);
}

TEST(SemComConfig, RejectsBadDimensions) {
  SemComConfig cfg = SemComConfig::desk_scale();
  cfg.channel_dim = 7;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = SemComConfig::desk_scale();
  cfg.channel_dim = cfg.semantic_dim;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = SemComConfig::desk_scale();
  cfg.height = 15;
  EXPECT_THROW(SemComModel{cfg}, ConfigError);
}

TEST(Model, DeskShapes) {
  const SemComModel m(SemComConfig::desk_scale());
  std::mt19937_64 rng(1);
  const auto p = m.init_params(rng);
  const Tensor img = random_image(m.config(), rng);
  const auto f = m.semantic_encode(p, img);
  EXPECT_EQ(f.z.size(), 64);
  EXPECT_EQ(f.skip1.shape(), (Shape{8, 8, 8}));
  EXPECT_EQ(f.skip2.shape(), (Shape{16, 4, 4}));
  EXPECT_EQ(m.channel_encode(p, f.z).size(), 8);
  EXPECT_EQ(m.reconstruct(p, img, rng, false).image.shape(), img.shape());
}

TEST(Model, PaperShapes) {
  const SemComModel m(SemComConfig::paper_scale());
  std::mt19937_64 rng(1);
  const auto p = m.init_params(rng);
  const Tensor img = random_image(m.config(), rng);
  const auto f = m.semantic_encode(p, img);
  EXPECT_EQ(f.z.size(), 256);
  EXPECT_EQ(f.skip1.shape(), (Shape{32, 32, 32}));
  EXPECT_EQ(f.skip2.shape(), (Shape{64, 16, 16}));
  EXPECT_EQ(m.channel_encode(p, f.z).size(), 32);
  EXPECT_EQ(m.reconstruct(p, img, rng, false).image.shape(), (Shape{3, 64, 64}));
}

TEST(Model, ZeroParamsGiveHalfGray) {
  const SemComModel m(SemComConfig::desk_scale());
  const auto p = m.zero_params();
  std::mt19937_64 rng(2);
  const Tensor img = random_image(m.config(), rng);
  EXPECT_EQ(m.semantic_encode(p, img).z.data().cwiseAbs().maxCoeff(), 0.0);
  const auto out = m.reconstruct(p, img, rng, false).image;
  for (Index i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], 0.5);
}

TEST(Model, OutputInUnitRange) {
  const SemComModel m(SemComConfig::desk_scale());
  std::mt19937_64 rng(3);
  const auto p = m.init_params(rng);
  const auto out = m.reconstruct(p, random_image(m.config(), rng), rng, false).image;
  EXPECT_GE(out.data().minCoeff(), 0.0);
  EXPECT_LE(out.data().maxCoeff(), 1.0);
}

TEST(Model, DeterministicForSameSeed) {
  const SemComModel m(SemComConfig::desk_scale());
  std::mt19937_64 a(9), b(9);
  const auto pa = m.init_params(a);
  const auto pb = m.init_params(b);
  EXPECT_EQ(pa, pb);
  const Tensor img = random_image(m.config(), a);
  random_image(m.config(), b);
  EXPECT_EQ(m.reconstruct(pa, img, a, false).image, m.reconstruct(pb, img, b, false).image);
}

TEST(Model, EveryParameterReceivesGradient) {
  const SemComModel m(SemComConfig::desk_scale());
  std::mt19937_64 rng(4);
  const auto p = m.init_params(rng);
  ModelParams total = zeros_like(p);
  for (int i = 0; i < 4; ++i) {
    const Tensor img = random_image(m.config(), rng);
    const auto r = m.reconstruct(p, img, rng, true);
    const auto g = m.backward(p, r.tape, reconstruction_loss_grad(img, r.image, 0.8));
    for (std::size_t j = 0; j < total.tensors.size(); ++j) total.tensors[j].data() += g.tensors[j].data().cwiseAbs();
  }
  for (std::size_t j = 0; j < total.tensors.size(); ++j) {
    EXPECT_GT(total.tensors[j].data().maxCoeff(), 0.0) << "tensor " << j;
  }
}

TEST(Model, PipelineGradientsMatchFiniteDifferences) {
  const auto r = pipeline_gradient_check(SemComConfig::desk_scale(), 1e-6);
  EXPECT_TRUE(r.passed()) << r.worst_tensor << " " << r.max_relative_error;
  EXPECT_GT(r.checked, 1000);
}

TEST(Model, OverfitsSingleImage) {
  SemComConfig cfg = SemComConfig::desk_scale();
  cfg.noise_enabled = false;
  cfg.fading_enabled = false;
  const SemComModel m(cfg);
  std::mt19937_64 rng(12);
  const auto start = m.init_params(rng);
  const std::vector<Tensor> data{synth_corpus(1, 1, 3, 16, 16, 5).images[0]};
  const double before = evaluate(m, start, data, rng).loss;
  TrainingHyper hyper;
  hyper.adam.learning_rate = 2e-3;
  const auto trained = local_train(m, start, data, 200, hyper, rng);
  const double after = evaluate(m, trained.params, data, rng).loss;
  EXPECT_LT(after, 0.01 * before) << before << " -> " << after;
}

}  // namespace
}  // namespace fedsem
