#include "fedsem/gradcheck_suite.hpp"

#include <random>

namespace fedsem {
namespace {

Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(shape);
  for (Index i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

// Biases start at zero after init; perturb them so the check covers a generic point.
ParamList random_params(const Sequential& net, std::mt19937_64& rng) {
  ParamList p = net.init_params(rng);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (auto& t : p) {
    if (t.rank() == 1) {
      for (Index i = 0; i < t.size(); ++i) t[i] = u(rng);
    }
  }
  return p;
}

NamedReport check_network(const std::string& name, std::vector<LayerSpec> layers, Shape input, double tol, double h,
                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Sequential net(std::move(layers), input);
  const ParamList params = random_params(net, rng);
  const Tensor x = random_tensor(net.input_shape(), rng);
  return {name, finite_diff_check(net, params, x, tol, h, seed + 1)};
}

}  // namespace

GradCheckReport pipeline_gradient_check(const SemComConfig& base, double tolerance, double h, std::uint64_t seed) {
  SemComConfig cfg = base;
  cfg.noise_enabled = false;
  cfg.fading_enabled = false;
  const SemComModel model(cfg);
  std::mt19937_64 rng(seed);
  ModelParams params = model.init_params(rng);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  for (auto& t : params.tensors) {
    if (t.rank() == 1) {
      for (Index i = 0; i < t.size(); ++i) t[i] = u(rng);
    }
  }
  const Tensor image = random_tensor({cfg.channels, cfg.height, cfg.width}, rng, 0.0, 1.0);
  const ChannelDraw draw = ChannelDraw::identity(cfg.channel_dim / 2);
  const double alpha = cfg.loss_alpha;

  const auto fwd = model.forward(params, image, draw, true);
  const ModelParams grads =
      model.backward(params, fwd.tape, reconstruction_loss_grad(image, fwd.image, alpha));

  auto probe = [&](const ParamList& tensors) {
    ModelParams p{tensors, params.offsets};
    const auto r = model.forward(p, image, draw, true);
    Probe out;
    out.loss = reconstruction_loss(image, r.image, alpha);
    out.relu_pattern = model.relu_pattern(r.tape);
    for (Index i = 0; i < image.size(); ++i) out.relu_pattern.push_back(r.image[i] > image[i] ? 1 : 0);
    return out;
  };
  GradCheckReport report = check_gradients(params.tensors, grads.tensors, probe, h, "pipeline");
  report.tolerance = tolerance;
  return report;
}

std::vector<NamedReport> run_gradcheck_suite(double tol, double h) {
  std::vector<NamedReport> out;
  out.push_back(check_network("dense", {LayerSpec::dense(5, 4)}, {5}, tol, h, 101));
  out.push_back(check_network("conv2d", {LayerSpec::conv2d(2, 3)}, {2, 6, 6}, tol, h, 102));
  out.push_back(check_network("conv_transpose2d", {LayerSpec::conv_transpose2d(3, 2)}, {3, 3, 3}, tol, h, 103));
  out.push_back(check_network("relu", {LayerSpec::dense(6, 8), LayerSpec::relu(), LayerSpec::dense(8, 3)}, {6}, tol,
                              h, 104));
  out.push_back(check_network("sigmoid", {LayerSpec::dense(6, 5), LayerSpec::sigmoid()}, {6}, tol, h, 105));
  out.push_back(check_network("conv_stack",
                              {LayerSpec::conv2d(3, 4), LayerSpec::relu(), LayerSpec::conv_transpose2d(4, 3),
                               LayerSpec::sigmoid()},
                              {3, 8, 8}, tol, h, 106));
  out.push_back({"semcom_pipeline", pipeline_gradient_check(SemComConfig::desk_scale(), tol)});
  return out;
}

}  // namespace fedsem
