#include "fedsem/optim.hpp"

#include <cmath>
#include <string>

namespace fedsem {

double clip_gradients(ParamList& grads, double tau) {
  if (!(tau > 0.0)) throw ConfigError("clipping threshold must be > 0, got " + std::to_string(tau));
  const double norm = std::sqrt(squared_norm(grads));
  if (norm > tau) scale(grads, tau / norm);
  return norm;
}

void adam_step(OptimizerState& state, ParamList& params, const ParamList& grads) {
  if (!same_shapes(params, grads) || !same_shapes(params, state.first_moment) ||
      !same_shapes(params, state.second_moment)) {
    throw UsageError("adam_step: parameter, gradient and moment shapes disagree");
  }
  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto theta = params[i].data().array();
    const Eigen::ArrayXd g = grads[i].data().array() + 2.0 * c.weight_decay * theta;
    auto m = state.first_moment[i].data().array();
    auto v = state.second_moment[i].data().array();
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.square();
    theta -= c.learning_rate * (m / bias1) / ((v / bias2).sqrt() + c.epsilon);
  }
}

}  // namespace fedsem
