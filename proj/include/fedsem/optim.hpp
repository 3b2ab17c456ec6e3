#pragma once

#include <cstdint>

#include "fedsem/tensor.hpp"

namespace fedsem {

struct AdamConfig {
  double learning_rate = 3e-4;
  double weight_decay = 1e-4;  // coefficient of the mu * ||theta||^2 penalty
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam moments for one parameter list.
struct OptimizerState {
  AdamConfig config;
  ParamList first_moment;
  ParamList second_moment;
  std::int64_t step = 0;

  OptimizerState() = default;
  OptimizerState(AdamConfig cfg, const ParamList& params)
      : config(cfg), first_moment(zeros_like(params)), second_moment(zeros_like(params)) {}
};

/// Rescales `grads` in place so that their global L2 norm is at most `tau`.
/// Returns the norm before clipping. Throws ConfigError for tau <= 0.
double clip_gradients(ParamList& grads, double tau);

/// One Adam update. The L2 penalty enters as 2 * mu * theta added to the
/// gradient before the moment updates (coupled weight decay).
void adam_step(OptimizerState& state, ParamList& params, const ParamList& grads);

}  // namespace fedsem
