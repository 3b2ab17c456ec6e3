#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fedsem/layers.hpp"

namespace fedsem {

/// Outcome of comparing analytic gradients with central differences.
///
/// The error for one tensor is max|analytic - numeric| / max(|analytic|, |numeric|)
/// taken over its entries (infinity-norm relative error); the report keeps
/// the worst tensor. Entries whose perturbation flips any ReLU input across
/// zero are excluded and counted in `excluded`.
struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  Index checked = 0;
  Index excluded = 0;
  double tolerance = 0.0;

  bool passed() const { return max_relative_error < tolerance; }
};

/// Loss value plus the ReLU sign pattern it was computed under.
struct Probe {
  double loss = 0.0;
  std::vector<std::uint8_t> relu_pattern;
};

using ProbeFn = std::function<Probe(const ParamList&)>;

/// Perturbs every entry of `params` by +-h and compares against `analytic`.
/// `label` prefixes the tensor names in the report.
GradCheckReport check_gradients(const ParamList& params, const ParamList& analytic,
                                const ProbeFn& probe, double h, const std::string& label = "param");

/// Merges `other` into `into`, keeping the worse error.
void merge_reports(GradCheckReport& into, const GradCheckReport& other);

/// Checks parameter and input gradients of a network under the scalar loss
/// sum_i r_i * y_i with fixed pseudo-random weights r.
GradCheckReport finite_diff_check(const Sequential& net, const ParamList& params, const Tensor& input,
                                  double tolerance, double h = 1e-5, std::uint64_t seed = 7);

}  // namespace fedsem
