#pragma once

#include <string>
#include <vector>

#include "fedsem/gradcheck.hpp"
#include "fedsem/semcom.hpp"

namespace fedsem {

struct NamedReport {
  std::string name;
  GradCheckReport report;
};

/// Finite-difference check of the whole pipeline with the channel pinned to
/// h = 1 and no noise, under the mixed reconstruction loss. The L1 sign
/// pattern counts as a kink alongside ReLU inputs.
GradCheckReport pipeline_gradient_check(const SemComConfig& cfg, double tolerance, double h = 2e-4,
                                        std::uint64_t seed = 11);

/// One small network per layer kind plus the desk-scale pipeline. The
/// pipeline uses a larger step: its bottleneck gradients are tiny next to the
/// skip paths and roundoff swamps a 1e-5 difference.
std::vector<NamedReport> run_gradcheck_suite(double tolerance = 1e-6, double h = 1e-5);

}  // namespace fedsem
