#include "fedsem/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace fedsem {

GradCheckReport check_gradients(const ParamList& params, const ParamList& analytic,
                                const ProbeFn& probe, double h, const std::string& label) {
  if (!same_shapes(params, analytic)) throw UsageError("check_gradients: gradient shapes differ");
  GradCheckReport report;
  const std::vector<std::uint8_t> base = probe(params).relu_pattern;
  ParamList work = params;
  for (std::size_t t = 0; t < work.size(); ++t) {
    double max_diff = 0.0;
    double max_mag = 0.0;
    for (Index i = 0; i < work[t].size(); ++i) {
      const double original = work[t][i];
      work[t][i] = original + h;
      const Probe plus = probe(work);
      work[t][i] = original - h;
      const Probe minus = probe(work);
      work[t][i] = original;
      if (plus.relu_pattern != base || minus.relu_pattern != base) {
        ++report.excluded;
        continue;
      }
      const double numeric = (plus.loss - minus.loss) / (2.0 * h);
      const double a = analytic[t][i];
      max_diff = std::max(max_diff, std::abs(a - numeric));
      max_mag = std::max({max_mag, std::abs(a), std::abs(numeric)});
      ++report.checked;
    }
    const double err = max_mag > 0.0 ? max_diff / max_mag : max_diff;
    if (err >= report.max_relative_error) {
      report.max_relative_error = err;
      report.worst_tensor = label + "[" + std::to_string(t) + "]";
    }
  }
  return report;
}

void merge_reports(GradCheckReport& into, const GradCheckReport& other) {
  if (other.max_relative_error >= into.max_relative_error) {
    into.max_relative_error = other.max_relative_error;
    into.worst_tensor = other.worst_tensor;
  }
  into.checked += other.checked;
  into.excluded += other.excluded;
}

GradCheckReport finite_diff_check(const Sequential& net, const ParamList& params, const Tensor& input,
                                  double tolerance, double h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  Tensor weights(net.output_shape());
  for (Index i = 0; i < weights.size(); ++i) weights[i] = uniform(rng);

  auto probe_with = [&](const ParamList& p, const Tensor& x) {
    const auto fwd = net.forward(p, x, true);
    Probe out;
    out.loss = fwd.output.data().dot(weights.data());
    net.relu_pattern(fwd.tape, out.relu_pattern);
    return out;
  };

  const auto fwd = net.forward(params, input, true);
  const auto grads = net.backward(params, fwd.tape, weights);

  GradCheckReport report = check_gradients(
      params, grads.param_grads, [&](const ParamList& p) { return probe_with(p, input); }, h);
  const ParamList input_list{input};
  const ParamList input_grad{grads.input_grad.reshaped(input.shape())};
  merge_reports(report, check_gradients(
                            input_list, input_grad,
                            [&](const ParamList& x) { return probe_with(params, x[0]); }, h, "input"));
  report.tolerance = tolerance;
  return report;
}

}  // namespace fedsem
