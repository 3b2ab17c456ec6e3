#include "fedsem/metrics.hpp"

#include <string>

namespace fedsem {

double mse(std::span<const Tensor> x, std::span<const Tensor> y) {
  if (x.size() != y.size() || x.empty()) throw ConfigError("mse: batches differ in length or are empty");
  double sum = 0.0;
  Index count = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].shape() != y[i].shape()) throw ConfigError("mse: image " + std::to_string(i) + " shapes differ");
    sum += (x[i].data() - y[i].data()).squaredNorm();
    count += x[i].size();
  }
  return sum / static_cast<double>(count);
}

double psnr(double mse_value) {
  if (!(mse_value >= 0.0)) throw UsageError("psnr needs a nonnegative MSE");
  if (mse_value == 0.0) return kPsnrCap;
  return 10.0 * std::log10(1.0 / mse_value);
}

FairnessGini participation_and_effort_gini(std::span<const double> participation,
                                           std::span<const double> cumulative_steps) {
  return {gini(participation), gini(cumulative_steps)};
}

double efficiency(double psnr_db, double cumulative_steps) {
  if (!(cumulative_steps > 0.0)) throw UsageError("efficiency needs a positive step count");
  return psnr_db / (cumulative_steps / 1000.0);
}

}  // namespace fedsem
