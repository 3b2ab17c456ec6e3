#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "fedsem/tensor.hpp"

namespace fedsem {

/// Mean squared error between two equally sized arrays.
template <typename DerivedA, typename DerivedB>
double mse(const Eigen::DenseBase<DerivedA>& x, const Eigen::DenseBase<DerivedB>& y) {
  if (x.size() != y.size()) throw ConfigError("mse: sizes differ");
  if (x.size() == 0) throw UsageError("mse of empty arrays");
  return (x.derived().template cast<double>().array() - y.derived().template cast<double>().array())
             .square()
             .sum() /
         static_cast<double>(x.size());
}

/// Per-element MSE over a batch of images, i.e. divided by N*C*H*W.
double mse(std::span<const Tensor> x, std::span<const Tensor> y);

inline constexpr double kPsnrCap = 100.0;

/// 10 * log10(1 / mse) for unit-range pixels; mse == 0 maps to kPsnrCap.
double psnr(double mse_value);

/// Gini coefficient over nonnegative values, ascending sort with 1-based
/// ranks. All-zero input has coefficient 0.
template <typename Derived>
double gini(const Eigen::DenseBase<Derived>& values) {
  const Index k = values.size();
  if (k < 1) throw UsageError("gini of an empty set");
  std::vector<double> sorted(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) {
    sorted[static_cast<std::size_t>(i)] = static_cast<double>(values.derived().coeff(i));
    if (!(sorted[static_cast<std::size_t>(i)] >= 0.0)) throw UsageError("gini needs nonnegative values");
  }
  std::sort(sorted.begin(), sorted.end());
  // sum_i (2i - k - 1) x_i / (k sum x): same value as 2 sum i x_i / (k sum x) - (k+1)/k
  // without the cancellation.
  double weighted = 0.0;
  double total = 0.0;
  const double kd = static_cast<double>(k);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    weighted += (2.0 * static_cast<double>(i + 1) - kd - 1.0) * sorted[i];
    total += sorted[i];
  }
  if (total == 0.0) return 0.0;
  return weighted / (kd * total);
}

inline double gini(std::span<const double> values) {
  return gini(Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Index>(values.size())));
}

struct FairnessGini {
  double participation = 0.0;
  double effort = 0.0;
};

/// Gini over participation counts n_k and over cumulative |D_k| * E_k.
FairnessGini participation_and_effort_gini(std::span<const double> participation,
                                           std::span<const double> cumulative_steps);

/// PSNR per 1000 training steps (one step = one sample processed in one epoch).
double efficiency(double psnr_db, double cumulative_steps);

}  // namespace fedsem
