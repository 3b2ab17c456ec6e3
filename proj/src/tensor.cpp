#include "fedsem/tensor.hpp"

namespace fedsem {

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2)) {
    throw ConfigError("cannot concatenate " + shape_string(a.shape()) + " with " +
                      shape_string(b.shape()) + " along channels");
  }
  Tensor out({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
  out.data().head(a.size()) = a.data();
  out.data().tail(b.size()) = b.data();
  return out;
}

std::pair<Tensor, Tensor> split_channels(const Tensor& t, Index channels_a) {
  if (t.rank() != 3 || channels_a <= 0 || channels_a >= t.dim(0)) {
    throw UsageError("cannot split " + shape_string(t.shape()) + " at channel " +
                     std::to_string(channels_a));
  }
  const Index plane = t.dim(1) * t.dim(2);
  Tensor a({channels_a, t.dim(1), t.dim(2)}, t.data().head(channels_a * plane));
  Tensor b({t.dim(0) - channels_a, t.dim(1), t.dim(2)}, t.data().tail(t.size() - channels_a * plane));
  return {std::move(a), std::move(b)};
}

ParamList zeros_like(const ParamList& params) {
  ParamList out;
  out.reserve(params.size());
  for (const auto& p : params) out.emplace_back(p.shape());
  return out;
}

bool same_shapes(const ParamList& a, const ParamList& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].shape() != b[i].shape()) return false;
  }
  return true;
}

void axpy(double alpha, const ParamList& x, ParamList& y) {
  if (!same_shapes(x, y)) throw UsageError("axpy: parameter lists differ in shape");
  for (std::size_t i = 0; i < x.size(); ++i) y[i].data() += alpha * x[i].data();
}

void scale(ParamList& params, double alpha) {
  for (auto& p : params) p.data() *= alpha;
}

double squared_norm(const ParamList& params) {
  double s = 0.0;
  for (const auto& p : params) s += p.data().squaredNorm();
  return s;
}

Index total_size(const ParamList& params) {
  Index n = 0;
  for (const auto& p : params) n += p.size();
  return n;
}

bool all_finite(const ParamList& params) {
  for (const auto& p : params) {
    if (!p.all_finite()) return false;
  }
  return true;
}

Eigen::VectorXd flatten(const ParamList& params) {
  Eigen::VectorXd out(total_size(params));
  Index at = 0;
  for (const auto& p : params) {
    out.segment(at, p.size()) = p.data();
    at += p.size();
  }
  return out;
}

}  // namespace fedsem
