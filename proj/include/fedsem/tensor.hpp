#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fedsem/errors.hpp"

namespace fedsem {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1},
                         [](Index a, Index b) { return a * b; });
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

/// Dense row-major n-dimensional array backed by an Eigen column vector.
///
/// Images and feature maps use channel-major (C, H, W) layout. The flat
/// storage is exposed directly so that arithmetic can be written as Eigen
/// expressions on `data()`.
template <typename Scalar>
class BasicTensor {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using MatrixMap = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstMatrixMap =
      Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape) : shape_(std::move(shape)) {
    check_dims(shape_);
    data_ = Vector::Zero(shape_size(shape_));
  }

  BasicTensor(std::initializer_list<Index> shape) : BasicTensor(Shape(shape)) {}

  BasicTensor(Shape shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_dims(shape_);
    if (shape_size(shape_) != data_.size()) {
      throw ConfigError("tensor shape " + shape_string(shape_) + " does not match " +
                        std::to_string(data_.size()) + " values");
    }
  }

  static BasicTensor from_values(std::initializer_list<Scalar> values) {
    Vector v(static_cast<Index>(values.size()));
    Index i = 0;
    for (Scalar x : values) v[i++] = x;
    return BasicTensor({static_cast<Index>(values.size())}, std::move(v));
  }

  const Shape& shape() const noexcept { return shape_; }
  Index rank() const noexcept { return static_cast<Index>(shape_.size()); }
  Index dim(Index i) const { return shape_.at(static_cast<std::size_t>(i)); }
  Index size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return shape_.empty(); }

  Vector& data() noexcept { return data_; }
  const Vector& data() const noexcept { return data_; }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  /// View the storage as a rows x cols row-major matrix.
  MatrixMap matrix(Index rows, Index cols) {
    check_view(rows, cols);
    return MatrixMap(data_.data(), rows, cols);
  }
  ConstMatrixMap matrix(Index rows, Index cols) const {
    check_view(rows, cols);
    return ConstMatrixMap(data_.data(), rows, cols);
  }

  /// Same values under a different shape of equal element count.
  BasicTensor reshaped(Shape shape) const& { return BasicTensor(std::move(shape), data_); }
  BasicTensor reshaped(Shape shape) && { return BasicTensor(std::move(shape), std::move(data_)); }

  bool all_finite() const { return data_.allFinite(); }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static void check_dims(const Shape& shape) {
    for (Index d : shape) {
      if (d <= 0) throw ConfigError("tensor dimensions must be positive, got " + shape_string(shape));
    }
  }

  void check_view(Index rows, Index cols) const {
    if (rows * cols != data_.size()) {
      throw UsageError("cannot view " + shape_string(shape_) + " as " + std::to_string(rows) + "x" +
                       std::to_string(cols));
    }
  }

  Shape shape_;
  Vector data_;
};

using Tensor = BasicTensor<double>;

/// Ordered parameter (or gradient) list; layers index into it by offset.
using ParamList = std::vector<Tensor>;

/// Channel-wise concatenation of two (C, H, W) tensors with equal spatial size.
Tensor concat_channels(const Tensor& a, const Tensor& b);

/// Inverse of concat_channels: splits the first `channels_a` channels off.
std::pair<Tensor, Tensor> split_channels(const Tensor& t, Index channels_a);

// Free functions over parameter lists. All require identical shapes.
ParamList zeros_like(const ParamList& params);
void axpy(double alpha, const ParamList& x, ParamList& y);  // y += alpha * x
void scale(ParamList& params, double alpha);
double squared_norm(const ParamList& params);
Index total_size(const ParamList& params);
bool same_shapes(const ParamList& a, const ParamList& b);
bool all_finite(const ParamList& params);
Eigen::VectorXd flatten(const ParamList& params);

}  // namespace fedsem
