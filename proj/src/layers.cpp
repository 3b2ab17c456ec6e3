#include "fedsem/layers.hpp"

#include <cmath>

namespace fedsem {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ConvGeometry {
  Index channels, height, width;  // image side
  Index kernel, stride, padding;
  Index out_h, out_w;             // column grid
};

// Unfolds an image into a (channels*k*k) x (out_h*out_w) patch matrix.
RowMatrix im2col(const double* image, const ConvGeometry& g) {
  const Index k = g.kernel;
  RowMatrix cols = RowMatrix::Zero(g.channels * k * k, g.out_h * g.out_w);
  for (Index c = 0; c < g.channels; ++c) {
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        const Index row = (c * k + ky) * k + kx;
        for (Index oy = 0; oy < g.out_h; ++oy) {
          const Index iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= g.height) continue;
          for (Index ox = 0; ox < g.out_w; ++ox) {
            const Index ix = ox * g.stride - g.padding + kx;
            if (ix < 0 || ix >= g.width) continue;
            cols(row, oy * g.out_w + ox) = image[(c * g.height + iy) * g.width + ix];
          }
        }
      }
    }
  }
  return cols;
}

// Adjoint of im2col: scatters patch columns back onto the image, summing overlaps.
void col2im(const RowMatrix& cols, const ConvGeometry& g, double* image) {
  const Index k = g.kernel;
  for (Index c = 0; c < g.channels; ++c) {
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        const Index row = (c * k + ky) * k + kx;
        for (Index oy = 0; oy < g.out_h; ++oy) {
          const Index iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= g.height) continue;
          for (Index ox = 0; ox < g.out_w; ++ox) {
            const Index ix = ox * g.stride - g.padding + kx;
            if (ix < 0 || ix >= g.width) continue;
            image[(c * g.height + iy) * g.width + ix] += cols(row, oy * g.out_w + ox);
          }
        }
      }
    }
  }
}

ConvGeometry conv_geometry(const LayerSpec& s, const Shape& in, const Shape& out) {
  return {in[0], in[1], in[2], s.kernel, s.stride, s.padding, out[1], out[2]};
}

// Transposed convolution is the adjoint of a convolution whose image is the
// output and whose column grid is the input.
ConvGeometry transpose_geometry(const LayerSpec& s, const Shape& in, const Shape& out) {
  return {out[0], out[1], out[2], s.kernel, s.stride, s.padding, in[1], in[2]};
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::string layer_error(std::size_t index, const LayerSpec& s, const std::string& msg) {
  return "layer " + std::to_string(index) + " (" + to_string(s.kind) + "): " + msg;
}

}  // namespace

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::conv_transpose2d: return "conv_transpose2d";
    case LayerKind::relu: return "relu";
    case LayerKind::sigmoid: return "sigmoid";
  }
  return "unknown";
}

std::vector<Shape> param_shapes(const LayerSpec& s) {
  switch (s.kind) {
    case LayerKind::dense: return {{s.out, s.in}, {s.out}};
    case LayerKind::conv2d: return {{s.out, s.in, s.kernel, s.kernel}, {s.out}};
    case LayerKind::conv_transpose2d: return {{s.in, s.out, s.kernel, s.kernel}, {s.out}};
    default: return {};
  }
}

Shape output_shape(const LayerSpec& s, const Shape& input, std::size_t index) {
  switch (s.kind) {
    case LayerKind::relu:
    case LayerKind::sigmoid:
      return input;
    case LayerKind::dense:
      if (s.in < 1 || s.out < 1) throw ConfigError(layer_error(index, s, "widths must be >= 1"));
      if (shape_size(input) != s.in) {
        throw ConfigError(layer_error(index, s, "expects " + std::to_string(s.in) +
                                                    " inputs, got " + shape_string(input)));
      }
      return {s.out};
    case LayerKind::conv2d:
    case LayerKind::conv_transpose2d: {
      if (s.kernel < 1 || s.stride < 1 || s.padding < 0 || s.in < 1 || s.out < 1) {
        throw ConfigError(layer_error(index, s, "needs kernel >= 1, stride >= 1, padding >= 0"));
      }
      if (input.size() != 3 || input[0] != s.in) {
        throw ConfigError(layer_error(index, s, "expects " + std::to_string(s.in) +
                                                    " input channels, got " + shape_string(input)));
      }
      Index h, w;
      if (s.kind == LayerKind::conv2d) {
        h = (input[1] + 2 * s.padding - s.kernel) / s.stride + 1;
        w = (input[2] + 2 * s.padding - s.kernel) / s.stride + 1;
        if (input[1] + 2 * s.padding < s.kernel || input[2] + 2 * s.padding < s.kernel) h = w = 0;
      } else {
        h = (input[1] - 1) * s.stride - 2 * s.padding + s.kernel;
        w = (input[2] - 1) * s.stride - 2 * s.padding + s.kernel;
      }
      if (h < 1 || w < 1) {
        throw ConfigError(layer_error(index, s, "empty output for input " + shape_string(input)));
      }
      return {s.out, h, w};
    }
  }
  throw ConfigError(layer_error(index, s, "unknown layer kind"));
}

std::vector<Shape> infer_shapes(std::span<const LayerSpec> layers, const Shape& input) {
  if (input.empty()) throw ConfigError("network input shape is empty");
  std::vector<Shape> shapes{input};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    shapes.push_back(output_shape(layers[i], shapes.back(), i));
  }
  return shapes;
}

Sequential::Sequential(std::vector<LayerSpec> layers, Shape input_shape)
    : layers_(std::move(layers)), shapes_(infer_shapes(layers_, input_shape)) {
  for (const auto& l : layers_) {
    param_offset_.push_back(param_count_);
    param_count_ += param_shapes(l).size();
  }
}

ParamList Sequential::zero_params() const {
  ParamList params;
  for (const auto& l : layers_) {
    for (auto& s : param_shapes(l)) params.emplace_back(std::move(s));
  }
  return params;
}

ParamList Sequential::init_params(std::mt19937_64& rng) const {
  ParamList params = zero_params();
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (!l.has_params()) continue;
    const Index area = l.kind == LayerKind::dense ? 1 : l.kernel * l.kernel;
    const double limit = std::sqrt(6.0 / static_cast<double>((l.in + l.out) * area));
    std::uniform_real_distribution<double> uniform(-limit, limit);
    auto& w = params[param_offset_[i]];
    for (Index j = 0; j < w.size(); ++j) w[j] = uniform(rng);
  }
  return params;
}

void Sequential::check_params(std::span<const Tensor> params) const {
  if (params.size() != param_count_) {
    throw ConfigError("network expects " + std::to_string(param_count_) + " parameter tensors, got " +
                      std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto shapes = param_shapes(layers_[i]);
    for (std::size_t j = 0; j < shapes.size(); ++j) {
      if (params[param_offset_[i] + j].shape() != shapes[j]) {
        throw ConfigError(layer_error(i, layers_[i], "parameter " + std::to_string(j) + " has shape " +
                                                         shape_string(params[param_offset_[i] + j].shape()) +
                                                         ", expected " + shape_string(shapes[j])));
      }
    }
  }
}

ForwardResult Sequential::forward(std::span<const Tensor> params, const Tensor& input,
                                  bool record_tape) const {
  check_params(params);
  if (input.shape() != shapes_.front() &&
      !(layers_.size() > 0 && layers_[0].kind == LayerKind::dense && input.size() == layers_[0].in)) {
    throw ConfigError("layer 0 (" + (layers_.empty() ? std::string("none") : to_string(layers_[0].kind)) +
                      "): input shape " + shape_string(input.shape()) + " does not match " +
                      shape_string(shapes_.front()));
  }
  ForwardResult result;
  if (record_tape) result.tape.values.reserve(layers_.size() + 1);
  Tensor x = input.reshaped(shapes_.front());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& l = layers_[i];
    const Shape& out_shape = shapes_[i + 1];
    Tensor y(out_shape);
    switch (l.kind) {
      case LayerKind::dense: {
        const auto& w = params[param_offset_[i]];
        const auto& b = params[param_offset_[i] + 1];
        y.data().noalias() = w.matrix(l.out, l.in) * x.data();
        y.data() += b.data();
        break;
      }
      case LayerKind::conv2d: {
        const auto g = conv_geometry(l, shapes_[i], out_shape);
        const auto& w = params[param_offset_[i]];
        const auto& b = params[param_offset_[i] + 1];
        const RowMatrix cols = im2col(x.data().data(), g);
        auto ym = y.matrix(l.out, g.out_h * g.out_w);
        ym.noalias() = w.matrix(l.out, l.in * l.kernel * l.kernel) * cols;
        ym.colwise() += b.data();
        break;
      }
      case LayerKind::conv_transpose2d: {
        const auto g = transpose_geometry(l, shapes_[i], out_shape);
        const auto& w = params[param_offset_[i]];
        const auto& b = params[param_offset_[i] + 1];
        const RowMatrix cols = w.matrix(l.in, l.out * l.kernel * l.kernel).transpose() *
                               x.matrix(l.in, g.out_h * g.out_w);
        col2im(cols, g, y.data().data());
        y.matrix(l.out, g.height * g.width).colwise() += b.data();
        break;
      }
      case LayerKind::relu:
        y.data() = x.data().cwiseMax(0.0);
        break;
      case LayerKind::sigmoid:
        y.data() = x.data().unaryExpr([](double v) { return sigmoid(v); });
        break;
    }
    if (record_tape) result.tape.values.push_back(std::move(x));
    x = std::move(y);
  }
  if (record_tape) result.tape.values.push_back(x);
  result.output = std::move(x);
  return result;
}

BackwardResult Sequential::backward(std::span<const Tensor> params, const Tape& tape,
                                    const Tensor& output_grad) const {
  if (!tape.recorded()) throw UsageError("backward called without a recorded tape");
  if (tape.values.size() != layers_.size() + 1) throw UsageError("tape does not belong to this network");
  if (output_grad.size() != shape_size(shapes_.back())) {
    throw UsageError("output gradient " + shape_string(output_grad.shape()) + " does not match " +
                     shape_string(shapes_.back()));
  }
  check_params(params);
  BackwardResult result;
  result.param_grads = zero_params();
  Tensor grad = output_grad.reshaped(shapes_.back());
  for (std::size_t idx = layers_.size(); idx-- > 0;) {
    const LayerSpec& l = layers_[idx];
    const Tensor& x = tape.values[idx];
    Tensor dx(shapes_[idx]);
    switch (l.kind) {
      case LayerKind::dense: {
        const auto& w = params[param_offset_[idx]];
        auto& dw = result.param_grads[param_offset_[idx]];
        auto& db = result.param_grads[param_offset_[idx] + 1];
        dw.matrix(l.out, l.in).noalias() = grad.data() * x.data().transpose();
        db.data() = grad.data();
        dx.data().noalias() = w.matrix(l.out, l.in).transpose() * grad.data();
        break;
      }
      case LayerKind::conv2d: {
        const auto g = conv_geometry(l, shapes_[idx], shapes_[idx + 1]);
        const Index patch = l.in * l.kernel * l.kernel;
        const auto& w = params[param_offset_[idx]];
        auto& dw = result.param_grads[param_offset_[idx]];
        auto& db = result.param_grads[param_offset_[idx] + 1];
        const RowMatrix cols = im2col(x.data().data(), g);
        const auto gm = grad.matrix(l.out, g.out_h * g.out_w);
        dw.matrix(l.out, patch).noalias() = gm * cols.transpose();
        db.data() = gm.rowwise().sum();
        const RowMatrix dcols = w.matrix(l.out, patch).transpose() * gm;
        col2im(dcols, g, dx.data().data());
        break;
      }
      case LayerKind::conv_transpose2d: {
        const auto g = transpose_geometry(l, shapes_[idx], shapes_[idx + 1]);
        const Index patch = l.out * l.kernel * l.kernel;
        const auto& w = params[param_offset_[idx]];
        auto& dw = result.param_grads[param_offset_[idx]];
        auto& db = result.param_grads[param_offset_[idx] + 1];
        const RowMatrix dcols = im2col(grad.data().data(), g);
        const auto xm = x.matrix(l.in, g.out_h * g.out_w);
        dw.matrix(l.in, patch).noalias() = xm * dcols.transpose();
        db.data() = grad.matrix(l.out, g.height * g.width).rowwise().sum();
        dx.matrix(l.in, g.out_h * g.out_w).noalias() = w.matrix(l.in, patch) * dcols;
        break;
      }
      case LayerKind::relu:
        // Subgradient at exactly zero is zero.
        dx.data() = (x.data().array() > 0.0).select(grad.data(), 0.0);
        break;
      case LayerKind::sigmoid: {
        const auto& y = tape.values[idx + 1].data().array();
        dx.data() = grad.data().array() * y * (1.0 - y);
        break;
      }
    }
    grad = std::move(dx);
  }
  result.input_grad = std::move(grad);
  return result;
}

void Sequential::relu_pattern(const Tape& tape, std::vector<std::uint8_t>& out) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].kind != LayerKind::relu) continue;
    const auto& v = tape.values[i].data();
    for (Index j = 0; j < v.size(); ++j) out.push_back(v[j] > 0.0 ? 1 : 0);
  }
}

}  // namespace fedsem
