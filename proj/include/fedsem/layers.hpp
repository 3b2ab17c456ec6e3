#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fedsem/tensor.hpp"

namespace fedsem {

enum class LayerKind { dense, conv2d, conv_transpose2d, relu, sigmoid };

std::string to_string(LayerKind kind);

/// Static description of one layer. `in`/`out` are widths for dense layers
/// and channel counts for the convolution kinds; activations ignore them.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  Index in = 0;
  Index out = 0;
  Index kernel = 0;
  Index stride = 1;
  Index padding = 0;

  static LayerSpec dense(Index in, Index out) { return {LayerKind::dense, in, out, 0, 1, 0}; }
  static LayerSpec conv2d(Index in, Index out, Index kernel = 3, Index stride = 2, Index padding = 1) {
    return {LayerKind::conv2d, in, out, kernel, stride, padding};
  }
  static LayerSpec conv_transpose2d(Index in, Index out, Index kernel = 4, Index stride = 2,
                                    Index padding = 1) {
    return {LayerKind::conv_transpose2d, in, out, kernel, stride, padding};
  }
  static LayerSpec relu() { return {LayerKind::relu, 0, 0, 0, 1, 0}; }
  static LayerSpec sigmoid() { return {LayerKind::sigmoid, 0, 0, 0, 1, 0}; }

  bool has_params() const {
    return kind == LayerKind::dense || kind == LayerKind::conv2d ||
           kind == LayerKind::conv_transpose2d;
  }
};

/// Weight and bias shapes of a parameterized layer (empty for activations).
std::vector<Shape> param_shapes(const LayerSpec& spec);

/// Output shape of one layer, or ConfigError naming `layer_index`.
Shape output_shape(const LayerSpec& spec, const Shape& input, std::size_t layer_index);

/// Shapes of every activation along the chain: result[0] is the input,
/// result[i + 1] the output of layer i. Throws before any arithmetic happens.
std::vector<Shape> infer_shapes(std::span<const LayerSpec> layers, const Shape& input);

/// Intermediate values recorded by a forward pass. `values[i]` is the input to
/// layer i; the last entry is the network output.
struct Tape {
  std::vector<Tensor> values;
  bool recorded() const { return !values.empty(); }
};

struct ForwardResult {
  Tensor output;
  Tape tape;
};

struct BackwardResult {
  ParamList param_grads;
  Tensor input_grad;
};

/// A chain of layers with a fixed input shape. Parameters are held outside,
/// so the same network can evaluate any compatible parameter list.
class Sequential {
 public:
  Sequential() = default;
  Sequential(std::vector<LayerSpec> layers, Shape input_shape);

  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  const Shape& input_shape() const noexcept { return shapes_.front(); }
  const Shape& output_shape() const noexcept { return shapes_.back(); }
  const std::vector<Shape>& activation_shapes() const noexcept { return shapes_; }

  /// Number of tensors this network consumes from a parameter list.
  std::size_t param_count() const noexcept { return param_count_; }

  /// Glorot-uniform weights, zero biases, drawn in layer order from `rng`.
  ParamList init_params(std::mt19937_64& rng) const;
  ParamList zero_params() const;
  void check_params(std::span<const Tensor> params) const;

  ForwardResult forward(std::span<const Tensor> params, const Tensor& input,
                        bool record_tape) const;
  BackwardResult backward(std::span<const Tensor> params, const Tape& tape,
                          const Tensor& output_grad) const;

  /// ReLU on/off pattern of a recorded tape; used to detect kink crossings.
  void relu_pattern(const Tape& tape, std::vector<std::uint8_t>& out) const;

 private:
  std::vector<LayerSpec> layers_;
  std::vector<Shape> shapes_;
  std::vector<std::size_t> param_offset_;
  std::size_t param_count_ = 0;
};

}  // namespace fedsem
