#pragma once

#include <Eigen/Core>

#include <array>
#include <random>
#include <span>
#include <vector>

#include "fedsem/layers.hpp"

namespace fedsem {

struct SemComConfig {
  Index channels = 3;
  Index height = 16;
  Index width = 16;
  /// Output channels of the stride-2 encoder convolutions; the first two
  /// feature maps double as skip connections.
  std::vector<Index> encoder_channels{8, 16, 32};
  Index semantic_dim = 64;
  Index channel_dim = 8;
  double snr_db = 10.0;
  double loss_alpha = 0.8;
  double zf_epsilon = 1e-8;
  bool noise_enabled = true;
  bool fading_enabled = true;
  bool normalize_power = false;

  double compression_ratio() const {
    return static_cast<double>(semantic_dim) / static_cast<double>(channel_dim);
  }
  Index image_size() const { return channels * height * width; }

  /// Throws ConfigError when d_c < d_s < C*H*W or d_c even is violated.
  void validate() const;

  static SemComConfig desk_scale();
  static SemComConfig paper_scale();
};

/// sigma^2 = 10^(-gamma/10).
double noise_variance(double snr_db);

/// One realization of the fading channel for d_c/2 complex symbols.
struct ChannelDraw {
  Eigen::VectorXcd fading;
  Eigen::VectorXcd noise;

  static ChannelDraw identity(Index symbols);
};

/// Rayleigh fading h ~ CN(0,1) and noise n ~ CN(0, sigma^2) per complex symbol.
/// Disabled components become h = 1 and n = 0; the RNG is consumed either way
/// only for enabled components.
ChannelDraw draw_channel(const SemComConfig& cfg, std::mt19937_64& rng);

/// y = h * x + n, pairing adjacent reals (x[2i], x[2i+1]) into one complex symbol.
Eigen::VectorXd apply_channel(const Eigen::VectorXd& x, const ChannelDraw& draw);

/// x_hat = y / (h + eps), with eps added to the real part of h.
Eigen::VectorXd zf_equalize(const Eigen::VectorXd& y, const ChannelDraw& draw, double epsilon);

/// Mixed loss alpha * mean((x - x_hat)^2) + (1 - alpha) * mean(|x - x_hat|).
double reconstruction_loss(const Tensor& x, const Tensor& x_hat, double alpha);

/// Gradient of reconstruction_loss with respect to x_hat (sign(0) = 0).
Tensor reconstruction_loss_grad(const Tensor& x, const Tensor& x_hat, double alpha);

/// Full parameter set, stored as one list split into four contiguous blocks:
/// semantic encoder, channel encoder, channel decoder, semantic decoder.
struct ModelParams {
  enum Block : std::size_t { semantic_encoder = 0, channel_encoder, channel_decoder, semantic_decoder };

  ParamList tensors;
  std::array<std::size_t, 5> offsets{};

  std::span<const Tensor> block(Block b) const {
    return std::span<const Tensor>(tensors).subspan(offsets[b], offsets[b + 1] - offsets[b]);
  }
  std::span<Tensor> block(Block b) {
    return std::span<Tensor>(tensors).subspan(offsets[b], offsets[b + 1] - offsets[b]);
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

ModelParams zeros_like(const ModelParams& p);

struct SemanticFeatures {
  Tensor z;
  Tensor skip1;
  Tensor skip2;
};

/// Everything needed to backpropagate one image through the pipeline.
struct PipelineTape {
  Tape enc_first, enc_second, enc_rest;
  Tape channel_enc, channel_dec;
  std::vector<Tape> dec_stages;
  ChannelDraw draw;
  Eigen::VectorXd symbols;  // x_c after optional power normalization
  double power_scale = 1.0; // x_c = raw / power_scale
};

struct Reconstruction {
  Tensor image;
  PipelineTape tape;
};

/// The five-stage semantic communication autoencoder.
///
/// Skip connections s1, s2 go straight from encoder to decoder and never
/// cross the simulated channel; only x_c experiences fading and noise.
class SemComModel {
 public:
  explicit SemComModel(SemComConfig cfg);

  const SemComConfig& config() const noexcept { return cfg_; }

  ModelParams init_params(std::mt19937_64& rng) const;
  ModelParams zero_params() const;
  void check_params(const ModelParams& params) const;

  SemanticFeatures semantic_encode(const ModelParams& p, const Tensor& image) const;
  Tensor channel_encode(const ModelParams& p, const Tensor& z) const;
  Tensor channel_decode(const ModelParams& p, const Tensor& x_hat_c) const;
  Tensor semantic_decode(const ModelParams& p, const Tensor& z_hat, const Tensor& skip1,
                         const Tensor& skip2) const;

  /// Runs every stage with the given channel realization.
  Reconstruction forward(const ModelParams& p, const Tensor& image, const ChannelDraw& draw,
                         bool record_tape) const;

  /// Draws a fresh channel from `rng` and runs the pipeline.
  Reconstruction reconstruct(const ModelParams& p, const Tensor& image, std::mt19937_64& rng,
                             bool record_tape = true) const;

  /// Gradients of all parameters given dL/dx_hat. The channel draw is constant.
  ModelParams backward(const ModelParams& p, const PipelineTape& tape, const Tensor& output_grad) const;

  /// ReLU on/off pattern of a recorded tape.
  std::vector<std::uint8_t> relu_pattern(const PipelineTape& tape) const;

  const Sequential& encoder_stage(std::size_t i) const { return encoder_[i]; }
  const Sequential& channel_encoder() const { return channel_encoder_; }
  const Sequential& channel_decoder() const { return channel_decoder_; }
  const std::vector<Sequential>& decoder_stages() const { return decoder_; }

 private:
  struct Encoded {
    Tensor z;
    Tensor skip1, skip2;
  };

  std::span<const Tensor> stage_params(const ModelParams& p, ModelParams::Block block,
                                       std::size_t first, std::size_t count) const;
  Tensor decoder_stage_input(std::size_t stage, Tensor x, const Tensor& skip1, const Tensor& skip2) const;

  SemComConfig cfg_;
  std::array<Sequential, 3> encoder_;  // conv1, conv2, remaining convs + bottleneck dense
  Sequential channel_encoder_;
  Sequential channel_decoder_;
  std::vector<Sequential> decoder_;    // head dense, then one transposed conv per level
  std::vector<int> decoder_skip_;      // skip index (1 or 2) concatenated before stage, 0 if none
  Shape head_shape_;
};

}  // namespace fedsem
