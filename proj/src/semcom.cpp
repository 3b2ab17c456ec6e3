#include "fedsem/semcom.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

namespace fedsem {
namespace {

Eigen::VectorXcd to_complex(const Eigen::VectorXd& x) {
  Eigen::VectorXcd c(x.size() / 2);
  for (Index i = 0; i < c.size(); ++i) c[i] = {x[2 * i], x[2 * i + 1]};
  return c;
}

Eigen::VectorXd to_real(const Eigen::VectorXcd& c) {
  Eigen::VectorXd x(2 * c.size());
  for (Index i = 0; i < c.size(); ++i) {
    x[2 * i] = c[i].real();
    x[2 * i + 1] = c[i].imag();
  }
  return x;
}

void check_draw(Index reals, const ChannelDraw& draw) {
  if (reals % 2 != 0) throw ConfigError("channel symbol count must be even, got " + std::to_string(reals));
  if (draw.fading.size() * 2 != reals || draw.noise.size() * 2 != reals) {
    throw UsageError("channel draw holds " + std::to_string(draw.fading.size()) +
                     " complex symbols, signal has " + std::to_string(reals) + " reals");
  }
}

}  // namespace

void SemComConfig::validate() const {
  if (channels < 1 || height < 1 || width < 1) throw ConfigError("image dimensions must be positive");
  if (encoder_channels.size() < 2) throw ConfigError("encoder needs at least two convolution layers");
  for (Index c : encoder_channels) {
    if (c < 1) throw ConfigError("encoder channel counts must be positive");
  }
  const Index factor = Index{1} << encoder_channels.size();
  if (height % factor != 0 || width % factor != 0) {
    throw ConfigError("image height and width must be divisible by " + std::to_string(factor));
  }
  if (channel_dim < 2 || channel_dim % 2 != 0) {
    throw ConfigError("d_c must be even and positive (complex symbol pairing), got " +
                      std::to_string(channel_dim));
  }
  if (!(channel_dim < semantic_dim)) throw ConfigError("d_c must be smaller than d_s");
  if (!(semantic_dim < image_size())) throw ConfigError("d_s must be smaller than C*H*W");
  if (!(loss_alpha >= 0.0 && loss_alpha <= 1.0)) throw ConfigError("loss alpha must lie in [0,1]");
  if (!(zf_epsilon >= 0.0)) throw ConfigError("zero-forcing epsilon must be >= 0");
  if (!std::isfinite(snr_db)) throw ConfigError("SNR must be finite");
}

SemComConfig SemComConfig::desk_scale() { return SemComConfig{}; }

SemComConfig SemComConfig::paper_scale() {
  SemComConfig c;
  c.height = c.width = 64;
  c.encoder_channels = {32, 64, 128};
  c.semantic_dim = 256;
  c.channel_dim = 32;
  return c;
}

double noise_variance(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

ChannelDraw ChannelDraw::identity(Index symbols) {
  return {Eigen::VectorXcd::Ones(symbols), Eigen::VectorXcd::Zero(symbols)};
}

ChannelDraw draw_channel(const SemComConfig& cfg, std::mt19937_64& rng) {
  const Index m = cfg.channel_dim / 2;
  ChannelDraw draw = ChannelDraw::identity(m);
  if (cfg.fading_enabled) {
    std::normal_distribution<double> component(0.0, std::sqrt(0.5));
    for (Index i = 0; i < m; ++i) {
      const double re = component(rng);
      const double im = component(rng);
      draw.fading[i] = {re, im};
    }
  }
  if (cfg.noise_enabled) {
    std::normal_distribution<double> component(0.0, std::sqrt(noise_variance(cfg.snr_db) / 2.0));
    for (Index i = 0; i < m; ++i) {
      const double re = component(rng);
      const double im = component(rng);
      draw.noise[i] = {re, im};
    }
  }
  return draw;
}

Eigen::VectorXd apply_channel(const Eigen::VectorXd& x, const ChannelDraw& draw) {
  check_draw(x.size(), draw);
  const Eigen::VectorXcd y = draw.fading.cwiseProduct(to_complex(x)) + draw.noise;
  return to_real(y);
}

Eigen::VectorXd zf_equalize(const Eigen::VectorXd& y, const ChannelDraw& draw, double epsilon) {
  check_draw(y.size(), draw);
  const Eigen::VectorXcd h = draw.fading.array() + std::complex<double>(epsilon, 0.0);
  return to_real(to_complex(y).cwiseQuotient(h));
}

double reconstruction_loss(const Tensor& x, const Tensor& x_hat, double alpha) {
  if (x.size() != x_hat.size()) {
    throw ConfigError("loss: shapes " + shape_string(x.shape()) + " and " + shape_string(x_hat.shape()) +
                      " differ");
  }
  const auto diff = (x.data() - x_hat.data()).array();
  const double n = static_cast<double>(x.size());
  return alpha * diff.square().sum() / n + (1.0 - alpha) * diff.abs().sum() / n;
}

Tensor reconstruction_loss_grad(const Tensor& x, const Tensor& x_hat, double alpha) {
  if (x.size() != x_hat.size()) throw ConfigError("loss gradient: shapes differ");
  const double n = static_cast<double>(x.size());
  const Eigen::ArrayXd diff = (x_hat.data() - x.data()).array();
  const Eigen::ArrayXd sign = (diff > 0.0).cast<double>() - (diff < 0.0).cast<double>();
  Tensor g(x_hat.shape());
  g.data() = (2.0 * alpha / n) * diff + ((1.0 - alpha) / n) * sign;
  return g;
}

ModelParams zeros_like(const ModelParams& p) { return {zeros_like(p.tensors), p.offsets}; }

SemComModel::SemComModel(SemComConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const auto& ch = cfg_.encoder_channels;
  const std::size_t levels = ch.size();
  const Index C = cfg_.channels;

  encoder_[0] = Sequential({LayerSpec::conv2d(C, ch[0]), LayerSpec::relu()}, {C, cfg_.height, cfg_.width});
  encoder_[1] = Sequential({LayerSpec::conv2d(ch[0], ch[1]), LayerSpec::relu()}, encoder_[0].output_shape());
  std::vector<LayerSpec> rest;
  Shape shape = encoder_[1].output_shape();
  for (std::size_t i = 2; i < levels; ++i) {
    rest.push_back(LayerSpec::conv2d(ch[i - 1], ch[i]));
    rest.push_back(LayerSpec::relu());
  }
  head_shape_ = infer_shapes(rest, shape).back();
  rest.push_back(LayerSpec::dense(shape_size(head_shape_), cfg_.semantic_dim));
  encoder_[2] = Sequential(std::move(rest), encoder_[1].output_shape());

  // d_s -> d_s/2 -> d_s/4 -> d_c, and the mirror image on the receiver side.
  const Index d_s = cfg_.semantic_dim;
  const Index d_c = cfg_.channel_dim;
  const Index h1 = std::max(d_s / 2, d_c);
  const Index h2 = std::max(d_s / 4, d_c);
  channel_encoder_ = Sequential({LayerSpec::dense(d_s, h1), LayerSpec::relu(), LayerSpec::dense(h1, h2),
                                 LayerSpec::relu(), LayerSpec::dense(h2, d_c)},
                                {d_s});
  channel_decoder_ = Sequential({LayerSpec::dense(d_c, h2), LayerSpec::relu(), LayerSpec::dense(h2, h1),
                                 LayerSpec::relu(), LayerSpec::dense(h1, d_s)},
                                {d_c});

  decoder_.emplace_back(std::vector<LayerSpec>{LayerSpec::dense(d_s, shape_size(head_shape_)), LayerSpec::relu()},
                        Shape{d_s});
  decoder_skip_.push_back(0);
  for (std::size_t level = levels; level >= 1; --level) {
    // Input sits at encoder level `level`; skips exist for levels 1 and 2.
    const int skip = level <= 2 ? static_cast<int>(level) : 0;
    const Index in_ch = ch[level - 1] * (skip ? 2 : 1);
    const Index out_ch = level >= 2 ? ch[level - 2] : C;
    const Index in_h = cfg_.height >> level;
    const Index in_w = cfg_.width >> level;
    const LayerSpec act = level == 1 ? LayerSpec::sigmoid() : LayerSpec::relu();
    decoder_.emplace_back(std::vector<LayerSpec>{LayerSpec::conv_transpose2d(in_ch, out_ch), act},
                          Shape{in_ch, in_h, in_w});
    decoder_skip_.push_back(skip);
  }
  if (decoder_.back().output_shape() != Shape{C, cfg_.height, cfg_.width}) {
    throw ConfigError("semantic decoder produces " + shape_string(decoder_.back().output_shape()) +
                      " instead of the image shape");
  }
}

ModelParams SemComModel::zero_params() const {
  ModelParams p;
  std::size_t block = 0;
  auto append = [&](const Sequential& net) {
    for (auto& t : net.zero_params()) p.tensors.push_back(std::move(t));
  };
  p.offsets[block++] = 0;
  for (const auto& s : encoder_) append(s);
  p.offsets[block++] = p.tensors.size();
  append(channel_encoder_);
  p.offsets[block++] = p.tensors.size();
  append(channel_decoder_);
  p.offsets[block++] = p.tensors.size();
  for (const auto& s : decoder_) append(s);
  p.offsets[block] = p.tensors.size();
  return p;
}

ModelParams SemComModel::init_params(std::mt19937_64& rng) const {
  ModelParams p;
  std::size_t block = 0;
  auto append = [&](const Sequential& net) {
    for (auto& t : net.init_params(rng)) p.tensors.push_back(std::move(t));
  };
  p.offsets[block++] = 0;
  for (const auto& s : encoder_) append(s);
  p.offsets[block++] = p.tensors.size();
  append(channel_encoder_);
  p.offsets[block++] = p.tensors.size();
  append(channel_decoder_);
  p.offsets[block++] = p.tensors.size();
  for (const auto& s : decoder_) append(s);
  p.offsets[block] = p.tensors.size();
  return p;
}

void SemComModel::check_params(const ModelParams& params) const {
  const ModelParams ref = zero_params();
  if (params.offsets != ref.offsets || !same_shapes(params.tensors, ref.tensors)) {
    throw ConfigError("model parameters do not match the semantic communication architecture");
  }
}

std::span<const Tensor> SemComModel::stage_params(const ModelParams& p, ModelParams::Block block,
                                                  std::size_t first, std::size_t count) const {
  return p.block(block).subspan(first, count);
}

SemanticFeatures SemComModel::semantic_encode(const ModelParams& p, const Tensor& image) const {
  if (image.shape() != encoder_[0].input_shape()) {
    throw ConfigError("image shape " + shape_string(image.shape()) + " does not match " +
                      shape_string(encoder_[0].input_shape()));
  }
  std::size_t at = 0;
  SemanticFeatures f;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto params = stage_params(p, ModelParams::semantic_encoder, at, encoder_[i].param_count());
    at += encoder_[i].param_count();
    const Tensor& in = i == 0 ? image : (i == 1 ? f.skip1 : f.skip2);
    Tensor out = encoder_[i].forward(params, in, false).output;
    if (i == 0) f.skip1 = std::move(out);
    else if (i == 1) f.skip2 = std::move(out);
    else f.z = std::move(out);
  }
  return f;
}

Tensor SemComModel::channel_encode(const ModelParams& p, const Tensor& z) const {
  Tensor x = channel_encoder_.forward(p.block(ModelParams::channel_encoder), z, false).output;
  if (cfg_.normalize_power) {
    const double rms = std::sqrt(x.data().squaredNorm() / static_cast<double>(x.size()));
    if (rms > 0.0) x.data() /= rms;
  }
  return x;
}

Tensor SemComModel::channel_decode(const ModelParams& p, const Tensor& x_hat_c) const {
  return channel_decoder_.forward(p.block(ModelParams::channel_decoder), x_hat_c, false).output;
}

Tensor SemComModel::decoder_stage_input(std::size_t stage, Tensor x, const Tensor& skip1,
                                        const Tensor& skip2) const {
  if (stage == 1) x = std::move(x).reshaped(head_shape_);
  switch (decoder_skip_[stage]) {
    case 1: return concat_channels(x, skip1);
    case 2: return concat_channels(x, skip2);
    default: return x;
  }
}

Tensor SemComModel::semantic_decode(const ModelParams& p, const Tensor& z_hat, const Tensor& skip1,
                                    const Tensor& skip2) const {
  if (skip1.shape() != encoder_[0].output_shape() || skip2.shape() != encoder_[1].output_shape()) {
    throw ConfigError("skip tensors " + shape_string(skip1.shape()) + ", " + shape_string(skip2.shape()) +
                      " do not match encoder outputs");
  }
  std::size_t at = 0;
  Tensor x = z_hat;
  for (std::size_t s = 0; s < decoder_.size(); ++s) {
    const auto params = stage_params(p, ModelParams::semantic_decoder, at, decoder_[s].param_count());
    at += decoder_[s].param_count();
    if (s > 0) x = decoder_stage_input(s, std::move(x), skip1, skip2);
    x = decoder_[s].forward(params, x, false).output;
  }
  return x;
}

Reconstruction SemComModel::forward(const ModelParams& p, const Tensor& image, const ChannelDraw& draw,
                                    bool record) const {
  if (image.shape() != encoder_[0].input_shape()) {
    throw ConfigError("image shape " + shape_string(image.shape()) + " does not match " +
                      shape_string(encoder_[0].input_shape()));
  }
  Reconstruction r;
  PipelineTape& tape = r.tape;

  std::size_t at = 0;
  auto enc = [&](std::size_t i, const Tensor& in, Tape& t) {
    const auto params = stage_params(p, ModelParams::semantic_encoder, at, encoder_[i].param_count());
    at += encoder_[i].param_count();
    auto res = encoder_[i].forward(params, in, record);
    t = std::move(res.tape);
    return std::move(res.output);
  };
  const Tensor skip1 = enc(0, image, tape.enc_first);
  const Tensor skip2 = enc(1, skip1, tape.enc_second);
  const Tensor z = enc(2, skip2, tape.enc_rest);

  auto ce = channel_encoder_.forward(p.block(ModelParams::channel_encoder), z, record);
  tape.channel_enc = std::move(ce.tape);
  Eigen::VectorXd symbols = ce.output.data();
  if (cfg_.normalize_power) {
    const double rms = std::sqrt(symbols.squaredNorm() / static_cast<double>(symbols.size()));
    if (rms > 0.0) {
      symbols /= rms;
      tape.power_scale = rms;
    }
  }
  const Eigen::VectorXd equalized = zf_equalize(apply_channel(symbols, draw), draw, cfg_.zf_epsilon);
  if (record) {
    tape.draw = draw;
    tape.symbols = symbols;
  }

  auto cd = channel_decoder_.forward(p.block(ModelParams::channel_decoder),
                                     Tensor({cfg_.channel_dim}, equalized), record);
  tape.channel_dec = std::move(cd.tape);

  Tensor x = std::move(cd.output);
  at = 0;
  for (std::size_t s = 0; s < decoder_.size(); ++s) {
    const auto params = stage_params(p, ModelParams::semantic_decoder, at, decoder_[s].param_count());
    at += decoder_[s].param_count();
    if (s > 0) x = decoder_stage_input(s, std::move(x), skip1, skip2);
    auto res = decoder_[s].forward(params, x, record);
    if (record) tape.dec_stages.push_back(std::move(res.tape));
    x = std::move(res.output);
  }
  r.image = std::move(x);
  return r;
}

Reconstruction SemComModel::reconstruct(const ModelParams& p, const Tensor& image, std::mt19937_64& rng,
                                        bool record) const {
  return forward(p, image, draw_channel(cfg_, rng), record);
}

ModelParams SemComModel::backward(const ModelParams& p, const PipelineTape& tape,
                                  const Tensor& output_grad) const {
  if (!tape.enc_first.recorded() || tape.dec_stages.size() != decoder_.size()) {
    throw UsageError("pipeline backward needs a tape recorded by forward");
  }
  ModelParams grads = zero_params();

  // Semantic decoder, last stage first. Skip gradients are collected on the way.
  Tensor skip1_grad(encoder_[0].output_shape());
  Tensor skip2_grad(encoder_[1].output_shape());
  std::vector<std::size_t> dec_offset;
  std::size_t at = 0;
  for (const auto& s : decoder_) {
    dec_offset.push_back(at);
    at += s.param_count();
  }
  auto dec_grads = grads.block(ModelParams::semantic_decoder);
  Tensor grad = output_grad;
  for (std::size_t s = decoder_.size(); s-- > 0;) {
    const auto params = stage_params(p, ModelParams::semantic_decoder, dec_offset[s], decoder_[s].param_count());
    auto res = decoder_[s].backward(params, tape.dec_stages[s], grad);
    for (std::size_t i = 0; i < res.param_grads.size(); ++i) {
      dec_grads[dec_offset[s] + i] = std::move(res.param_grads[i]);
    }
    grad = std::move(res.input_grad);
    if (s > 0 && decoder_skip_[s] != 0) {
      const Index main_channels = grad.dim(0) / 2;
      auto [main, skip] = split_channels(grad, main_channels);
      (decoder_skip_[s] == 1 ? skip1_grad : skip2_grad).data() += skip.data();
      grad = std::move(main);
    }
  }

  auto cd = channel_decoder_.backward(p.block(ModelParams::channel_decoder), tape.channel_dec, grad);
  std::ranges::move(cd.param_grads, grads.block(ModelParams::channel_decoder).begin());

  // Through zero forcing: x_hat = c * x with c = h / (h + eps); adjoint is conj(c).
  const Eigen::VectorXcd h = tape.draw.fading;
  const Eigen::VectorXcd c = h.cwiseQuotient((h.array() + std::complex<double>(cfg_.zf_epsilon, 0.0)).matrix());
  Eigen::VectorXd symbol_grad = to_real(c.conjugate().cwiseProduct(to_complex(cd.input_grad.data())));
  if (cfg_.normalize_power && tape.power_scale != 1.0) {
    const double n = static_cast<double>(symbol_grad.size());
    const double proj = symbol_grad.dot(tape.symbols) / n;
    symbol_grad = (symbol_grad - proj * tape.symbols) / tape.power_scale;
  }

  auto ce = channel_encoder_.backward(p.block(ModelParams::channel_encoder), tape.channel_enc,
                                      Tensor({cfg_.channel_dim}, symbol_grad));
  std::ranges::move(ce.param_grads, grads.block(ModelParams::channel_encoder).begin());

  auto enc_grads = grads.block(ModelParams::semantic_encoder);
  const std::size_t n0 = encoder_[0].param_count();
  const std::size_t n1 = encoder_[1].param_count();
  const std::size_t n2 = encoder_[2].param_count();
  auto r2 = encoder_[2].backward(stage_params(p, ModelParams::semantic_encoder, n0 + n1, n2), tape.enc_rest,
                                 ce.input_grad);
  std::ranges::move(r2.param_grads, enc_grads.begin() + static_cast<std::ptrdiff_t>(n0 + n1));
  skip2_grad.data() += r2.input_grad.data();
  auto r1 = encoder_[1].backward(stage_params(p, ModelParams::semantic_encoder, n0, n1), tape.enc_second,
                                 skip2_grad);
  std::ranges::move(r1.param_grads, enc_grads.begin() + static_cast<std::ptrdiff_t>(n0));
  skip1_grad.data() += r1.input_grad.data();
  auto r0 = encoder_[0].backward(stage_params(p, ModelParams::semantic_encoder, 0, n0), tape.enc_first,
                                 skip1_grad);
  std::ranges::move(r0.param_grads, enc_grads.begin());
  return grads;
}

std::vector<std::uint8_t> SemComModel::relu_pattern(const PipelineTape& tape) const {
  std::vector<std::uint8_t> out;
  encoder_[0].relu_pattern(tape.enc_first, out);
  encoder_[1].relu_pattern(tape.enc_second, out);
  encoder_[2].relu_pattern(tape.enc_rest, out);
  channel_encoder_.relu_pattern(tape.channel_enc, out);
  channel_decoder_.relu_pattern(tape.channel_dec, out);
  for (std::size_t s = 0; s < decoder_.size(); ++s) decoder_[s].relu_pattern(tape.dec_stages[s], out);
  return out;
}

}  // namespace fedsem
