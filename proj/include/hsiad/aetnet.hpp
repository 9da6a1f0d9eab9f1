#ifndef HSIAD_AETNET_HPP
#define HSIAD_AETNET_HPP

// Anomaly-enhancement reconstruction network.
//
//   x -conv3x3-> [H,W,C] -swin-> skip1 -down-> [H/2,W/2,2C] -swin-> skip2
//     -down-> [H/4,W/4,4C] -swin-> -up-> cat(skip2) -1x1-> -swin-> -up->
//     cat(skip1) -1x1-> -swin-> -conv3x3-> [H,W,B] + x
//
// Window side at each resolution is side / window_partition, so every block
// sees the same number of windows.

#include <array>
#include <cmath>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hsiad/cube.hpp"
#include "hsiad/msgms.hpp"
#include "hsiad/nn/layers.hpp"
#include "hsiad/nn/swin.hpp"

namespace hsiad {

struct NetworkConfig {
  int channels = 32;
  std::array<int, 5> heads{2, 4, 8, 4, 2};  // stage-1, stage-2, bottleneck, decoder-1, decoder-2
  int window_partition = 8;
  int mlp_ratio = 4;
  int height = 64;
  int width = 64;
  int bands = 50;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

inline void validate(const NetworkConfig& cfg) {
  if (cfg.channels < 1 || cfg.bands < 1 || cfg.mlp_ratio < 1 || cfg.window_partition < 1) {
    throw InvalidArgument("network config: channels, bands, mlp_ratio and window_partition must be positive");
  }
  if (cfg.height != cfg.width) throw InvalidArgument("network config: input must be square");
  if (cfg.height % 4 != 0 || cfg.width % 4 != 0 || cfg.height < 4 || cfg.width < 4) {
    throw InvalidArgument("network config: height and width must be positive multiples of 4");
  }
  for (int level = 0; level < 3; ++level) {
    const int h = cfg.height >> level, w = cfg.width >> level;
    if (h % cfg.window_partition != 0 || w % cfg.window_partition != 0) {
      throw InvalidArgument("network config: resolution " + std::to_string(h) + "x" + std::to_string(w) +
                            " not divisible by window_partition " + std::to_string(cfg.window_partition));
    }
  }
  const int block_channels[5] = {cfg.channels, 2 * cfg.channels, 4 * cfg.channels, 2 * cfg.channels,
                                 cfg.channels};
  for (int i = 0; i < 5; ++i) {
    if (cfg.heads[i] < 1 || block_channels[i] % cfg.heads[i] != 0) {
      throw InvalidArgument("network config: block " + std::to_string(i) + " channels " +
                            std::to_string(block_channels[i]) + " not divisible by heads " +
                            std::to_string(cfg.heads[i]));
    }
  }
}

/// Offsets of every layer's tensors inside the flat parameter array.
struct NetLayout {
  nn::ConvSlot encoder;
  nn::BlockSlot blocks[5];
  nn::ConvSlot down[2];
  nn::UpSlot up[2];
  nn::LinearSlot fuse[2];
  nn::ConvSlot decoder;
  std::vector<nn::TensorSpec> specs;
  std::size_t total = 0;

  explicit NetLayout(const NetworkConfig& cfg) {
    validate(cfg);
    nn::LayoutBuilder lb;
    const int c = cfg.channels, part = cfg.window_partition, r = cfg.mlp_ratio;
    const int win[3] = {cfg.height / part, (cfg.height / 2) / part, (cfg.height / 4) / part};
    encoder = nn::ConvSlot::make(lb, "encoder", c, cfg.bands, 3, 1, 1);
    blocks[0] = nn::BlockSlot::make(lb, "swin.stage1", c, cfg.heads[0], win[0], r);
    down[0] = nn::ConvSlot::make(lb, "down1", 2 * c, c, 4, 2, 1);
    blocks[1] = nn::BlockSlot::make(lb, "swin.stage2", 2 * c, cfg.heads[1], win[1], r);
    down[1] = nn::ConvSlot::make(lb, "down2", 4 * c, 2 * c, 4, 2, 1);
    blocks[2] = nn::BlockSlot::make(lb, "swin.bottleneck", 4 * c, cfg.heads[2], win[2], r);
    up[0] = nn::UpSlot::make(lb, "up1", 2 * c, 4 * c);
    fuse[0] = nn::LinearSlot::make(lb, "fuse1", 2 * c, 4 * c);
    blocks[3] = nn::BlockSlot::make(lb, "swin.decoder1", 2 * c, cfg.heads[3], win[1], r);
    up[1] = nn::UpSlot::make(lb, "up2", c, 2 * c);
    fuse[1] = nn::LinearSlot::make(lb, "fuse2", c, 2 * c);
    blocks[4] = nn::BlockSlot::make(lb, "swin.decoder2", c, cfg.heads[4], win[0], r);
    decoder = nn::ConvSlot::make(lb, "decoder", cfg.bands, c, 3, 1, 1);
    specs = std::move(lb.specs());
    total = lb.total();
  }
};

/// Flat parameter storage. Eigen maps into it pick their vectorized code
/// path from the address, so a fixed alignment keeps results bit-identical
/// across copies.
using ParamBuffer = std::vector<double, Eigen::aligned_allocator<double>>;

/// All learnable tensors in one flat array, addressed by name through `specs`.
/// The same type carries gradients.
struct NetParams {
  NetworkConfig config;
  std::vector<nn::TensorSpec> specs;
  ParamBuffer values;

  std::size_t size() const { return values.size(); }

  const nn::TensorSpec& spec(const std::string& name) const {
    for (const auto& s : specs)
      if (s.name == name) return s;
    throw InvalidArgument("unknown parameter tensor " + name);
  }

  std::span<const double> tensor(const std::string& name) const {
    const auto& s = spec(name);
    return std::span<const double>(values).subspan(s.offset, s.count);
  }

  std::span<double> tensor(const std::string& name) {
    const auto& s = spec(name);
    return std::span<double>(values).subspan(s.offset, s.count);
  }

  NetParams zeros_like() const { return {config, specs, ParamBuffer(values.size(), 0.0)}; }

  friend bool operator==(const NetParams&, const NetParams&) = default;
};

inline NetParams zero_params(const NetworkConfig& cfg) {
  NetLayout layout(cfg);
  return {cfg, layout.specs, ParamBuffer(layout.total, 0.0)};
}

/// Truncated normal (std 0.02, cut at two std) for attention and MLP weights,
/// fan-in scaled uniform for convolution kernels, zero biases and position
/// tables, unit LayerNorm gains. With `zero_residual_start` the output conv is
/// zero so the network starts as the identity map.
template <class Rng>
NetParams init_params(const NetworkConfig& cfg, Rng& rng, bool zero_residual_start = false) {
  NetParams params = zero_params(cfg);
  std::normal_distribution<double> normal(0.0, 0.02);
  auto truncated = [&]() {
    for (;;) {
      const double v = normal(rng);
      if (std::abs(v) <= 0.04) return v;
    }
  };
  auto ends_with = [](const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  for (const auto& spec : params.specs) {
    auto t = std::span<double>(params.values).subspan(spec.offset, spec.count);
    const std::string& n = spec.name;
    if (ends_with(n, ".gamma")) {
      std::fill(t.begin(), t.end(), 1.0);
    } else if (ends_with(n, ".bias") || ends_with(n, ".beta") || ends_with(n, ".rel_bias")) {
      // zero
    } else if (n.starts_with("swin.")) {
      for (double& v : t) v = truncated();
    } else {
      if (zero_residual_start && n == "decoder.weight") continue;
      int fan_in = 1;
      for (std::size_t i = 1; i < spec.shape.size(); ++i) fan_in *= spec.shape[i];
      if (n.starts_with("up")) fan_in = spec.shape[3];
      const double bound = 1.0 / std::sqrt(double(fan_in));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (double& v : t) v = u(rng);
    }
  }
  return params;
}

namespace detail {

inline nn::FeatureMap cube_to_tokens(const HsiCube& cube) {
  const std::size_t hw = cube.pixel_count();
  nn::FeatureMap f{cube.height(), cube.width(), nn::Mat(Eigen::Index(hw), cube.bands())};
  for (int b = 0; b < cube.bands(); ++b) {
    auto band = cube.band(b);
    for (std::size_t i = 0; i < hw; ++i) f.data(Eigen::Index(i), b) = band[i];
  }
  return f;
}

inline void check_input(const HsiCube& x, const NetworkConfig& cfg) {
  if (x.height() != cfg.height || x.width() != cfg.width || x.bands() != cfg.bands) {
    throw InvalidArgument("network input " + shape_string(x) + " does not match config " +
                          std::to_string(cfg.height) + "x" + std::to_string(cfg.width) + "x" +
                          std::to_string(cfg.bands));
  }
}

}  // namespace detail

/// Intermediate activations kept for the backward pass and for inspection.
struct ForwardTape {
  nn::ConvCache encoder;
  nn::BlockCache blocks[5];
  nn::ConvCache down[2];
  nn::FeatureMap up_in[2];
  nn::Mat fuse_in[2];
  nn::ConvCache decoder;
};

/// Output of the network body without the global residual, so that
/// forward(x) == x + forward_body(x) holds elementwise and exactly.
inline HsiCube forward_body(const HsiCube& x, const NetParams& params, ForwardTape* tape = nullptr) {
  const NetworkConfig& cfg = params.config;
  detail::check_input(x, cfg);
  NetLayout L(cfg);
  if (params.values.size() != L.total) throw InvalidArgument("parameter count does not match config");
  const double* p = params.values.data();
  ForwardTape local;
  ForwardTape& t = tape ? *tape : local;

  nn::FeatureMap f = nn::conv2d_forward(detail::cube_to_tokens(x), L.encoder, p, &t.encoder);
  nn::FeatureMap skip1 = nn::swin_block_forward(f, L.blocks[0], p, t.blocks[0]);
  f = nn::conv2d_forward(skip1, L.down[0], p, &t.down[0]);
  nn::FeatureMap skip2 = nn::swin_block_forward(f, L.blocks[1], p, t.blocks[1]);
  f = nn::conv2d_forward(skip2, L.down[1], p, &t.down[1]);
  f = nn::swin_block_forward(f, L.blocks[2], p, t.blocks[2]);

  t.up_in[0] = f;
  f = nn::upsample_forward(f, L.up[0], p);
  t.fuse_in[0].resize(f.data.rows(), f.channels() + skip2.channels());
  t.fuse_in[0] << f.data, skip2.data;
  f.data = nn::linear_forward(t.fuse_in[0], L.fuse[0], p);
  f = nn::swin_block_forward(f, L.blocks[3], p, t.blocks[3]);

  t.up_in[1] = f;
  f = nn::upsample_forward(f, L.up[1], p);
  t.fuse_in[1].resize(f.data.rows(), f.channels() + skip1.channels());
  t.fuse_in[1] << f.data, skip1.data;
  f.data = nn::linear_forward(t.fuse_in[1], L.fuse[1], p);
  f = nn::swin_block_forward(f, L.blocks[4], p, t.blocks[4]);

  f = nn::conv2d_forward(f, L.decoder, p, &t.decoder);

  const std::size_t hw = x.pixel_count();
  std::vector<double> out(x.size());
  for (int b = 0; b < cfg.bands; ++b)
    for (std::size_t i = 0; i < hw; ++i) out[b * hw + i] = f.data(Eigen::Index(i), b);
  return HsiCube(x.height(), x.width(), x.bands(), std::move(out));
}

/// forward(x) = x + body(x); fills `tape` for backward() when given.
inline HsiCube forward(const HsiCube& x, const NetParams& params, ForwardTape* tape = nullptr) {
  const HsiCube body = forward_body(x, params, tape);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.values()[i] + body.values()[i];
  return HsiCube(x.height(), x.width(), x.bands(), std::move(out));
}

/// Accumulates d loss / d params into `grads` given d loss / d output (band-sequential).
inline void backward(std::span<const double> dout, const NetParams& params, const ForwardTape& t,
                     NetParams& grads) {
  const NetworkConfig& cfg = params.config;
  NetLayout L(cfg);
  const double* p = params.values.data();
  double* g = grads.values.data();
  const std::size_t hw = std::size_t(cfg.height) * cfg.width;

  nn::Mat d(Eigen::Index(hw), cfg.bands);
  for (int b = 0; b < cfg.bands; ++b)
    for (std::size_t i = 0; i < hw; ++i) d(Eigen::Index(i), b) = dout[b * hw + i];

  d = nn::conv2d_backward(d, t.decoder, L.decoder, p, g).data;
  d = nn::swin_block_backward(d, L.blocks[4], p, g, t.blocks[4]);
  nn::Mat dcat = nn::linear_backward(d, t.fuse_in[1], L.fuse[1], p, g);
  const int c = cfg.channels;
  nn::Mat dskip1 = dcat.rightCols(c);
  d = nn::upsample_backward(dcat.leftCols(c), t.up_in[1], L.up[1], p, g);

  d = nn::swin_block_backward(d, L.blocks[3], p, g, t.blocks[3]);
  dcat = nn::linear_backward(d, t.fuse_in[0], L.fuse[0], p, g);
  nn::Mat dskip2 = dcat.rightCols(2 * c);
  d = nn::upsample_backward(dcat.leftCols(2 * c), t.up_in[0], L.up[0], p, g);

  d = nn::swin_block_backward(d, L.blocks[2], p, g, t.blocks[2]);
  d = nn::conv2d_backward(d, t.down[1], L.down[1], p, g).data;
  d += dskip2;
  d = nn::swin_block_backward(d, L.blocks[1], p, g, t.blocks[1]);
  d = nn::conv2d_backward(d, t.down[0], L.down[0], p, g).data;
  d += dskip1;
  d = nn::swin_block_backward(d, L.blocks[0], p, g, t.blocks[0]);
  nn::conv2d_backward(d, t.encoder, L.encoder, p, g, false);
}

enum class LossKind { Msgms, L2 };

struct LossGrad {
  double loss = 0.0;
  NetParams grads;
};

/// Reconstruction loss between `x_orig` and forward(x_masked) with exact parameter gradients.
inline LossGrad loss_and_grad(const HsiCube& x_masked, const HsiCube& x_orig, const NetParams& params,
                              LossKind kind = LossKind::Msgms, const MsgmsConfig& msgms = {}) {
  require_same_shape(x_masked, x_orig, "loss_and_grad");
  ForwardTape tape;
  const HsiCube recon = forward(x_masked, params, &tape);
  LossWithGrad lg = kind == LossKind::Msgms ? msgms_loss_and_grad(x_orig, recon, msgms)
                                            : l2_loss_and_grad(x_orig, recon);
  LossGrad out{lg.loss, params.zeros_like()};
  backward(lg.grad, params, tape, out.grads);
  return out;
}

inline double reconstruction_loss(const HsiCube& x_masked, const HsiCube& x_orig, const NetParams& params,
                                  LossKind kind = LossKind::Msgms, const MsgmsConfig& msgms = {}) {
  const HsiCube recon = forward(x_masked, params);
  return kind == LossKind::Msgms ? msgms_loss(x_orig, recon, msgms) : l2_loss_and_grad(x_orig, recon).loss;
}

}  // namespace hsiad

#endif  // HSIAD_AETNET_HPP
