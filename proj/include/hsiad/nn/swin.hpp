#ifndef HSIAD_NN_SWIN_HPP
#define HSIAD_NN_SWIN_HPP

// Windowed multi-head self-attention block. A block runs two passes, the
// first over regular windows and the second over windows cyclically shifted
// by half a window. Each pass is
//   x = x + MSA(x)
//   x = x + MLP(LayerNorm(x))
// (no normalization in front of the attention). Attention inside a shifted
// window is restricted to token pairs that were contiguous before the shift.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "hsiad/nn/layers.hpp"

namespace hsiad::nn {

struct PassSlot {
  LinearSlot qkv;
  LinearSlot proj;
  std::size_t rel_bias = 0;  // ((2w-1)^2) x heads
  NormSlot norm;
  LinearSlot fc1;
  LinearSlot fc2;
  int channels = 0;
  int heads = 1;
  int window = 1;
  int shift = 0;

  static PassSlot make(LayoutBuilder& lb, const std::string& name, int channels, int heads,
                       int window, int shift, int mlp_ratio) {
    PassSlot s;
    s.channels = channels;
    s.heads = heads;
    s.window = window;
    s.shift = shift;
    s.qkv = LinearSlot::make(lb, name + ".qkv", 3 * channels, channels);
    s.proj = LinearSlot::make(lb, name + ".proj", channels, channels);
    s.rel_bias = lb.add(name + ".rel_bias", {(2 * window - 1) * (2 * window - 1), heads});
    s.norm = NormSlot::make(lb, name + ".norm", channels);
    s.fc1 = LinearSlot::make(lb, name + ".fc1", mlp_ratio * channels, channels);
    s.fc2 = LinearSlot::make(lb, name + ".fc2", channels, mlp_ratio * channels);
    return s;
  }
};

struct BlockSlot {
  PassSlot passes[2];

  static BlockSlot make(LayoutBuilder& lb, const std::string& name, int channels, int heads,
                        int window, int mlp_ratio) {
    BlockSlot b;
    b.passes[0] = PassSlot::make(lb, name + ".pass0", channels, heads, window, 0, mlp_ratio);
    b.passes[1] = PassSlot::make(lb, name + ".pass1", channels, heads, window, window / 2, mlp_ratio);
    return b;
  }
};

/// Token ordering and masking for one (possibly shifted) window partition.
///
/// Rows of the window-ordered matrix are grouped by window (row-major over
/// windows), then row-major within each window. `source[r]` is the original
/// pixel index feeding row r after the cyclic shift.
struct WindowGeometry {
  int height = 0;
  int width = 0;
  int window = 1;
  int shift = 0;
  std::vector<int> source;
  std::vector<int> region;     // shift-region label per window-ordered row
  std::vector<int> rel_index;  // n x n relative-position table index

  int tokens_per_window() const { return window * window; }
  int window_count() const { return (height / window) * (width / window); }

  WindowGeometry(int h, int w, int win, int sh) : height(h), width(w), window(win), shift(sh) {
    if (win < 1 || h % win != 0 || w % win != 0) {
      throw InvalidArgument("window " + std::to_string(win) + " does not divide " +
                            std::to_string(h) + "x" + std::to_string(w));
    }
    const int nwy = h / win, nwx = w / win;
    source.resize(std::size_t(h) * w);
    region.resize(source.size());
    auto label = [](int v, int n, int win, int sh) {
      if (sh == 0) return 0;
      return v < n - win ? 0 : (v < n - sh ? 1 : 2);
    };
    std::size_t r = 0;
    for (int wy = 0; wy < nwy; ++wy)
      for (int wx = 0; wx < nwx; ++wx)
        for (int ty = 0; ty < win; ++ty)
          for (int tx = 0; tx < win; ++tx, ++r) {
            const int sy = wy * win + ty, sx = wx * win + tx;
            source[r] = ((sy + sh) % h) * w + (sx + sh) % w;
            region[r] = label(sy, h, win, sh) * 3 + label(sx, w, win, sh);
          }
    const int n = win * win;
    rel_index.resize(std::size_t(n) * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const int dy = i / win - j / win + win - 1;
        const int dx = i % win - j % win + win - 1;
        rel_index[std::size_t(i) * n + j] = dy * (2 * win - 1) + dx;
      }
  }

  /// Whether token i may attend to token j inside window `wi`.
  bool allowed(int wi, int i, int j) const {
    const int n = tokens_per_window();
    return region[std::size_t(wi) * n + i] == region[std::size_t(wi) * n + j];
  }
};

struct AttentionCache {
  Mat xw;                   // window-ordered input
  Mat qkv;                  // window-ordered q|k|v
  std::vector<Mat> probs;   // [window * heads + head], n x n
  Mat o;                    // concatenated head outputs
};

struct PassCache {
  AttentionCache attn;
  Mat x1;
  NormCache norm;
  Mat z;
  Mat h1;
  Mat g;
};

struct BlockCache {
  PassCache passes[2];
  int height = 0;
  int width = 0;
};

/// Residual branch of the attention sub-layer (original token order).
inline Mat window_attention_forward(const Mat& x, const WindowGeometry& geo, const PassSlot& s,
                                    const double* p, AttentionCache& c) {
  const int ch = s.channels, nh = s.heads, d = ch / nh;
  const int n = geo.tokens_per_window(), nw = geo.window_count();
  const double scale = 1.0 / std::sqrt(double(d));
  const double* table = p + s.rel_bias;

  c.xw.resize(x.rows(), ch);
  for (Eigen::Index r = 0; r < x.rows(); ++r) c.xw.row(r) = x.row(geo.source[r]);
  c.qkv = linear_forward(c.xw, s.qkv, p);
  c.o.resize(x.rows(), ch);
  c.probs.assign(std::size_t(nw) * nh, Mat());

  Mat scores(n, n);
  for (int wi = 0; wi < nw; ++wi) {
    const Eigen::Index r0 = Eigen::Index(wi) * n;
    for (int h = 0; h < nh; ++h) {
      auto q = c.qkv.block(r0, h * d, n, d);
      auto k = c.qkv.block(r0, ch + h * d, n, d);
      auto v = c.qkv.block(r0, 2 * ch + h * d, n, d);
      scores.noalias() = (q * scale) * k.transpose();
      Mat& prob = c.probs[std::size_t(wi) * nh + h];
      prob.resize(n, n);
      for (int i = 0; i < n; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j) {
          if (!geo.allowed(wi, i, j)) continue;
          scores(i, j) += table[std::size_t(geo.rel_index[std::size_t(i) * n + j]) * nh + h];
          mx = std::max(mx, scores(i, j));
        }
        double total = 0.0;
        for (int j = 0; j < n; ++j) {
          const double e = geo.allowed(wi, i, j) ? std::exp(scores(i, j) - mx) : 0.0;
          prob(i, j) = e;
          total += e;
        }
        prob.row(i) /= total;
      }
      c.o.block(r0, h * d, n, d).noalias() = prob * v;
    }
  }
  Mat yw = linear_forward(c.o, s.proj, p);
  Mat y(x.rows(), ch);
  for (Eigen::Index r = 0; r < x.rows(); ++r) y.row(geo.source[r]) = yw.row(r);
  return y;
}

inline Mat window_attention_backward(const Mat& dy, const WindowGeometry& geo, const PassSlot& s,
                                     const double* p, double* g, const AttentionCache& c) {
  const int ch = s.channels, nh = s.heads, d = ch / nh;
  const int n = geo.tokens_per_window(), nw = geo.window_count();
  const double scale = 1.0 / std::sqrt(double(d));
  double* dtable = g + s.rel_bias;

  Mat dyw(dy.rows(), ch);
  for (Eigen::Index r = 0; r < dy.rows(); ++r) dyw.row(r) = dy.row(geo.source[r]);
  Mat dout = linear_backward(dyw, c.o, s.proj, p, g);

  Mat dqkv(dy.rows(), 3 * ch);
  Mat dprob(n, n), dscores(n, n);
  for (int wi = 0; wi < nw; ++wi) {
    const Eigen::Index r0 = Eigen::Index(wi) * n;
    for (int h = 0; h < nh; ++h) {
      const Mat& prob = c.probs[std::size_t(wi) * nh + h];
      auto q = c.qkv.block(r0, h * d, n, d);
      auto k = c.qkv.block(r0, ch + h * d, n, d);
      auto v = c.qkv.block(r0, 2 * ch + h * d, n, d);
      auto dob = dout.block(r0, h * d, n, d);
      dprob.noalias() = dob * v.transpose();
      dqkv.block(r0, 2 * ch + h * d, n, d).noalias() = prob.transpose() * dob;
      for (int i = 0; i < n; ++i) {
        const double dot = dprob.row(i).dot(prob.row(i));
        for (int j = 0; j < n; ++j) {
          const double ds = prob(i, j) * (dprob(i, j) - dot);
          dscores(i, j) = ds;
          if (geo.allowed(wi, i, j)) {
            dtable[std::size_t(geo.rel_index[std::size_t(i) * n + j]) * nh + h] += ds;
          }
        }
      }
      dqkv.block(r0, h * d, n, d).noalias() = (dscores * k) * scale;
      dqkv.block(r0, ch + h * d, n, d).noalias() = dscores.transpose() * (q * scale);
    }
  }
  Mat dxw = linear_backward(dqkv, c.xw, s.qkv, p, g);
  Mat dx(dy.rows(), ch);
  for (Eigen::Index r = 0; r < dy.rows(); ++r) dx.row(geo.source[r]) = dxw.row(r);
  return dx;
}

inline Mat swin_pass_forward(const Mat& x, int h, int w, const PassSlot& s, const double* p,
                             PassCache& c) {
  WindowGeometry geo(h, w, s.window, s.shift);
  c.x1 = x + window_attention_forward(x, geo, s, p, c.attn);
  c.z = layernorm_forward(c.x1, s.norm, p, c.norm);
  c.h1 = linear_forward(c.z, s.fc1, p);
  c.g = gelu_forward(c.h1);
  return c.x1 + linear_forward(c.g, s.fc2, p);
}

inline Mat swin_pass_backward(const Mat& dout, int h, int w, const PassSlot& s, const double* p,
                              double* g, const PassCache& c) {
  WindowGeometry geo(h, w, s.window, s.shift);
  Mat dg = linear_backward(dout, c.g, s.fc2, p, g);
  Mat dh1 = gelu_backward(dg, c.h1);
  Mat dz = linear_backward(dh1, c.z, s.fc1, p, g);
  Mat dx1 = dout + layernorm_backward(dz, c.norm, s.norm, p, g);
  return dx1 + window_attention_backward(dx1, geo, s, p, g, c.attn);
}

inline FeatureMap swin_block_forward(const FeatureMap& in, const BlockSlot& b, const double* p,
                                     BlockCache& c) {
  c.height = in.height;
  c.width = in.width;
  Mat x = swin_pass_forward(in.data, in.height, in.width, b.passes[0], p, c.passes[0]);
  return {in.height, in.width, swin_pass_forward(x, in.height, in.width, b.passes[1], p, c.passes[1])};
}

inline Mat swin_block_backward(const Mat& dout, const BlockSlot& b, const double* p, double* g,
                               const BlockCache& c) {
  Mat d = swin_pass_backward(dout, c.height, c.width, b.passes[1], p, g, c.passes[1]);
  return swin_pass_backward(d, c.height, c.width, b.passes[0], p, g, c.passes[0]);
}

}  // namespace hsiad::nn

#endif  // HSIAD_NN_SWIN_HPP
