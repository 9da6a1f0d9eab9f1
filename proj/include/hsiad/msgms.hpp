#ifndef HSIAD_MSGMS_HPP
#define HSIAD_MSGMS_HPP

// Multi-scale gradient magnitude similarity. Gradient magnitudes come from
// four 3x3 Sobel kernels (0, 90, 45 and 135 degrees) applied by correlation
// with replicate-edge padding; the image pyramid is built by 2x2 average
// pooling of the inputs, and the loss averages 1 - GMS over pixels, bands and
// scales.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "hsiad/cube.hpp"
#include "hsiad/error.hpp"

namespace hsiad {

using Kernel3 = std::array<std::array<double, 3>, 3>;

/// Indexed [row = dy + 1][col = dx + 1].
struct SobelBank {
  static constexpr std::array<Kernel3, 4> kernels{{
      {{{1, 0, -1}, {2, 0, -2}, {1, 0, -1}}},   // x
      {{{1, 2, 1}, {0, 0, 0}, {-1, -2, -1}}},   // y
      {{{2, 1, 0}, {1, 0, -1}, {0, -1, -2}}},   // 45 deg
      {{{0, 1, 2}, {-1, 0, 1}, {-2, -1, 0}}},   // 135 deg
  }};
};

struct MsgmsConfig {
  double stability_c = 1.0;
  int scales = 5;
};

inline int msgms_min_side(const MsgmsConfig& cfg) { return (1 << (cfg.scales - 1)) * 3; }

namespace detail {

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

/// Four directional responses of one h x w plane; out[k][i].
inline void sobel_responses(const double* plane, int h, int w, std::array<std::vector<double>, 4>& out) {
  const std::size_t n = std::size_t(h) * w;
  for (auto& r : out) r.assign(n, 0.0);
  for (int y = 0; y < h; ++y) {
    int ys[3] = {clampi(y - 1, 0, h - 1), y, clampi(y + 1, 0, h - 1)};
    for (int x = 0; x < w; ++x) {
      int xs[3] = {clampi(x - 1, 0, w - 1), x, clampi(x + 1, 0, w - 1)};
      double p[3][3];
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) p[r][c] = plane[std::size_t(ys[r]) * w + xs[c]];
      for (int k = 0; k < 4; ++k) {
        const auto& K = SobelBank::kernels[k];
        double acc = 0.0;
        for (int r = 0; r < 3; ++r)
          for (int c = 0; c < 3; ++c) acc += K[r][c] * p[r][c];
        out[k][std::size_t(y) * w + x] = acc;
      }
    }
  }
}

inline std::vector<double> magnitude(const std::array<std::vector<double>, 4>& g) {
  std::vector<double> m(g[0].size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    m[i] = std::sqrt(g[0][i] * g[0][i] + g[1][i] * g[1][i] + g[2][i] * g[2][i] + g[3][i] * g[3][i]);
  }
  return m;
}

/// Adjoint of sobel_responses: accumulates into dplane.
inline void sobel_backward(const std::array<std::vector<double>, 4>& dg, int h, int w, double* dplane) {
  for (int y = 0; y < h; ++y) {
    int ys[3] = {clampi(y - 1, 0, h - 1), y, clampi(y + 1, 0, h - 1)};
    for (int x = 0; x < w; ++x) {
      int xs[3] = {clampi(x - 1, 0, w - 1), x, clampi(x + 1, 0, w - 1)};
      const std::size_t i = std::size_t(y) * w + x;
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
          double acc = 0.0;
          for (int k = 0; k < 4; ++k) acc += SobelBank::kernels[k][r][c] * dg[k][i];
          dplane[std::size_t(ys[r]) * w + xs[c]] += acc;
        }
      }
    }
  }
}

}  // namespace detail

inline HsiCube gradient_magnitude(const HsiCube& cube) {
  if (cube.height() < 3 || cube.width() < 3) {
    throw InvalidArgument("gradient_magnitude needs at least 3x3 pixels, got " + shape_string(cube));
  }
  const std::size_t hw = cube.pixel_count();
  std::vector<double> out(cube.size());
  std::array<std::vector<double>, 4> g;
  for (int b = 0; b < cube.bands(); ++b) {
    detail::sobel_responses(cube.band(b).data(), cube.height(), cube.width(), g);
    auto m = detail::magnitude(g);
    std::copy(m.begin(), m.end(), out.begin() + std::ptrdiff_t(b * hw));
  }
  return HsiCube(cube.height(), cube.width(), cube.bands(), std::move(out));
}

inline HsiCube gms_map(const HsiCube& gi, const HsiCube& gr, double c) {
  require_same_shape(gi, gr, "gms_map");
  if (!(c > 0.0)) throw InvalidArgument("gms_map: stability constant must be positive");
  std::vector<double> out(gi.size());
  auto a = gi.values();
  auto b = gr.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double d = a[i] - b[i];
    out[i] = 1.0 - d * d / (a[i] * a[i] + b[i] * b[i] + c);
  }
  return HsiCube(gi.height(), gi.width(), gi.bands(), std::move(out));
}

/// 2x2 mean pooling with stride 2; an odd trailing row/column is dropped and
/// reported through `truncated`.
inline HsiCube avg_pool_half(const HsiCube& cube, bool* truncated = nullptr) {
  const int h = cube.height() / 2;
  const int w = cube.width() / 2;
  if (truncated) *truncated = (cube.height() % 2) != 0 || (cube.width() % 2) != 0;
  if (h < 1 || w < 1) throw InvalidArgument("avg_pool_half: cube too small to pool");
  std::vector<double> out(std::size_t(h) * w * cube.bands());
  std::size_t k = 0;
  for (int b = 0; b < cube.bands(); ++b)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out[k++] = 0.25 * (cube.at(b, 2 * y, 2 * x) + cube.at(b, 2 * y, 2 * x + 1) +
                           cube.at(b, 2 * y + 1, 2 * x) + cube.at(b, 2 * y + 1, 2 * x + 1));
  return HsiCube(h, w, cube.bands(), std::move(out));
}

struct LossWithGrad {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d second argument, band-sequential
};

namespace detail {

inline void check_msgms_inputs(const HsiCube& x, const HsiCube& y, const MsgmsConfig& cfg) {
  require_same_shape(x, y, "msgms_loss");
  if (cfg.scales < 1) throw InvalidArgument("msgms: scales must be >= 1");
  if (!(cfg.stability_c > 0.0)) throw InvalidArgument("msgms: stability constant must be positive");
  const int need = msgms_min_side(cfg);
  if (x.height() < need || x.width() < need) {
    throw InvalidArgument("msgms: " + shape_string(x) + " too small for " +
                          std::to_string(cfg.scales) + " scales (need " + std::to_string(need) + ")");
  }
}

inline std::vector<double> pool_backward(const std::vector<double>& d, int h_small, int w_small,
                                         int bands, int h_big, int w_big) {
  std::vector<double> out(std::size_t(h_big) * w_big * bands, 0.0);
  for (int b = 0; b < bands; ++b)
    for (int y = 0; y < h_small; ++y)
      for (int x = 0; x < w_small; ++x) {
        const double g = 0.25 * d[(std::size_t(b) * h_small + y) * w_small + x];
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx)
            out[(std::size_t(b) * h_big + 2 * y + dy) * w_big + 2 * x + dx] += g;
      }
  return out;
}

}  // namespace detail

/// Loss and its gradient with respect to `y` (the reconstruction).
inline LossWithGrad msgms_loss_and_grad(const HsiCube& x, const HsiCube& y, const MsgmsConfig& cfg,
                                        bool want_grad = true) {
  detail::check_msgms_inputs(x, y, cfg);
  const double c = cfg.stability_c;
  std::vector<HsiCube> xs{x}, ys{y};
  for (int l = 1; l < cfg.scales; ++l) {
    xs.push_back(avg_pool_half(xs.back()));
    ys.push_back(avg_pool_half(ys.back()));
  }

  LossWithGrad out;
  std::vector<std::vector<double>> dlevel(cfg.scales);
  std::array<std::vector<double>, 4> gx, gy, dg;
  for (int l = 0; l < cfg.scales; ++l) {
    const int h = xs[l].height(), w = xs[l].width(), nb = xs[l].bands();
    const std::size_t hw = std::size_t(h) * w;
    const double scale = 1.0 / (double(cfg.scales) * double(hw) * nb);
    if (want_grad) dlevel[l].assign(hw * nb, 0.0);
    double level_sum = 0.0;
    for (int b = 0; b < nb; ++b) {
      detail::sobel_responses(xs[l].band(b).data(), h, w, gx);
      detail::sobel_responses(ys[l].band(b).data(), h, w, gy);
      const auto mx = detail::magnitude(gx);
      const auto my = detail::magnitude(gy);
      if (want_grad)
        for (auto& v : dg) v.assign(hw, 0.0);
      for (std::size_t i = 0; i < hw; ++i) {
        const double den = mx[i] * mx[i] + my[i] * my[i] + c;
        const double diff = mx[i] - my[i];
        level_sum += diff * diff / den;  // 1 - GMS, exact zero for equal inputs
        if (want_grad && my[i] > 0.0) {
          // d(1 - GMS)/dG_r, then through G_r = sqrt(sum g_k^2)
          const double dgms = 2.0 * diff * (den + my[i] * diff) / (den * den);
          const double dmag = -scale * dgms;
          for (int k = 0; k < 4; ++k) dg[k][i] = dmag * gy[k][i] / my[i];
        }
      }
      if (want_grad) detail::sobel_backward(dg, h, w, dlevel[l].data() + b * hw);
    }
    out.loss += scale * level_sum;
  }

  if (want_grad) {
    for (int l = cfg.scales - 1; l > 0; --l) {
      auto up = detail::pool_backward(dlevel[l], ys[l].height(), ys[l].width(), ys[l].bands(),
                                      ys[l - 1].height(), ys[l - 1].width());
      for (std::size_t i = 0; i < up.size(); ++i) dlevel[l - 1][i] += up[i];
    }
    out.grad = std::move(dlevel[0]);
  }
  return out;
}

inline double msgms_loss(const HsiCube& x, const HsiCube& y, const MsgmsConfig& cfg) {
  return msgms_loss_and_grad(x, y, cfg, false).loss;
}

/// Mean squared error; the ablation alternative to MSGMS.
inline LossWithGrad l2_loss_and_grad(const HsiCube& x, const HsiCube& y) {
  require_same_shape(x, y, "l2_loss");
  LossWithGrad out;
  out.grad.resize(x.size());
  const double n = double(x.size());
  auto a = x.values();
  auto b = y.values();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = b[i] - a[i];
    out.loss += d * d / n;
    out.grad[i] = 2.0 * d / n;
  }
  return out;
}

}  // namespace hsiad

#endif  // HSIAD_MSGMS_HPP
