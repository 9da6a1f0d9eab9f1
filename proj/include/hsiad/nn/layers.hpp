#ifndef HSIAD_NN_LAYERS_HPP
#define HSIAD_NN_LAYERS_HPP

// Dense building blocks with explicit forward/backward passes over
// token-major feature maps (rows = pixels in row-major order, cols = channels).
// Parameters live in one flat array; each layer addresses its tensors through
// offsets recorded in a slot. Backward passes accumulate into a gradient array
// with the same layout.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hsiad/error.hpp"

namespace hsiad::nn {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const Mat>;
using MMap = Eigen::Map<Mat>;
using CRowMap = Eigen::Map<const Eigen::RowVectorXd>;
using MRowMap = Eigen::Map<Eigen::RowVectorXd>;

struct FeatureMap {
  int height = 0;
  int width = 0;
  Mat data;  // (height * width) x channels

  int channels() const { return int(data.cols()); }
};

struct TensorSpec {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t count = 0;

  friend bool operator==(const TensorSpec&, const TensorSpec&) = default;
};

/// Appends named tensors to a flat parameter layout.
class LayoutBuilder {
 public:
  std::size_t add(std::string name, std::vector<int> shape) {
    std::size_t n = 1;
    for (int d : shape) n *= std::size_t(d);
    specs_.push_back({std::move(name), std::move(shape), total_, n});
    const std::size_t off = total_;
    total_ += n;
    return off;
  }
  std::vector<TensorSpec>& specs() { return specs_; }
  std::size_t total() const { return total_; }

 private:
  std::vector<TensorSpec> specs_;
  std::size_t total_ = 0;
};

struct LinearSlot {
  std::size_t weight = 0;  // out x in
  std::size_t bias = 0;
  int out = 0;
  int in = 0;

  static LinearSlot make(LayoutBuilder& lb, const std::string& name, int out, int in) {
    LinearSlot s;
    s.out = out;
    s.in = in;
    s.weight = lb.add(name + ".weight", {out, in});
    s.bias = lb.add(name + ".bias", {out});
    return s;
  }
};

/// y = x W^T + b
inline Mat linear_forward(const Mat& x, const LinearSlot& s, const double* p) {
  CMap w(p + s.weight, s.out, s.in);
  CRowMap b(p + s.bias, s.out);
  Mat y = x * w.transpose();
  y.rowwise() += b;
  return y;
}

inline Mat linear_backward(const Mat& dy, const Mat& x, const LinearSlot& s, const double* p,
                           double* g, bool need_input_grad = true) {
  MMap dw(g + s.weight, s.out, s.in);
  MRowMap db(g + s.bias, s.out);
  dw.noalias() += dy.transpose() * x;
  db += dy.colwise().sum();
  if (!need_input_grad) return Mat();
  CMap w(p + s.weight, s.out, s.in);
  return dy * w;
}

struct ConvSlot {
  std::size_t weight = 0;  // cout x (k * k * cin), ordered (ky, kx, ci)
  std::size_t bias = 0;
  int cout = 0;
  int cin = 0;
  int kernel = 3;
  int stride = 1;
  int pad = 1;

  static ConvSlot make(LayoutBuilder& lb, const std::string& name, int cout, int cin, int kernel,
                       int stride, int pad) {
    ConvSlot s{0, 0, cout, cin, kernel, stride, pad};
    s.weight = lb.add(name + ".weight", {cout, kernel, kernel, cin});
    s.bias = lb.add(name + ".bias", {cout});
    return s;
  }

  int out_size(int n) const { return (n + 2 * pad - kernel) / stride + 1; }
};

struct ConvCache {
  Mat col;
  int in_height = 0;
  int in_width = 0;
};

/// Zero-padded strided convolution via im2col.
inline FeatureMap conv2d_forward(const FeatureMap& in, const ConvSlot& s, const double* p,
                                 ConvCache* cache = nullptr) {
  if (in.channels() != s.cin) throw InvalidArgument("conv2d: channel mismatch");
  const int oh = s.out_size(in.height), ow = s.out_size(in.width);
  const int k = s.kernel, cin = s.cin;
  Mat col = Mat::Zero(Eigen::Index(oh) * ow, Eigen::Index(k) * k * cin);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const Eigen::Index r = Eigen::Index(oy) * ow + ox;
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy * s.stride - s.pad + ky;
        if (iy < 0 || iy >= in.height) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox * s.stride - s.pad + kx;
          if (ix < 0 || ix >= in.width) continue;
          col.row(r).segment((ky * k + kx) * cin, cin) = in.data.row(Eigen::Index(iy) * in.width + ix);
        }
      }
    }
  }
  CMap w(p + s.weight, s.cout, Eigen::Index(k) * k * cin);
  CRowMap b(p + s.bias, s.cout);
  FeatureMap out{oh, ow, Mat(col.rows(), s.cout)};
  out.data.noalias() = col * w.transpose();
  out.data.rowwise() += b;
  if (cache) {
    cache->col = std::move(col);
    cache->in_height = in.height;
    cache->in_width = in.width;
  }
  return out;
}

inline FeatureMap conv2d_backward(const Mat& dout, const ConvCache& c, const ConvSlot& s,
                                  const double* p, double* g, bool need_input_grad = true) {
  const int k = s.kernel, cin = s.cin;
  const Eigen::Index kk = Eigen::Index(k) * k * cin;
  MMap dw(g + s.weight, s.cout, kk);
  MRowMap db(g + s.bias, s.cout);
  dw.noalias() += dout.transpose() * c.col;
  db += dout.colwise().sum();
  FeatureMap din{c.in_height, c.in_width, Mat()};
  if (!need_input_grad) return din;
  CMap w(p + s.weight, s.cout, kk);
  Mat dcol = dout * w;
  din.data = Mat::Zero(Eigen::Index(c.in_height) * c.in_width, cin);
  const int oh = s.out_size(c.in_height), ow = s.out_size(c.in_width);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const Eigen::Index r = Eigen::Index(oy) * ow + ox;
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy * s.stride - s.pad + ky;
        if (iy < 0 || iy >= c.in_height) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox * s.stride - s.pad + kx;
          if (ix < 0 || ix >= c.in_width) continue;
          din.data.row(Eigen::Index(iy) * c.in_width + ix) += dcol.row(r).segment((ky * k + kx) * cin, cin);
        }
      }
    }
  }
  return din;
}

struct UpSlot {
  std::size_t weight = 0;  // (4 * cout) x cin, rows ordered (ky, kx, co)
  std::size_t bias = 0;
  int cout = 0;
  int cin = 0;

  static UpSlot make(LayoutBuilder& lb, const std::string& name, int cout, int cin) {
    UpSlot s{0, 0, cout, cin};
    s.weight = lb.add(name + ".weight", {2, 2, cout, cin});
    s.bias = lb.add(name + ".bias", {cout});
    return s;
  }
};

/// 2x2 transposed convolution with stride 2: every input pixel writes its own 2x2 output block.
inline FeatureMap upsample_forward(const FeatureMap& in, const UpSlot& s, const double* p) {
  if (in.channels() != s.cin) throw InvalidArgument("upsample: channel mismatch");
  CMap w(p + s.weight, 4 * s.cout, s.cin);
  CRowMap b(p + s.bias, s.cout);
  Mat tmp = in.data * w.transpose();
  const int oh = in.height * 2, ow = in.width * 2;
  FeatureMap out{oh, ow, Mat(Eigen::Index(oh) * ow, s.cout)};
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x)
      for (int ky = 0; ky < 2; ++ky)
        for (int kx = 0; kx < 2; ++kx)
          out.data.row(Eigen::Index(2 * y + ky) * ow + 2 * x + kx) =
              tmp.row(Eigen::Index(y) * in.width + x).segment((ky * 2 + kx) * s.cout, s.cout) + b;
  return out;
}

inline Mat upsample_backward(const Mat& dout, const FeatureMap& in, const UpSlot& s, const double* p,
                             double* g) {
  const int ow = in.width * 2;
  Mat dtmp(Eigen::Index(in.height) * in.width, 4 * s.cout);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x)
      for (int ky = 0; ky < 2; ++ky)
        for (int kx = 0; kx < 2; ++kx)
          dtmp.row(Eigen::Index(y) * in.width + x).segment((ky * 2 + kx) * s.cout, s.cout) =
              dout.row(Eigen::Index(2 * y + ky) * ow + 2 * x + kx);
  MMap dw(g + s.weight, 4 * s.cout, s.cin);
  MRowMap db(g + s.bias, s.cout);
  dw.noalias() += dtmp.transpose() * in.data;
  db += dout.colwise().sum();
  CMap w(p + s.weight, 4 * s.cout, s.cin);
  return dtmp * w;
}

struct NormSlot {
  std::size_t gamma = 0;
  std::size_t beta = 0;
  int channels = 0;

  static NormSlot make(LayoutBuilder& lb, const std::string& name, int c) {
    NormSlot s;
    s.channels = c;
    s.gamma = lb.add(name + ".gamma", {c});
    s.beta = lb.add(name + ".beta", {c});
    return s;
  }
};

inline constexpr double kLayerNormEps = 1e-5;

struct NormCache {
  Mat xhat;
  Eigen::VectorXd rstd;
};

inline Mat layernorm_forward(const Mat& x, const NormSlot& s, const double* p, NormCache& c) {
  const Eigen::Index n = x.rows(), ch = x.cols();
  CRowMap gamma(p + s.gamma, ch);
  CRowMap beta(p + s.beta, ch);
  c.xhat.resize(n, ch);
  c.rstd.resize(n);
  Mat y(n, ch);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().mean();
    const double r = 1.0 / std::sqrt(var + kLayerNormEps);
    c.rstd(i) = r;
    c.xhat.row(i) = (x.row(i).array() - mean) * r;
    y.row(i) = c.xhat.row(i).cwiseProduct(gamma) + beta;
  }
  return y;
}

inline Mat layernorm_backward(const Mat& dy, const NormCache& c, const NormSlot& s, const double* p,
                              double* g) {
  const Eigen::Index n = dy.rows(), ch = dy.cols();
  CRowMap gamma(p + s.gamma, ch);
  MRowMap dgamma(g + s.gamma, ch);
  MRowMap dbeta(g + s.beta, ch);
  dgamma += dy.cwiseProduct(c.xhat).colwise().sum();
  dbeta += dy.colwise().sum();
  Mat dx(n, ch);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::RowVectorXd dxhat = dy.row(i).cwiseProduct(gamma);
    const double m1 = dxhat.mean();
    const double m2 = dxhat.cwiseProduct(c.xhat.row(i)).mean();
    dx.row(i) = c.rstd(i) * (dxhat.array() - m1 - c.xhat.row(i).array() * m2);
  }
  return dx;
}

/// Exact (erf) GELU.
inline Mat gelu_forward(const Mat& x) {
  return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0)); });
}

inline Mat gelu_backward(const Mat& dy, const Mat& x) {
  return dy.binaryExpr(x, [](double d, double v) {
    const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
    const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
    return d * (cdf + v * pdf);
  });
}

}  // namespace hsiad::nn

#endif  // HSIAD_NN_LAYERS_HPP
