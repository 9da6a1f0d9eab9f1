#ifndef HSIAD_DETECTORS_HPP
#define HSIAD_DETECTORS_HPP

// Reed-Xiaoli style Mahalanobis detectors and the network-enhanced pipeline.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hsiad/aetnet.hpp"
#include "hsiad/cube.hpp"
#include "hsiad/error.hpp"

namespace hsiad {

inline constexpr double kDefaultRidge = 1e-10;

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd inv_cov;
  Eigen::MatrixXd cov;  // before ridge
  double ridge_used = 0.0;
};

/// Per-pixel anomaly scores, row-major.
struct ScoreMap {
  int height = 0;
  int width = 0;
  std::vector<double> scores;
  bool fallback_used = false;  // LRX only: some rings fell back to global statistics

  double max() const { return *std::max_element(scores.begin(), scores.end()); }
};

inline HsiCube to_cube(const ScoreMap& s) {
  return HsiCube(s.height, s.width, 1, s.scores);
}

inline ScoreMap from_cube(const HsiCube& c) {
  if (c.bands() != 1) throw InvalidArgument("score map cube must have exactly one band");
  return {c.height(), c.width(), std::vector<double>(c.values().begin(), c.values().end())};
}

namespace detail {

/// Pixels as rows, bands as columns.
inline Eigen::MatrixXd spectra_matrix(const HsiCube& cube) {
  const Eigen::Index n = Eigen::Index(cube.pixel_count());
  Eigen::MatrixXd x(n, cube.bands());
  for (int b = 0; b < cube.bands(); ++b) {
    auto band = cube.band(b);
    for (Eigen::Index i = 0; i < n; ++i) x(i, b) = band[std::size_t(i)];
  }
  return x;
}

/// Ridge-regularized inverse of a covariance via LDL^T.
inline Eigen::MatrixXd regularized_inverse(const Eigen::MatrixXd& cov, double ridge_eps, double& ridge_used) {
  const Eigen::Index nb = cov.rows();
  const double mean_diag = cov.diagonal().mean();
  ridge_used = ridge_eps * (mean_diag > 0.0 ? mean_diag : 1.0);
  Eigen::MatrixXd reg = cov;
  reg.diagonal().array() += ridge_used;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(reg);
  const auto dvec = ldlt.vectorD();
  const double dmax = dvec.cwiseAbs().maxCoeff();
  const double dmin = dvec.minCoeff();
  if (ldlt.info() != Eigen::Success || !(dmin > 0.0) || dmax / dmin > 1e15) {
    throw SingularCovariance("covariance singular after ridge " + std::to_string(ridge_used) +
                                 " (condition estimate " + std::to_string(dmin > 0 ? dmax / dmin : INFINITY) + ")",
                             dmin > 0 ? dmax / dmin : INFINITY);
  }
  Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(nb, nb));
  return 0.5 * (inv + inv.transpose());
}

}  // namespace detail

/// Spectra minus their mean, computed around the first spectrum as a pivot so
/// that identical spectra give exactly zero deviations.
struct Centered {
  Eigen::VectorXd mean;
  Eigen::MatrixXd dev;  // rows = pixels
};

namespace detail {

inline Centered center(const Eigen::MatrixXd& x) {
  const Eigen::RowVectorXd pivot = x.row(0);
  Eigen::MatrixXd dev = x.rowwise() - pivot;
  const Eigen::RowVectorXd shift = dev.colwise().mean();
  dev.rowwise() -= shift;
  return {(pivot + shift).transpose(), std::move(dev)};
}

}  // namespace detail

/// Mean, unbiased covariance (divisor N-1) and ridge-regularized inverse of all spectra.
inline GaussianStats global_stats(const HsiCube& cube, double ridge_eps = kDefaultRidge) {
  if (cube.pixel_count() < 2) throw InvalidArgument("global_stats needs at least two pixels");
  const Centered c = detail::center(detail::spectra_matrix(cube));
  GaussianStats st;
  st.mean = c.mean;
  st.cov = (c.dev.transpose() * c.dev) / double(c.dev.rows() - 1);
  st.inv_cov = detail::regularized_inverse(st.cov, ridge_eps, st.ridge_used);
  return st;
}

/// Global RX: Mahalanobis distance of every spectrum to the scene statistics.
inline ScoreMap grx(const HsiCube& cube, double ridge_eps = kDefaultRidge) {
  if (cube.pixel_count() < 2) throw InvalidArgument("grx needs at least two pixels");
  const Centered c = detail::center(detail::spectra_matrix(cube));
  const Eigen::MatrixXd cov = (c.dev.transpose() * c.dev) / double(c.dev.rows() - 1);
  double ridge = 0.0;
  const Eigen::MatrixXd inv = detail::regularized_inverse(cov, ridge_eps, ridge);
  const Eigen::MatrixXd z = c.dev * inv;
  ScoreMap out{cube.height(), cube.width(), std::vector<double>(cube.pixel_count())};
  for (Eigen::Index i = 0; i < c.dev.rows(); ++i) {
    out.scores[std::size_t(i)] = std::max(0.0, z.row(i).dot(c.dev.row(i)));
  }
  return out;
}

struct DualWindow {
  int inner = 13;
  int outer = 29;
};

inline void validate(const DualWindow& dw) {
  if (dw.inner < 3 || dw.outer <= dw.inner || dw.inner % 2 == 0 || dw.outer % 2 == 0) {
    throw InvalidArgument("dual window must satisfy 3 <= inner < outer with both odd");
  }
}

/// Local RX: background statistics from the ring between the inner and outer
/// windows (clipped at the borders). Rings with fewer than B+1 pixels fall back
/// to the global statistics and set `fallback_used`.
inline ScoreMap lrx(const HsiCube& cube, const DualWindow& dw, double ridge_eps = kDefaultRidge) {
  validate(dw);
  if (dw.outer > std::min(cube.height(), cube.width())) {
    throw InvalidArgument("outer window " + std::to_string(dw.outer) + " exceeds cube " + shape_string(cube));
  }
  const int h = cube.height(), w = cube.width(), nb = cube.bands();
  const Eigen::MatrixXd x = detail::spectra_matrix(cube);
  const int ro = dw.outer / 2, ri = dw.inner / 2;
  ScoreMap out{h, w, std::vector<double>(std::size_t(h) * w)};
  std::vector<Eigen::Index> ring;
  GaussianStats global;
  Eigen::MatrixXd global_dev;
  bool have_global = false;

  for (int y = 0; y < h; ++y) {
    for (int xq = 0; xq < w; ++xq) {
      ring.clear();
      for (int yy = std::max(0, y - ro); yy <= std::min(h - 1, y + ro); ++yy)
        for (int xx = std::max(0, xq - ro); xx <= std::min(w - 1, xq + ro); ++xx)
          if (std::abs(yy - y) > ri || std::abs(xx - xq) > ri) ring.push_back(Eigen::Index(yy) * w + xx);
      const Eigen::RowVectorXd centre = x.row(Eigen::Index(y) * w + xq);
      double score;
      if (int(ring.size()) < nb + 1) {
        if (!have_global) {
          global = global_stats(cube, ridge_eps);
          global_dev = detail::center(x).dev;
          have_global = true;
        }
        const Eigen::RowVectorXd d = global_dev.row(Eigen::Index(y) * w + xq);
        score = d * global.inv_cov * d.transpose();
        out.fallback_used = true;
      } else {
        Eigen::MatrixXd bg(Eigen::Index(ring.size()), nb);
        for (std::size_t i = 0; i < ring.size(); ++i) bg.row(Eigen::Index(i)) = x.row(ring[i]);
        const Eigen::RowVectorXd pivot = bg.row(0);
        bg.rowwise() -= pivot;
        const Eigen::RowVectorXd shift = bg.colwise().mean();
        bg.rowwise() -= shift;
        const Eigen::MatrixXd cov = (bg.transpose() * bg) / double(bg.rows() - 1);
        double ridge = 0.0;
        const Eigen::MatrixXd inv = detail::regularized_inverse(cov, ridge_eps, ridge);
        const Eigen::RowVectorXd d = (centre - pivot) - shift;
        score = d * inv * d.transpose();
      }
      out.scores[std::size_t(y) * w + xq] = std::max(0.0, score);
    }
  }
  return out;
}

/// Network input for a raw cube: first `bands` bands, scaled to [-0.1, 0.1].
inline HsiCube prepare_network_input(const HsiCube& cube, int bands) {
  return normalize_symmetric(select_bands(cube, bands)).cube;
}

/// Reconstruction of a prepared cube; GRX (or any detector) then runs on it.
inline HsiCube enhance(const HsiCube& prepared, const NetParams& params) { return forward(prepared, params); }

/// grx(forward(normalize_symmetric(select_bands(cube)))).
inline ScoreMap enhance_and_detect(const HsiCube& cube, const NetParams& params,
                                   double ridge_eps = kDefaultRidge) {
  return grx(enhance(prepare_network_input(cube, params.config.bands), params), ridge_eps);
}

/// Body output of the network: forward(prepared) - prepared.
inline HsiCube residual_map(const HsiCube& prepared, const NetParams& params) {
  return forward_body(prepared, params);
}

}  // namespace hsiad

#endif  // HSIAD_DETECTORS_HPP
