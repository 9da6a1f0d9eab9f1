#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hsiad/detectors.hpp"
#include "hsiad/rng.hpp"

using namespace hsiad;

namespace {

using Vec = std::vector<double>;
using Matrix = std::vector<Vec>;

HsiCube random_cube(int h, int w, int b, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(std::size_t(h) * w * b);
  for (double& x : v) x = u(rng);
  return HsiCube(h, w, b, std::move(v));
}

// Gaussian elimination with partial pivoting on a copy.
Vec solve(Matrix a, Vec rhs) {
  const std::size_t n = rhs.size();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t r = k + 1; r < n; ++r)
      if (std::abs(a[r][k]) > std::abs(a[piv][k])) piv = r;
    std::swap(a[k], a[piv]);
    std::swap(rhs[k], rhs[piv]);
    for (std::size_t r = k + 1; r < n; ++r) {
      const double f = a[r][k] / a[k][k];
      for (std::size_t c = k; c < n; ++c) a[r][c] -= f * a[k][c];
      rhs[r] -= f * rhs[k];
    }
  }
  Vec x(n);
  for (std::size_t k = n; k-- > 0;) {
    double s = rhs[k];
    for (std::size_t c = k + 1; c < n; ++c) s -= a[k][c] * x[c];
    x[k] = s / a[k][k];
  }
  return x;
}

struct TwoPass {
  Vec mean;
  Matrix cov;
};

TwoPass two_pass(const std::vector<Vec>& samples) {
  const std::size_t n = samples.size(), b = samples[0].size();
  TwoPass st{Vec(b, 0.0), Matrix(b, Vec(b, 0.0))};
  for (const auto& s : samples)
    for (std::size_t i = 0; i < b; ++i) st.mean[i] += s[i];
  for (double& m : st.mean) m /= double(n);
  for (const auto& s : samples)
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < b; ++j) st.cov[i][j] += (s[i] - st.mean[i]) * (s[j] - st.mean[j]);
  for (auto& row : st.cov)
    for (double& v : row) v /= double(n - 1);
  return st;
}

double mahalanobis(const Vec& y, const TwoPass& st, double eps) {
  const std::size_t b = y.size();
  double md = 0.0;
  for (std::size_t i = 0; i < b; ++i) md += st.cov[i][i] / double(b);
  Matrix a = st.cov;
  for (std::size_t i = 0; i < b; ++i) a[i][i] += eps * md;
  Vec d(b);
  for (std::size_t i = 0; i < b; ++i) d[i] = y[i] - st.mean[i];
  const Vec z = solve(a, d);
  double s = 0.0;
  for (std::size_t i = 0; i < b; ++i) s += d[i] * z[i];
  return s;
}

std::vector<Vec> all_spectra(const HsiCube& c) {
  std::vector<Vec> out;
  for (int y = 0; y < c.height(); ++y)
    for (int x = 0; x < c.width(); ++x) out.push_back(c.spectrum(y, x));
  return out;
}

}  // namespace

TEST(GlobalStats, MatchesTwoPassOracle) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const HsiCube c = random_cube(9, 11, 5, s, -2.0, 3.0);
    const GaussianStats st = global_stats(c);
    const TwoPass o = two_pass(all_spectra(c));
    for (int i = 0; i < 5; ++i) {
      EXPECT_NEAR(st.mean(i), o.mean[i], 1e-12);
      for (int j = 0; j < 5; ++j) EXPECT_NEAR(st.cov(i, j), o.cov[i][j], 1e-9);
    }
  }
}

TEST(GlobalStats, MidpointOfTwoSpectra) {
  std::vector<double> v(4 * 2);
  for (int i = 0; i < 4; ++i) {
    v[i] = i % 2 ? 1.0 : 3.0;
    v[4 + i] = i % 2 ? -2.0 : 0.5;
  }
  const GaussianStats st = global_stats(HsiCube(2, 2, 2, v));
  EXPECT_EQ(st.mean(0), 2.0);
  EXPECT_EQ(st.mean(1), -0.75);
}

TEST(GlobalStats, SampleCovarianceNearTruth) {
  Rng rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  const double sd[3] = {0.5, 1.0, 2.0};
  std::vector<double> v(std::size_t(64) * 64 * 3);
  for (int b = 0; b < 3; ++b)
    for (int i = 0; i < 64 * 64; ++i) v[std::size_t(b) * 4096 + i] = sd[b] * n(rng);
  const GaussianStats st = global_stats(HsiCube(64, 64, 3, v));
  for (int b = 0; b < 3; ++b) EXPECT_NEAR(st.cov(b, b) / (sd[b] * sd[b]), 1.0, 0.1);
  EXPECT_NEAR(st.cov(0, 1), 0.0, 0.05);
}

TEST(Grx, ConstantCubeScoresZero) {
  const HsiCube c = HsiCube::filled(6, 6, 4, 0.3);
  const ScoreMap m = grx(c);
  for (double s : m.scores) EXPECT_EQ(s, 0.0);
  EXPECT_TRUE(std::isfinite(global_stats(c).inv_cov.sum()));
}

TEST(Grx, SpectrumAtMeanScoresZero) {
  // centre pixel is exactly the mean of the others (symmetric pairs)
  const double d[4][2] = {{0.25, -0.5}, {0.75, 0.125}, {-0.5, 0.5}, {0.125, 0.25}};
  std::vector<double> v(9 * 2);
  int k = 0;
  for (int i = 0; i < 9; ++i) {
    if (i == 4) {
      v[i] = 1.0;
      v[9 + i] = 2.0;
      continue;
    }
    const double sign = k % 2 ? -1.0 : 1.0;
    v[i] = 1.0 + sign * d[k / 2][0];
    v[9 + i] = 2.0 + sign * d[k / 2][1];
    ++k;
  }
  const ScoreMap m = grx(HsiCube(3, 3, 2, v));
  EXPECT_EQ(m.scores[4], 0.0);
}

TEST(Grx, MatchesLinearSolveOracle) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const HsiCube c = random_cube(8, 8, 4, 100 + s);
    const ScoreMap m = grx(c);
    const auto spectra = all_spectra(c);
    const TwoPass st = two_pass(spectra);
    for (std::size_t i = 0; i < spectra.size(); ++i) {
      const double want = mahalanobis(spectra[i], st, kDefaultRidge);
      EXPECT_LE(std::abs(m.scores[i] - want), 1e-6 * want) << "pixel " << i;
    }
  }
}

TEST(Grx, MeanScoreIdentity) {
  // with an N-1 divisor, sum_i d_i' S^-1 d_i = (N-1) tr(I) exactly
  for (std::uint64_t s = 0; s < 5; ++s) {
    const HsiCube c = random_cube(10, 12, 6, 200 + s);
    const ScoreMap m = grx(c);
    double mean = 0.0;
    for (double v : m.scores) mean += v / double(m.scores.size());
    const double n = 120.0;
    EXPECT_NEAR(mean / (6.0 * (n - 1.0) / n), 1.0, 1e-6);
  }
}

TEST(Grx, AffineInvariance) {
  const HsiCube c = random_cube(12, 12, 5, 7);
  Rng rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd a(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) a(i, j) = u(rng) + (i == j ? 3.0 : 0.0);
  Eigen::VectorXd b(5);
  for (int i = 0; i < 5; ++i) b(i) = u(rng) * 10.0;
  std::vector<double> v(c.size());
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 12; ++x) {
      const auto s = c.spectrum(y, x);
      const Eigen::VectorXd t = a * Eigen::Map<const Eigen::VectorXd>(s.data(), 5) + b;
      for (int k = 0; k < 5; ++k) v[(std::size_t(k) * 12 + y) * 12 + x] = t(k);
    }
  const ScoreMap m1 = grx(c), m2 = grx(HsiCube(12, 12, 5, v));
  for (std::size_t i = 0; i < m1.scores.size(); ++i) EXPECT_LE(std::abs(m1.scores[i] - m2.scores[i]), 1e-6 * m1.scores[i]);

  // argmax under positive scaling, non-negativity
  std::vector<double> scaled(c.values().begin(), c.values().end());
  for (double& x : scaled) x *= 37.5;
  const ScoreMap m3 = grx(HsiCube(12, 12, 5, scaled));
  auto argmax = [](const ScoreMap& m) { return std::max_element(m.scores.begin(), m.scores.end()) - m.scores.begin(); };
  EXPECT_EQ(argmax(m1), argmax(m3));
  for (double s : m1.scores) EXPECT_GE(s, 0.0);
}

TEST(Lrx, DefaultsAndInvalidWindows) {
  const DualWindow dw;
  EXPECT_EQ(dw.inner, 13);
  EXPECT_EQ(dw.outer, 29);
  const HsiCube c = random_cube(16, 16, 3, 9);
  EXPECT_THROW(lrx(c, {5, 5}), InvalidArgument);
  EXPECT_THROW(lrx(c, {4, 9}), InvalidArgument);
  EXPECT_THROW(lrx(c, {1, 9}), InvalidArgument);
  EXPECT_THROW(lrx(c, {13, 29}), InvalidArgument);  // outer larger than the cube
}

TEST(Lrx, OutlierIsStrictMaximum) {
  HsiCube base = random_cube(15, 15, 3, 10, 0.49, 0.51);
  std::vector<double> v(base.values().begin(), base.values().end());
  for (int b = 0; b < 3; ++b) v[(std::size_t(b) * 15 + 7) * 15 + 7] = b == 1 ? 0.9 : 0.2;
  const ScoreMap m = lrx(HsiCube(15, 15, 3, v), {3, 9});
  const std::size_t centre = 7 * 15 + 7;
  for (std::size_t i = 0; i < m.scores.size(); ++i)
    if (i != centre) EXPECT_LT(m.scores[i], m.scores[centre]);
  EXPECT_FALSE(m.fallback_used);
}

TEST(Lrx, MatchesRingOracle) {
  const HsiCube c = random_cube(15, 15, 3, 11);
  for (DualWindow dw : {DualWindow{3, 9}, DualWindow{5, 11}}) {
    const ScoreMap m = lrx(c, dw);
    const int ro = dw.outer / 2, ri = dw.inner / 2;
    for (int y = 0; y < 15; ++y)
      for (int x = 0; x < 15; ++x) {
        std::vector<Vec> ring;
        for (int yy = y - ro; yy <= y + ro; ++yy)
          for (int xx = x - ro; xx <= x + ro; ++xx) {
            if (yy < 0 || yy >= 15 || xx < 0 || xx >= 15) continue;
            if (std::abs(yy - y) <= ri && std::abs(xx - x) <= ri) continue;
            ring.push_back(c.spectrum(yy, xx));
          }
        const double want = mahalanobis(c.spectrum(y, x), two_pass(ring), kDefaultRidge);
        EXPECT_LE(std::abs(m.scores[std::size_t(y) * 15 + x] - want), 1e-6 * want) << y << "," << x;
      }
  }
}

TEST(Lrx, SmallRingsFallBackToGlobal) {
  const HsiCube c = random_cube(12, 12, 20, 12);
  const ScoreMap m = lrx(c, {3, 5});  // at most 16 ring pixels < B + 1
  EXPECT_TRUE(m.fallback_used);
  const ScoreMap g = grx(c);
  for (std::size_t i = 0; i < g.scores.size(); ++i) EXPECT_NEAR(m.scores[i], g.scores[i], 1e-9 * g.scores[i]);
}

TEST(Enhanced, IdentityNetworkEqualsGrx) {
  NetworkConfig cfg;
  cfg.channels = 8;
  cfg.window_partition = 4;
  cfg.height = cfg.width = 16;
  cfg.bands = 6;
  Rng rng(13);
  const NetParams p = init_params(cfg, rng, true);
  const HsiCube raw = random_cube(16, 16, 9, 14, 100.0, 900.0);
  const HsiCube prepared = prepare_network_input(raw, 6);
  EXPECT_EQ(prepared.bands(), 6);
  EXPECT_EQ(enhance_and_detect(raw, p).scores, grx(prepared).scores);
  const HsiCube residual = residual_map(prepared, p);
  for (double v : residual.values()) EXPECT_EQ(v, 0.0);
}

TEST(Enhanced, CompositionAndResidual) {
  NetworkConfig cfg;
  cfg.channels = 8;
  cfg.window_partition = 4;
  cfg.height = cfg.width = 16;
  cfg.bands = 6;
  Rng rng(15);
  NetParams p = init_params(cfg, rng);
  std::normal_distribution<double> n(0.0, 0.05);
  for (double& v : p.values) v += n(rng);
  const HsiCube raw = random_cube(16, 16, 6, 16);
  const HsiCube prepared = prepare_network_input(raw, 6);
  const ScoreMap a = enhance_and_detect(raw, p);
  const ScoreMap b = grx(forward(prepared, p));
  for (std::size_t i = 0; i < a.scores.size(); ++i) EXPECT_NEAR(a.scores[i], b.scores[i], 1e-12 * b.scores[i]);
  const HsiCube y = forward(prepared, p), r = residual_map(prepared, p);
  for (std::size_t i = 0; i < y.size(); ++i) ASSERT_EQ(y.values()[i], prepared.values()[i] + r.values()[i]);
  EXPECT_THROW(enhance_and_detect(random_cube(16, 16, 5, 17), p), InvalidArgument);
}

TEST(ScoreMapIo, CubeRoundTrip) {
  const ScoreMap m{2, 3, {0, 1, 2, 3, 4, 5}};
  const ScoreMap back = from_cube(to_cube(m));
  EXPECT_EQ(back.scores, m.scores);
  EXPECT_THROW(from_cube(random_cube(2, 3, 2, 1)), InvalidArgument);
}
