#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "hsiad/eval.hpp"
#include "hsiad/rng.hpp"
#include "hsiad/synth.hpp"

using namespace hsiad;

namespace {

struct Case {
  ScoreMap score;
  GroundTruthMap gt;
};

// Random map; `levels` > 0 quantizes scores to force ties.
Case random_case(int h, int w, std::uint64_t seed, int levels = 0) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::uint8_t> labels(std::size_t(h) * w, 0);
  std::vector<double> s(labels.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    labels[i] = u(rng) < 0.1 ? 1 : 0;
    double v = u(rng) + (labels[i] ? 0.3 : 0.0);
    if (levels > 0) v = std::floor(v * levels) / levels;
    s[i] = v;
  }
  labels[0] = 1;
  labels[1] = 0;
  return {{h, w, s}, GroundTruthMap(h, w, labels)};
}

double rank_statistic(const ScoreMap& s, const GroundTruthMap& gt) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!gt.is_target(i)) continue;
    for (std::size_t j = 0; j < gt.size(); ++j) {
      if (gt.is_target(j)) continue;
      wins += s.scores[i] > s.scores[j] ? 1.0 : (s.scores[i] == s.scores[j] ? 0.5 : 0.0);
      ++pairs;
    }
  }
  return wins / double(pairs);
}

// Clip at the lower median target score, max-min normalize, sweep every tau,
// integrate both rate curves by trapezoids and take the dB ratio.
double oracle_asnpr(const ScoreMap& s, const GroundTruthMap& gt) {
  std::vector<double> t;
  for (std::size_t i = 0; i < gt.size(); ++i)
    if (gt.is_target(i)) t.push_back(s.scores[i]);
  std::sort(t.begin(), t.end());
  const double clip = t[(t.size() - 1) / 2];
  std::vector<double> v = s.scores;
  for (double& x : v) x = std::min(x, clip);
  const double lo = *std::min_element(v.begin(), v.end()), hi = *std::max_element(v.begin(), v.end());
  if (hi == lo) return 0.0;
  for (double& x : v) x = (x - lo) / (hi - lo);
  std::set<double> taus(v.begin(), v.end());
  taus.insert(0.0);
  taus.insert(1.0);
  std::vector<double> tv(taus.begin(), taus.end());
  double ad = 0.0, af = 0.0, prev_pd = 0.0, prev_pf = 0.0;
  for (std::size_t k = 0; k < tv.size(); ++k) {
    double tp = 0, fp = 0, np = 0, nn = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (gt.is_target(i)) {
        ++np;
        tp += v[i] >= tv[k];
      } else {
        ++nn;
        fp += v[i] >= tv[k];
      }
    }
    const double pd = tp / np, pf = fp / nn;
    if (k > 0) {
      ad += 0.5 * (tv[k] - tv[k - 1]) * (pd + prev_pd);
      af += 0.5 * (tv[k] - tv[k - 1]) * (pf + prev_pf);
    }
    prev_pd = pd;
    prev_pf = pf;
  }
  return 10.0 * std::log10(ad / af);
}

ScoreMap transformed(const ScoreMap& s, double (*f)(double)) {
  ScoreMap out = s;
  for (double& v : out.scores) v = f(v);
  return out;
}

}  // namespace

TEST(Roc, PerfectDetector) {
  const GroundTruthMap gt(2, 3, {1, 0, 0, 1, 0, 0});
  const ScoreMap s{2, 3, {1, 0, 0, 1, 0, 0}};
  const RocCurve c = roc(s, gt);
  ASSERT_EQ(c.points.size(), 3u);
  EXPECT_EQ(c.points[0].pf, 0.0);
  EXPECT_EQ(c.points[0].pd, 0.0);
  EXPECT_EQ(c.points[1].pf, 0.0);
  EXPECT_EQ(c.points[1].pd, 1.0);
  EXPECT_EQ(c.points[2].pf, 1.0);
  EXPECT_EQ(c.points[2].pd, 1.0);
  EXPECT_EQ(c.points[1].tp, 2u);
  EXPECT_EQ(c.points[1].tn, 4u);
  EXPECT_EQ(auc(c), 1.0);
}

TEST(Roc, AllEqualIsHalf) {
  const Case k = random_case(8, 8, 1);
  EXPECT_EQ(auc(ScoreMap{8, 8, std::vector<double>(64, 0.7)}, k.gt), 0.5);
}

TEST(Roc, RatesAreMonotoneWithEndpoints) {
  const Case k = random_case(16, 16, 2, 20);
  const RocCurve c = roc(k.score, k.gt);
  EXPECT_TRUE(std::isinf(c.points.front().tau));
  EXPECT_EQ(c.points.back().pd, 1.0);
  EXPECT_EQ(c.points.back().pf, 1.0);
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    EXPECT_LT(c.points[i].tau, c.points[i - 1].tau);
    EXPECT_GE(c.points[i].pd, c.points[i - 1].pd);
    EXPECT_GE(c.points[i].pf, c.points[i - 1].pf);
  }
}

TEST(Roc, MatchesRankStatistic) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Case k = random_case(16, 16, 10 + s, s % 2 ? 8 : 0);
    EXPECT_NEAR(auc(k.score, k.gt), rank_statistic(k.score, k.gt), 1e-9) << "seed " << s;
  }
}

TEST(Roc, RejectsDegenerateTruthAndShapes) {
  const ScoreMap s{2, 2, {1, 2, 3, 4}};
  EXPECT_THROW(roc(s, GroundTruthMap(2, 2, {0, 0, 0, 0})), InvalidArgument);
  EXPECT_THROW(roc(s, GroundTruthMap(1, 4, {1, 0, 0, 0})), InvalidArgument);
  EXPECT_THROW(adaptive_truncate(s, GroundTruthMap(2, 2, {0, 0, 0, 0})), InvalidArgument);
}

TEST(Auc, InvariantUnderIncreasingTransforms) {
  const Case k = random_case(16, 16, 3, 10);
  const double a = auc(k.score, k.gt);
  EXPECT_NEAR(auc(transformed(k.score, [](double v) { return std::exp(3.0 * v); }), k.gt), a, 1e-12);
  EXPECT_NEAR(auc(transformed(k.score, [](double v) { return v * v * v - 2.0; }), k.gt), a, 1e-12);
}

TEST(AdaptiveTruncate, ClipsAtLowerMedianTarget) {
  const GroundTruthMap gt(2, 4, {1, 1, 1, 0, 0, 0, 0, 0});
  const ScoreMap s{2, 4, {0.2, 0.6, 1.0, 0.1, 0.5, 0.9, 0.0, 0.3}};
  const ScoreMap t = adaptive_truncate(s, gt);
  EXPECT_EQ(t.scores, (std::vector<double>{0.2, 0.6, 0.6, 0.1, 0.5, 0.6, 0.0, 0.3}));
  // even count takes the lower middle value
  const GroundTruthMap g2(1, 9, {1, 1, 1, 1, 0, 0, 0, 0, 0});
  EXPECT_EQ(adaptive_truncate(ScoreMap{1, 9, {4, 1, 3, 2, 9, 0, 0, 0, 0}}, g2).scores,
            (std::vector<double>{2, 1, 2, 2, 2, 0, 0, 0, 0}));
  // one shared target score: only background above it moves
  const GroundTruthMap g3(1, 5, {1, 1, 0, 0, 0});
  EXPECT_EQ(adaptive_truncate(ScoreMap{1, 5, {0.5, 0.5, 0.2, 0.8, 0.1}}, g3).scores,
            (std::vector<double>{0.5, 0.5, 0.2, 0.5, 0.1}));
}

TEST(ThresholdAucs, PerfectBinaryMap) {
  // tau in {0, 1}: P_d = (1, 1), P_f = (1, 0)
  const GroundTruthMap gt(2, 3, {1, 0, 0, 1, 0, 0});
  const ThresholdAucs t = threshold_aucs(ScoreMap{2, 3, {1, 0, 0, 1, 0, 0}}, gt);
  EXPECT_FALSE(t.degenerate);
  EXPECT_EQ(t.auc_d_tau, 1.0);
  EXPECT_EQ(t.auc_f_tau, 0.5);
  EXPECT_DOUBLE_EQ(snpr_db(ScoreMap{2, 3, {1, 0, 0, 1, 0, 0}}, gt), 10.0 * std::log10(2.0));
}

TEST(ThresholdAucs, AllEqualIsDegenerate) {
  const GroundTruthMap gt(2, 2, {1, 0, 0, 0});
  const ScoreMap zero{2, 2, {0, 0, 0, 0}};
  EXPECT_TRUE(threshold_aucs(zero, gt).degenerate);
  EXPECT_EQ(asnpr_db(zero, gt), 0.0);
  EXPECT_EQ(auc(zero, gt), 0.5);
}

TEST(ThresholdAucs, SquareChangesTauAreasButNotAuc) {
  const Case k = random_case(16, 16, 4);
  const ScoreMap sq = transformed(k.score, [](double v) { return v * v; });
  EXPECT_NEAR(auc(sq, k.gt), auc(k.score, k.gt), 1e-12);
  const ThresholdAucs a = threshold_aucs(k.score, k.gt), b = threshold_aucs(sq, k.gt);
  EXPECT_NE(a.auc_d_tau, b.auc_d_tau);
  EXPECT_NE(a.auc_f_tau, b.auc_f_tau);
  for (double v : {a.auc_d_tau, a.auc_f_tau, b.auc_d_tau, b.auc_f_tau}) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Asnpr, IgnoresMagnitudeOfExtremeTarget) {
  std::vector<double> s(64);
  Rng rng(5);
  std::uniform_real_distribution<double> u(0.0, 0.4);
  for (double& v : s) v = u(rng);
  std::vector<std::uint8_t> labels(64, 0);
  labels[10] = labels[20] = 1;
  s[10] = 0.5;
  s[20] = 100.0;
  const GroundTruthMap gt(8, 8, labels);
  const ScoreMap m{8, 8, s};
  s[20] = 1e4;
  const ScoreMap bigger{8, 8, s};
  // the untruncated ratio is inflated by the squashed background and moves with the outlier
  EXPECT_LT(asnpr_db(m, gt), snpr_db(m, gt));
  EXPECT_NE(snpr_db(m, gt), snpr_db(bigger, gt));
  EXPECT_EQ(asnpr_db(m, gt), asnpr_db(bigger, gt));
}

TEST(Asnpr, AffineInvariance) {
  const Case k = random_case(16, 16, 6);
  const double a = asnpr_db(k.score, k.gt);
  ScoreMap t = k.score;
  for (double& v : t.scores) v = 7.5 * v + 3.25;
  EXPECT_NEAR(asnpr_db(t, k.gt), a, 1e-9);
}

TEST(Asnpr, MatchesStraightLinePipelineOnGrxScene) {
  SynthParams p;
  p.height = p.width = 32;
  p.bands = 12;
  p.anomaly_count = 2;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Scene sc = synth_scene(p, seed);
    const ScoreMap m = grx(sc.cube);
    const double got = asnpr_db(m, sc.truth);
    EXPECT_GT(got, 0.0);
    EXPECT_NEAR(got, oracle_asnpr(m, sc.truth), 1e-9);
  }
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Case k = random_case(12, 12, 40 + s, s % 2 ? 6 : 0);
    EXPECT_NEAR(asnpr_db(k.score, k.gt), oracle_asnpr(k.score, k.gt), 1e-9);
  }
}

TEST(Asnpr, CappedWhenBackgroundVanishes) {
  // after clipping, every background pixel sits at the minimum
  const GroundTruthMap gt(1, 4, {1, 0, 0, 0});
  EXPECT_EQ(asnpr_db(ScoreMap{1, 4, {1, 0, 0, 0}}, gt), 10.0 * std::log10(2.0));
  EXPECT_LE(asnpr_db(ScoreMap{1, 4, {5, 0, 0, 0}}, gt), kSnprCapDb);
}

TEST(Summarize, MeansAndCsv) {
  SceneMetrics a{"a", 1.0, 0.9, 0.1, 9.54, 0.5}, b{"b", 0.9, 0.8, 0.2, 6.02, 1.5};
  const BenchmarkSummary one = summarize({a});
  EXPECT_EQ(one.mean_auc, 1.0);
  EXPECT_EQ(one.mean_asnpr_db, 9.54);
  EXPECT_EQ(one.mean_seconds, 0.5);
  const BenchmarkSummary two = summarize({a, b});
  EXPECT_DOUBLE_EQ(two.mean_auc, 0.95);
  EXPECT_DOUBLE_EQ(two.mean_seconds, 1.0);
  EXPECT_EQ(summarize({b, a}).mean_asnpr_db, two.mean_asnpr_db);
  EXPECT_THROW(summarize({}), InvalidArgument);

  std::ostringstream os;
  write_metrics_csv(os, two);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "scene_id,auc,auc_d_tau,auc_f_tau,asnpr_db,seconds");
  std::getline(is, line);
  EXPECT_EQ(line.substr(0, 4), "a,1,");
  std::getline(is, line);
  std::getline(is, line);
  EXPECT_EQ(line.substr(0, 10), "MEAN,0.95,");
}

TEST(EvaluateScene, FieldsAgree) {
  const Case k = random_case(16, 16, 7);
  const SceneMetrics m = evaluate_scene("s", k.score, k.gt, 0.25);
  EXPECT_EQ(m.auc, auc(k.score, k.gt));
  EXPECT_EQ(m.asnpr_db, asnpr_db(k.score, k.gt));
  EXPECT_EQ(m.auc_d_tau, threshold_aucs(k.score, k.gt).auc_d_tau);
  EXPECT_EQ(m.seconds, 0.25);
}
