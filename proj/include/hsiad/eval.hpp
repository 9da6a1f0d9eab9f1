#ifndef HSIAD_EVAL_HPP
#define HSIAD_EVAL_HPP

// Detection-map scoring: ROC/AUC, threshold-axis AUCs and the adaptive
// signal-to-noise probability ratio, plus dataset summaries.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "hsiad/cube.hpp"
#include "hsiad/detectors.hpp"
#include "hsiad/error.hpp"

namespace hsiad {

inline constexpr double kSnprCapDb = 80.0;

struct RocPoint {
  double tau = 0.0;
  double pd = 0.0;
  double pf = 0.0;
  std::size_t tp = 0, fn = 0, fp = 0, tn = 0;
};

/// Points ordered by descending threshold; the first is the (0, 0) sentinel
/// above the maximum score.
struct RocCurve {
  std::vector<RocPoint> points;
};

namespace detail {

inline void check_scored_truth(const ScoreMap& s, const GroundTruthMap& gt, const char* what) {
  if (s.height != gt.height() || s.width != gt.width() || s.scores.size() != gt.size()) {
    throw InvalidArgument(std::string(what) + ": score map and ground truth sizes differ");
  }
  const std::size_t t = gt.target_count();
  if (t == 0) throw InvalidArgument(std::string(what) + ": ground truth has no target pixels");
  if (t == gt.size()) throw InvalidArgument(std::string(what) + ": ground truth has no background pixels");
}

/// Sum of values in ascending order, so the result does not depend on input order.
inline double sorted_sum(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace detail

inline RocCurve roc(const ScoreMap& score, const GroundTruthMap& gt) {
  detail::check_scored_truth(score, gt, "roc");
  const std::size_t n = score.scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return score.scores[a] > score.scores[b]; });
  const std::size_t pos = gt.target_count(), neg = n - pos;

  RocCurve c;
  c.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0, 0, pos, 0, neg});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < n;) {
    const double tau = score.scores[order[i]];
    while (i < n && score.scores[order[i]] == tau) {
      if (gt.is_target(order[i])) ++tp; else ++fp;
      ++i;
    }
    c.points.push_back({tau, double(tp) / double(pos), double(fp) / double(neg), tp, pos - tp, fp, neg - fp});
  }
  return c;
}

/// Trapezoid area under (P_f, P_d).
inline double auc(const RocCurve& c) {
  double a = 0.0;
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    const auto& p = c.points[i - 1];
    const auto& q = c.points[i];
    a += 0.5 * (q.pf - p.pf) * (q.pd + p.pd);
  }
  return a;
}

inline double auc(const ScoreMap& score, const GroundTruthMap& gt) { return auc(roc(score, gt)); }

/// Clips every score at the lower median of the target scores.
inline ScoreMap adaptive_truncate(const ScoreMap& score, const GroundTruthMap& gt) {
  if (score.scores.size() != gt.size()) throw InvalidArgument("adaptive_truncate: size mismatch");
  std::vector<double> t;
  for (std::size_t i = 0; i < gt.size(); ++i)
    if (gt.is_target(i)) t.push_back(score.scores[i]);
  if (t.empty()) throw InvalidArgument("adaptive_truncate: ground truth has no target pixels");
  const std::size_t mid = (t.size() - 1) / 2;
  std::nth_element(t.begin(), t.begin() + std::ptrdiff_t(mid), t.end());
  const double clip = t[mid];
  ScoreMap out = score;
  for (double& v : out.scores) v = std::min(v, clip);
  return out;
}

struct ThresholdAucs {
  double auc_d_tau = 0.0;
  double auc_f_tau = 0.0;
  bool degenerate = false;  // all scores equal; both areas reported as 0
};

/// Areas under P_d(tau) and P_f(tau) on the max-min normalized map, with tau
/// running over the unique normalized scores plus 0 and 1.
inline ThresholdAucs threshold_aucs(const ScoreMap& score, const GroundTruthMap& gt) {
  detail::check_scored_truth(score, gt, "threshold_aucs");
  const auto [mn_it, mx_it] = std::minmax_element(score.scores.begin(), score.scores.end());
  const double mn = *mn_it, span = *mx_it - *mn_it;
  ThresholdAucs out;
  if (!(span > 0.0)) {
    out.degenerate = true;
    return out;
  }
  std::vector<double> norm(score.scores.size());
  for (std::size_t i = 0; i < norm.size(); ++i) norm[i] = (score.scores[i] - mn) / span;

  std::vector<double> taus = norm;
  taus.push_back(0.0);
  taus.push_back(1.0);
  std::sort(taus.begin(), taus.end());
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());

  // Sweep thresholds upward over the sorted scores, counting pixels still >= tau.
  std::vector<std::size_t> order(norm.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return norm[a] < norm[b]; });
  const double pos = double(gt.target_count()), neg = double(gt.size()) - pos;
  std::size_t below = 0, tgt_below = 0;
  std::vector<double> pd(taus.size()), pf(taus.size());
  for (std::size_t k = 0; k < taus.size(); ++k) {
    while (below < order.size() && norm[order[below]] < taus[k]) {
      if (gt.is_target(order[below])) ++tgt_below;
      ++below;
    }
    const double tgt_above = pos - double(tgt_below);
    const double bg_above = neg - double(below - tgt_below);
    pd[k] = tgt_above / pos;
    pf[k] = bg_above / neg;
  }
  for (std::size_t k = 1; k < taus.size(); ++k) {
    const double dt = taus[k] - taus[k - 1];
    out.auc_d_tau += 0.5 * dt * (pd[k] + pd[k - 1]);
    out.auc_f_tau += 0.5 * dt * (pf[k] + pf[k - 1]);
  }
  return out;
}

/// 10 log10(AUC_d,tau / AUC_f,tau); 0 dB for an all-equal map, capped at +80 dB.
inline double snpr_db(const ScoreMap& score, const GroundTruthMap& gt) {
  const ThresholdAucs t = threshold_aucs(score, gt);
  if (t.degenerate) return 0.0;
  if (!(t.auc_f_tau > 0.0)) return t.auc_d_tau > 0.0 ? kSnprCapDb : 0.0;
  return std::min(kSnprCapDb, 10.0 * std::log10(t.auc_d_tau / t.auc_f_tau));
}

/// snpr_db evaluated on the target-median truncated map.
inline double asnpr_db(const ScoreMap& score, const GroundTruthMap& gt) {
  return snpr_db(adaptive_truncate(score, gt), gt);
}

struct SceneMetrics {
  std::string scene_id;
  double auc = 0.0;
  double auc_d_tau = 0.0;  // untruncated map
  double auc_f_tau = 0.0;
  double asnpr_db = 0.0;
  double seconds = 0.0;
};

inline SceneMetrics evaluate_scene(const std::string& id, const ScoreMap& score, const GroundTruthMap& gt,
                                   double seconds = 0.0) {
  SceneMetrics m;
  m.scene_id = id;
  m.auc = auc(score, gt);
  const ThresholdAucs t = threshold_aucs(score, gt);
  m.auc_d_tau = t.auc_d_tau;
  m.auc_f_tau = t.auc_f_tau;
  m.asnpr_db = asnpr_db(score, gt);
  m.seconds = seconds;
  return m;
}

struct BenchmarkSummary {
  std::vector<SceneMetrics> scenes;
  double mean_auc = 0.0;
  double mean_auc_d_tau = 0.0;
  double mean_auc_f_tau = 0.0;
  double mean_asnpr_db = 0.0;
  double mean_seconds = 0.0;
};

inline BenchmarkSummary summarize(const std::vector<SceneMetrics>& results) {
  if (results.empty()) throw InvalidArgument("summarize: no scene metrics");
  BenchmarkSummary s;
  s.scenes = results;
  const double n = double(results.size());
  auto mean_of = [&](double SceneMetrics::*field) {
    std::vector<double> v;
    v.reserve(results.size());
    for (const auto& r : results) v.push_back(r.*field);
    return detail::sorted_sum(std::move(v)) / n;
  };
  s.mean_auc = mean_of(&SceneMetrics::auc);
  s.mean_auc_d_tau = mean_of(&SceneMetrics::auc_d_tau);
  s.mean_auc_f_tau = mean_of(&SceneMetrics::auc_f_tau);
  s.mean_asnpr_db = mean_of(&SceneMetrics::asnpr_db);
  s.mean_seconds = mean_of(&SceneMetrics::seconds);
  return s;
}

inline void write_metrics_csv(std::ostream& out, const BenchmarkSummary& s) {
  out << "scene_id,auc,auc_d_tau,auc_f_tau,asnpr_db,seconds\n" << std::setprecision(10);
  for (const auto& r : s.scenes) {
    out << r.scene_id << ',' << r.auc << ',' << r.auc_d_tau << ',' << r.auc_f_tau << ',' << r.asnpr_db << ','
        << r.seconds << '\n';
  }
  out << "MEAN," << s.mean_auc << ',' << s.mean_auc_d_tau << ',' << s.mean_auc_f_tau << ',' << s.mean_asnpr_db
      << ',' << s.mean_seconds << '\n';
}

inline void write_metrics_csv(const std::filesystem::path& path, const BenchmarkSummary& s) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_metrics_csv(out, s);
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace hsiad

#endif  // HSIAD_EVAL_HPP
