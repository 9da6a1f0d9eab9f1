#ifndef HSIAD_TRAINER_HPP
#define HSIAD_TRAINER_HPP

// Self-supervised training with random masks and per-epoch model selection
// by the largest global RX score on a validation cube.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "hsiad/aetnet.hpp"
#include "hsiad/checkpoint.hpp"
#include "hsiad/config.hpp"
#include "hsiad/cube.hpp"
#include "hsiad/detectors.hpp"
#include "hsiad/maskgen.hpp"
#include "hsiad/rng.hpp"

namespace hsiad {

struct TrainConfig {
  double learning_rate = 1e-4;
  double weight_decay = 5e-6;
  int batch_size = 16;
  int max_epochs = 200;
  int patience_epochs = 30;
  std::uint64_t seed = 0;
  FillMode fill_mode = FillMode::CutOut;
  MaskParams mask_params;
  LossKind loss = LossKind::Msgms;
  MsgmsConfig msgms;
  bool zero_residual_start = true;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int jobs = 1;  // worker threads per batch; results do not depend on it
};

inline void validate(const TrainConfig& c) {
  if (!(c.learning_rate > 0.0) || !(c.weight_decay >= 0.0)) {
    throw InvalidArgument("train config: learning_rate must be > 0 and weight_decay >= 0");
  }
  if (c.batch_size < 1 || c.max_epochs < 1 || c.patience_epochs < 1) {
    throw InvalidArgument("train config: batch_size, max_epochs and patience_epochs must be positive");
  }
  if (c.patience_epochs > c.max_epochs) throw InvalidArgument("train config: patience_epochs exceeds max_epochs");
  if (!(c.beta1 >= 0.0 && c.beta1 < 1.0 && c.beta2 >= 0.0 && c.beta2 < 1.0 && c.adam_eps > 0.0)) {
    throw InvalidArgument("train config: Adam constants out of range");
  }
  if (c.jobs < 1) throw InvalidArgument("train config: jobs must be >= 1");
  validate_mask_params(c.mask_params);
}

/// Adam with bias-corrected moments and weight decay applied directly to the weights.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;

  void update(ParamBuffer& params, const ParamBuffer& grad, const TrainConfig& c) {
    if (m.empty()) {
      m.assign(params.size(), 0.0);
      v.assign(params.size(), 0.0);
    }
    ++step;
    const double bc1 = 1.0 - std::pow(c.beta1, double(step));
    const double bc2 = 1.0 - std::pow(c.beta2, double(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * grad[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
      const double mh = m[i] / bc1, vh = v[i] / bc2;
      params[i] -= c.learning_rate * (mh / (std::sqrt(vh) + c.adam_eps) + c.weight_decay * params[i]);
    }
  }
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double metric = 0.0;
  bool new_peak = false;  // exceeded every earlier epoch when observed
  double seconds = 0.0;
};

/// Tracks the peak of the per-epoch metric. Ties do not count as a new peak.
struct DomainSearchState {
  double best_metric = -std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  std::optional<NetParams> best_params;
  int epochs_since_peak = 0;
  std::vector<EpochRecord> history;

  bool observe(EpochRecord rec, const NetParams* params = nullptr) {
    rec.new_peak = std::isfinite(rec.metric) && rec.metric > best_metric;
    if (rec.new_peak) {
      best_metric = rec.metric;
      best_epoch = rec.epoch;
      epochs_since_peak = 0;
      if (params) best_params = *params;
    } else {
      ++epochs_since_peak;
    }
    history.push_back(rec);
    return rec.new_peak;
  }

  bool should_stop(const TrainConfig& c) const {
    return int(history.size()) >= c.max_epochs || (best_epoch > 0 && epochs_since_peak >= c.patience_epochs);
  }
};

/// Largest GRX score of the reconstructed validation cube (already in network input space).
inline double domain_metric(const NetParams& params, const HsiCube& val_prepared,
                            double ridge_eps = kDefaultRidge) {
  return grx(forward(val_prepared, params), ridge_eps).max();
}

struct TrainingItem {
  HsiCube cube;
  std::string source_tag;  // e.g. flight line; CutMix donors must differ
};

struct MaskedPair {
  HsiCube masked;
  HsiCube original;
  MaskMap mask;
};

/// Rotates/flips `cube`, then fills a fresh random mask. For CutMix the donor
/// is drawn uniformly from pool entries whose tag differs from `own_tag`.
template <class R>
MaskedPair augment_and_mask(const HsiCube& cube, const MaskParams& mask_params, FillMode fill_mode,
                            const std::vector<TrainingItem>& donor_pool, R& rng,
                            const std::string& own_tag = {}) {
  MaskedPair out;
  out.original = random_rotate_flip(cube, rng);
  out.mask = generate_mask_map(cube.height(), cube.width(), mask_params, rng);
  FillSpec fill{fill_mode, nullptr};
  if (fill_mode == FillMode::CutMix) {
    std::vector<const TrainingItem*> eligible;
    for (const auto& d : donor_pool)
      if (d.source_tag != own_tag) eligible.push_back(&d);
    if (eligible.empty()) throw InvalidArgument("CutMix needs a donor from a different source tag");
    std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
    fill.donor = &eligible[pick(rng)]->cube;
    require_same_shape(*fill.donor, cube, "CutMix donor");
  }
  out.masked = apply_mask(out.original, out.mask, fill);
  return out;
}

struct TrainReport {
  std::vector<EpochRecord> history;
  int selected_epoch = 0;
  int stop_epoch = 0;
  double best_metric = 0.0;
  std::filesystem::path checkpoint_path;  // empty unless written
  std::filesystem::path log_path;
};

struct TrainHooks {
  /// Replaces domain_metric when set (used for scripted model-selection runs).
  std::function<double(int epoch, const NetParams&)> metric;
  std::function<void(const EpochRecord&)> on_epoch;
  /// When set, the selected checkpoint and the epoch log are written here.
  std::filesystem::path output_dir;
};

struct TrainResult {
  NetParams params;
  TrainReport report;
};

inline void write_epoch_log(std::ostream& out, const std::vector<EpochRecord>& history, int best_epoch,
                            bool with_seconds = true) {
  out << "epoch,mean_loss,domain_metric,is_peak" << (with_seconds ? ",seconds" : "") << '\n'
      << std::setprecision(17);
  for (const auto& r : history) {
    out << r.epoch << ',' << r.mean_loss << ',' << r.metric << ',' << (r.epoch == best_epoch ? 1 : 0);
    if (with_seconds) out << ',' << std::setprecision(6) << r.seconds << std::setprecision(17);
    out << '\n';
  }
}

namespace detail {

/// Runs fn(i) for i in [0, n) on up to `jobs` threads.
template <class Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(std::size_t(std::max(jobs, 1)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

/// Trains from raw cubes: each is reduced to the configured bands and scaled
/// to [-0.1, 0.1] before use. Returns the parameters of the peak epoch.
inline TrainResult train(const std::vector<TrainingItem>& raw_items, const HsiCube& val_cube,
                         const NetworkConfig& net_cfg, const TrainConfig& cfg, const TrainHooks& hooks = {}) {
  validate(net_cfg);
  validate(cfg);
  if (raw_items.empty()) throw InvalidArgument("train: empty training set");
  std::vector<TrainingItem> items;
  items.reserve(raw_items.size());
  for (const auto& it : raw_items) {
    if (it.cube.height() != net_cfg.height || it.cube.width() != net_cfg.width || it.cube.bands() < net_cfg.bands) {
      throw InvalidArgument("train: cube " + shape_string(it.cube) + " does not conform to the network input");
    }
    items.push_back({prepare_network_input(it.cube, net_cfg.bands), it.source_tag});
  }
  if (val_cube.height() != net_cfg.height || val_cube.width() != net_cfg.width || val_cube.bands() < net_cfg.bands) {
    throw InvalidArgument("train: validation cube " + shape_string(val_cube) + " does not conform");
  }
  const HsiCube val = prepare_network_input(val_cube, net_cfg.bands);

  Rng init_rng = make_rng(cfg.seed, {tag(Stream::Init)});
  NetParams params = init_params(net_cfg, init_rng, cfg.zero_residual_start);
  AdamState adam;
  DomainSearchState search;

  const std::size_t n = items.size();
  std::vector<double> item_loss(n);
  std::vector<NetParams> item_grad(std::min<std::size_t>(n, std::size_t(cfg.batch_size)));

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = make_rng(cfg.seed, {tag(Stream::Shuffle), std::uint64_t(epoch)});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    for (std::size_t start = 0; start < n; start += std::size_t(cfg.batch_size)) {
      const std::size_t count = std::min(n - start, std::size_t(cfg.batch_size));
      detail::parallel_for(count, cfg.jobs, [&](std::size_t k) {
        const std::size_t pos = start + k;
        const TrainingItem& item = items[order[pos]];
        Rng rng = make_rng(cfg.seed, {tag(Stream::Item), std::uint64_t(epoch), std::uint64_t(pos)});
        MaskedPair pair = augment_and_mask(item.cube, cfg.mask_params, cfg.fill_mode, items, rng, item.source_tag);
        LossGrad lg = loss_and_grad(pair.masked, pair.original, params, cfg.loss, cfg.msgms);
        item_loss[pos] = lg.loss;
        item_grad[k] = std::move(lg.grads);
      });
      ParamBuffer grad(params.size(), 0.0);
      for (std::size_t k = 0; k < count; ++k)
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += item_grad[k].values[i];
      for (double& g : grad) g /= double(count);
      adam.update(params.values, grad, cfg);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    for (double l : item_loss) rec.mean_loss += l;
    rec.mean_loss /= double(n);
    rec.metric = hooks.metric ? hooks.metric(epoch, params) : domain_metric(params, val);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    search.observe(rec, &params);
    if (hooks.on_epoch) hooks.on_epoch(search.history.back());
    if (search.should_stop(cfg)) break;
  }

  TrainResult result{search.best_params ? *search.best_params : params, {}};
  TrainReport& rep = result.report;
  rep.history = search.history;
  rep.selected_epoch = search.best_epoch;
  rep.stop_epoch = int(search.history.size());
  rep.best_metric = search.best_metric;
  if (!hooks.output_dir.empty()) {
    std::filesystem::create_directories(hooks.output_dir);
    rep.checkpoint_path = hooks.output_dir / "model";
    save_checkpoint(result.params, rep.checkpoint_path);
    rep.log_path = hooks.output_dir / "epochs.csv";
    std::ofstream log(rep.log_path);
    if (!log) throw IoError("cannot write " + rep.log_path.string());
    write_epoch_log(log, rep.history, rep.selected_epoch);
  }
  return result;
}

inline std::vector<TrainingItem> tag_by_index(const std::vector<HsiCube>& cubes) {
  std::vector<TrainingItem> items;
  for (std::size_t i = 0; i < cubes.size(); ++i) items.push_back({cubes[i], "cube" + std::to_string(i)});
  return items;
}

// JSON for TrainConfig

inline const char* to_string(FillMode m) { return m == FillMode::CutOut ? "CutOut" : "CutMix"; }
inline const char* to_string(LossKind k) { return k == LossKind::Msgms ? "MSGMS" : "L2"; }

inline Json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"patience_epochs", c.patience_epochs},
          {"seed", c.seed},
          {"fill_mode", to_string(c.fill_mode)},
          {"mask_params", to_json(c.mask_params)},
          {"loss", to_string(c.loss)},
          {"msgms", to_json(c.msgms)},
          {"zero_residual_start", c.zero_residual_start},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_eps", c.adam_eps},
          {"jobs", c.jobs}};
}

inline void read_into(const Json& j, TrainConfig& c, const std::string& where = "train") {
  StrictObject o(j, where);
  o.get("learning_rate", c.learning_rate);
  o.get("weight_decay", c.weight_decay);
  o.get("batch_size", c.batch_size);
  o.get("max_epochs", c.max_epochs);
  o.get("patience_epochs", c.patience_epochs);
  o.get("seed", c.seed);
  std::string fill = to_string(c.fill_mode), loss = to_string(c.loss);
  o.get("fill_mode", fill);
  o.get("loss", loss);
  if (fill == "CutOut") c.fill_mode = FillMode::CutOut;
  else if (fill == "CutMix") c.fill_mode = FillMode::CutMix;
  else throw ConfigError(where + ".fill_mode: expected CutOut or CutMix, got '" + fill + "'");
  if (loss == "MSGMS") c.loss = LossKind::Msgms;
  else if (loss == "L2") c.loss = LossKind::L2;
  else throw ConfigError(where + ".loss: expected MSGMS or L2, got '" + loss + "'");
  if (const Json* m = o.child("mask_params")) read_into(*m, c.mask_params, where + ".mask_params");
  if (const Json* m = o.child("msgms")) read_into(*m, c.msgms, where + ".msgms");
  o.get("zero_residual_start", c.zero_residual_start);
  o.get("beta1", c.beta1);
  o.get("beta2", c.beta2);
  o.get("adam_eps", c.adam_eps);
  o.get("jobs", c.jobs);
  o.finish();
  validate(c);
}

}  // namespace hsiad

#endif  // HSIAD_TRAINER_HPP
