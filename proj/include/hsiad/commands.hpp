#ifndef HSIAD_COMMANDS_HPP
#define HSIAD_COMMANDS_HPP

// Batch commands behind the command-line tool. Each command stages its
// outputs in a temporary sibling directory and promotes them only when the
// whole command succeeded.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "hsiad/checkpoint.hpp"
#include "hsiad/config.hpp"
#include "hsiad/detectors.hpp"
#include "hsiad/eval.hpp"
#include "hsiad/io.hpp"
#include "hsiad/maskgen.hpp"
#include "hsiad/rng.hpp"
#include "hsiad/synth.hpp"
#include "hsiad/trainer.hpp"

namespace hsiad::cmd {

/// Output directory that only appears once `commit()` runs.
class StagedDir {
 public:
  explicit StagedDir(fs::path target) : target_(std::move(target)) {
    if (target_.empty()) throw InvalidArgument("an output directory is required (--out)");
    const fs::path parent = fs::absolute(target_).parent_path();
    fs::create_directories(parent);
    stage_ = parent / ("." + target_.filename().string() + ".staging-" + std::to_string(::getpid()));
    fs::remove_all(stage_);
    fs::create_directories(stage_);
  }
  StagedDir(const StagedDir&) = delete;
  StagedDir& operator=(const StagedDir&) = delete;
  ~StagedDir() {
    std::error_code ec;
    if (!committed_) fs::remove_all(stage_, ec);
  }

  const fs::path& path() const { return stage_; }

  void commit() {
    if (!fs::exists(target_)) {
      fs::rename(stage_, target_);
    } else {
      move_into(stage_, target_);
      fs::remove_all(stage_);
    }
    committed_ = true;
  }

 private:
  static void move_into(const fs::path& from, const fs::path& to) {
    for (const auto& e : fs::directory_iterator(from)) {
      const fs::path dst = to / e.path().filename();
      if (e.is_directory() && fs::is_directory(dst)) {
        move_into(e.path(), dst);
      } else {
        if (fs::exists(dst)) fs::remove_all(dst);
        fs::rename(e.path(), dst);
      }
    }
  }

  fs::path target_;
  fs::path stage_;
  bool committed_ = false;
};

/// Cube stems (path without extension) of every .json cube header in `dir`, sorted.
inline std::vector<fs::path> list_cubes(const fs::path& dir) {
  if (fs::is_regular_file(dir) || fs::is_regular_file(with_suffix(cube_stem(dir), ".json"))) {
    return {cube_stem(dir)};
  }
  if (!fs::is_directory(dir)) throw IoError("no such directory " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") out.push_back(cube_stem(e.path()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::string scene_name(const std::string& prefix, std::size_t i) {
  std::ostringstream os;
  os << prefix << std::setw(3) << std::setfill('0') << i;
  return os.str();
}

// synth

struct SynthOptions {
  SynthParams params;
  int train_count = 32;
  int val_count = 1;
  int test_count = 10;
  std::uint64_t seed = 0;
  bool library_seed_set = false;
};

inline void read_into(const Json& j, SynthOptions& o) {
  StrictObject r(j, "synth config");
  if (const Json* s = r.child("synth")) {
    o.library_seed_set = s->contains("library_seed");
    hsiad::read_into(*s, o.params, "synth");
  }
  r.get("train_count", o.train_count);
  r.get("val_count", o.val_count);
  r.get("test_count", o.test_count);
  r.get("seed", o.seed);
  r.finish();
  if (o.train_count < 0 || o.val_count < 0 || o.test_count < 0) throw ConfigError("synth counts must be >= 0");
}

/// Writes train/ (anomaly-free cubes), val/ and test/ (cubes with PGM truths) and manifest.json.
inline void synth(const SynthOptions& o, const fs::path& out) {
  SynthParams p = o.params;
  if (!o.library_seed_set) p.library_seed = derive_seed(o.seed, {tag(Stream::Library)});
  validate(p);
  StagedDir stage(out);
  Json manifest = {{"seed", o.seed}, {"synth", to_json(p)}};
  struct Split {
    const char* name;
    const char* prefix;
    int count;
    bool anomalies;
  };
  const Split splits[] = {{"train", "cube", o.train_count, false},
                          {"val", "val", o.val_count, true},
                          {"test", "scene", o.test_count, true}};
  std::uint64_t split_tag = 0;
  for (const auto& s : splits) {
    ++split_tag;
    const fs::path dir = stage.path() / s.name;
    fs::create_directories(dir);
    SynthParams sp = p;
    if (!s.anomalies) sp.anomaly_count = 0;
    Json files = Json::array();
    for (int i = 0; i < s.count; ++i) {
      const std::string name = scene_name(s.prefix, std::size_t(i));
      const Scene scene = synth_scene(sp, derive_seed(o.seed, {tag(Stream::Synth), split_tag, std::uint64_t(i)}));
      save_cube(scene.cube, dir / name);
      if (s.anomalies) save_ground_truth(scene.truth, dir / (name + ".pgm"));
      files.push_back(name);
    }
    manifest[s.name] = files;
  }
  write_json_file(stage.path() / "manifest.json", manifest);
  stage.commit();
}

// train

struct TrainOptions {
  NetworkConfig network;
  TrainConfig train;
};

inline void read_into(const Json& j, TrainOptions& o) {
  StrictObject r(j, "train config");
  if (const Json* n = r.child("network")) hsiad::read_into(*n, o.network, "network");
  if (const Json* t = r.child("train")) hsiad::read_into(*t, o.train, "train");
  r.finish();
}

/// Trains on every cube in `train_dir`; each file is its own source tag.
inline TrainReport train(const TrainOptions& o, const fs::path& train_dir, const fs::path& val_path,
                         const fs::path& out, std::ostream* progress = nullptr) {
  std::vector<TrainingItem> items;
  for (const auto& stem : list_cubes(train_dir)) items.push_back({load_cube(stem), stem.filename().string()});
  if (items.empty()) throw InvalidArgument("no training cubes in " + train_dir.string());
  if (val_path.empty()) throw InvalidArgument("a validation cube is required (--val)");
  const HsiCube val = load_cube(val_path);
  StagedDir stage(out);
  TrainHooks hooks;
  hooks.output_dir = stage.path();
  if (progress) {
    hooks.on_epoch = [progress](const EpochRecord& r) {
      *progress << "epoch " << r.epoch << " loss " << r.mean_loss << " metric " << r.metric
                << (r.new_peak ? " *" : "") << '\n';
    };
  }
  TrainResult res = hsiad::train(items, val, o.network, o.train, hooks);
  write_json_file(stage.path() / "train_config.json", {{"network", to_json(o.network)}, {"train", to_json(o.train)}});
  stage.commit();
  res.report.checkpoint_path = out / "model";
  res.report.log_path = out / "epochs.csv";
  return res.report;
}

// detect

enum class Detector { Grx, Lrx, Enhanced };

inline Detector parse_detector(const std::string& s) {
  if (s == "grx") return Detector::Grx;
  if (s == "lrx") return Detector::Lrx;
  if (s == "enhanced") return Detector::Enhanced;
  throw ConfigError("unknown detector '" + s + "' (expected grx, lrx or enhanced)");
}

struct DetectOptions {
  Detector detector = Detector::Grx;
  DualWindow window;
  double ridge = kDefaultRidge;
  fs::path checkpoint;
  bool emit_residual = false;
  int jobs = 1;
};

inline void read_into(const Json& j, DetectOptions& o) {
  StrictObject r(j, "detect config");
  std::string det;
  r.get("detector", det);
  if (!det.empty()) o.detector = parse_detector(det);
  if (const Json* w = r.child("window")) hsiad::read_into(*w, o.window, "window");
  r.get("ridge", o.ridge);
  std::string ckpt;
  r.get("checkpoint", ckpt);
  if (!ckpt.empty()) o.checkpoint = ckpt;
  r.get("emit_residual", o.emit_residual);
  r.get("jobs", o.jobs);
  r.finish();
}

struct DetectRecord {
  std::string scene_id;
  double seconds = 0.0;
};

/// One single-band score cube plus a PGM preview per input cube, and timings.csv.
inline std::vector<DetectRecord> detect(const DetectOptions& o, const fs::path& input, const fs::path& out) {
  const auto stems = list_cubes(input);
  if (stems.empty()) throw InvalidArgument("no cubes found in " + input.string());
  std::optional<NetParams> params;
  if (o.detector == Detector::Enhanced) {
    if (o.checkpoint.empty()) throw InvalidArgument("enhanced detection needs --checkpoint");
    params = load_checkpoint(o.checkpoint);
  }
  if (o.emit_residual && !params) throw InvalidArgument("--emit-residual needs the enhanced detector");
  if (o.detector == Detector::Lrx) validate(o.window);

  StagedDir stage(out);
  if (o.emit_residual) fs::create_directories(stage.path() / "residual");
  std::vector<DetectRecord> records(stems.size());
  detail::parallel_for(stems.size(), o.jobs, [&](std::size_t i) {
    const std::string id = stems[i].filename().string();
    const HsiCube cube = load_cube(stems[i]);
    const auto t0 = std::chrono::steady_clock::now();
    ScoreMap s;
    HsiCube prepared;
    switch (o.detector) {
      case Detector::Grx:
        s = grx(cube, o.ridge);
        break;
      case Detector::Lrx:
        s = lrx(cube, o.window, o.ridge);
        break;
      case Detector::Enhanced:
        if (cube.height() != params->config.height || cube.width() != params->config.width ||
            cube.bands() < params->config.bands) {
          throw InvalidArgument("cube " + id + " " + shape_string(cube) + " does not match the checkpoint input " +
                                std::to_string(params->config.height) + "x" + std::to_string(params->config.width) +
                                "x" + std::to_string(params->config.bands));
        }
        prepared = prepare_network_input(cube, params->config.bands);
        s = grx(enhance(prepared, *params), o.ridge);
        break;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    records[i] = {id, secs};
    const HsiCube score_cube = to_cube(s);
    save_cube(score_cube, stage.path() / id);
    write_pgm(stage.path() / (id + ".preview.pgm"), to_gray(score_cube));
    if (o.emit_residual) save_cube(residual_map(prepared, *params), stage.path() / "residual" / id);
  });
  {
    std::ofstream t(stage.path() / "timings.csv");
    t << "scene_id,seconds\n" << std::setprecision(9);
    for (const auto& r : records) t << r.scene_id << ',' << r.seconds << '\n';
    if (!t) throw IoError("cannot write timings.csv");
  }
  stage.commit();
  return records;
}

// eval

inline std::map<std::string, double> read_timings(const fs::path& path) {
  std::map<std::string, double> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    out[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
  }
  return out;
}

/// Pairs score cubes with truth PGMs by stem and writes metrics.csv with a MEAN row.
inline BenchmarkSummary evaluate(const fs::path& scores_dir, const fs::path& truth_dir, const fs::path& out,
                                 int jobs = 1) {
  const auto stems = list_cubes(scores_dir);
  if (stems.empty()) throw InvalidArgument("no score maps in " + scores_dir.string());
  for (const auto& stem : stems) {
    const fs::path truth = truth_dir / (stem.filename().string() + ".pgm");
    if (!fs::exists(truth)) throw InvalidArgument("missing truth for scene " + stem.filename().string());
  }
  const auto timings = read_timings(scores_dir / "timings.csv");
  std::vector<SceneMetrics> results(stems.size());
  detail::parallel_for(stems.size(), jobs, [&](std::size_t i) {
    const std::string id = stems[i].filename().string();
    const ScoreMap s = from_cube(load_cube(stems[i]));
    const GroundTruthMap gt = load_ground_truth(truth_dir / (id + ".pgm"));
    const auto t = timings.find(id);
    results[i] = evaluate_scene(id, s, gt, t == timings.end() ? 0.0 : t->second);
  });
  const BenchmarkSummary summary = summarize(results);
  StagedDir stage(out);
  write_metrics_csv(stage.path() / "metrics.csv", summary);
  stage.commit();
  return summary;
}

// mask-preview

struct MaskPreviewOptions {
  MaskParams mask;
  int count = 8;
  int height = 64;
  int width = 64;
  std::uint64_t seed = 0;
};

inline void read_into(const Json& j, MaskPreviewOptions& o) {
  StrictObject r(j, "mask-preview config");
  if (const Json* m = r.child("mask")) hsiad::read_into(*m, o.mask, "mask");
  r.get("count", o.count);
  r.get("height", o.height);
  r.get("width", o.width);
  r.get("seed", o.seed);
  r.finish();
  if (o.count < 1) throw ConfigError("mask-preview count must be >= 1");
}

/// Writes mask000.pgm ... (white = kept, black = masked); returns parameter warnings.
inline std::vector<std::string> mask_preview(const MaskPreviewOptions& o, const fs::path& out) {
  auto warnings = validate_mask_params(o.mask);
  StagedDir stage(out);
  for (int i = 0; i < o.count; ++i) {
    Rng rng = make_rng(o.seed, {tag(Stream::MaskPreview), std::uint64_t(i)});
    const MaskMap m = generate_mask_map(o.height, o.width, o.mask, rng);
    GrayImage img{m.height, m.width, std::vector<std::uint8_t>(m.bits.size())};
    for (std::size_t k = 0; k < m.bits.size(); ++k) img.pixels[k] = m.bits[k] ? 255 : 0;
    write_pgm(stage.path() / (scene_name("mask", std::size_t(i)) + ".pgm"), img);
  }
  stage.commit();
  return warnings;
}

}  // namespace hsiad::cmd

#endif  // HSIAD_COMMANDS_HPP
