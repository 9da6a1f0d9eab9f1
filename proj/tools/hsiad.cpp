// hsiad: synthesize data, train the enhancement network, run detectors,
// score detection maps and preview random masks.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "hsiad/commands.hpp"

namespace {

using namespace hsiad;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::string out;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON parameter file")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "top-level random seed");
  app->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
  app->add_option("--out", c.out, "output directory")->required();
}

template <class T>
void load_config(const Common& c, T& opts) {
  if (!c.config.empty()) cmd::read_into(read_json_file(c.config), opts);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hyperspectral anomaly detection toolkit"};
  app.require_subcommand(1);

  Common synth_c, train_c, detect_c, eval_c, mask_c;

  auto* synth = app.add_subcommand("synth", "write a synthetic train/val/test dataset");
  add_common(synth, synth_c);
  std::optional<int> n_train, n_val, n_test;
  synth->add_option("--train-count", n_train);
  synth->add_option("--val-count", n_val);
  synth->add_option("--test-count", n_test);

  auto* train = app.add_subcommand("train", "train the enhancement network");
  add_common(train, train_c);
  std::string train_dir, val_path;
  std::optional<int> max_epochs, channels, bands;
  train->add_option("--data", train_dir, "directory of training cubes")->required();
  train->add_option("--val", val_path, "validation cube")->required();
  train->add_option("--max-epochs", max_epochs);
  train->add_option("--channels", channels);
  train->add_option("--bands", bands);
  bool quiet = false;
  train->add_flag("--quiet", quiet, "no per-epoch progress");

  auto* detect = app.add_subcommand("detect", "score cubes with grx, lrx or the enhanced pipeline");
  add_common(detect, detect_c);
  std::string input, detector, checkpoint;
  std::optional<int> inner, outer;
  bool emit_residual = false;
  detect->add_option("--input", input, "cube or directory of cubes")->required();
  detect->add_option("--detector", detector)->check(CLI::IsMember({"grx", "lrx", "enhanced"}));
  detect->add_option("--checkpoint", checkpoint);
  detect->add_option("--inner", inner);
  detect->add_option("--outer", outer);
  detect->add_flag("--emit-residual", emit_residual);

  auto* eval = app.add_subcommand("eval", "score detection maps against ground truth");
  add_common(eval, eval_c);
  std::string scores_dir, truth_dir;
  eval->add_option("--scores", scores_dir)->required();
  eval->add_option("--truth", truth_dir)->required();

  auto* mask = app.add_subcommand("mask-preview", "write seeded random masks as PGM");
  add_common(mask, mask_c);
  std::optional<int> mask_count;
  mask->add_option("--count", mask_count);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      cmd::SynthOptions o;
      load_config(synth_c, o);
      if (synth_c.seed) o.seed = *synth_c.seed;
      if (n_train) o.train_count = *n_train;
      if (n_val) o.val_count = *n_val;
      if (n_test) o.test_count = *n_test;
      cmd::synth(o, synth_c.out);
    } else if (*train) {
      cmd::TrainOptions o;
      load_config(train_c, o);
      if (train_c.seed) o.train.seed = *train_c.seed;
      if (train_c.jobs) o.train.jobs = *train_c.jobs;
      if (max_epochs) {
        o.train.max_epochs = *max_epochs;
        o.train.patience_epochs = std::min(o.train.patience_epochs, *max_epochs);
      }
      if (channels) o.network.channels = *channels;
      if (bands) o.network.bands = *bands;
      const auto rep = cmd::train(o, train_dir, val_path, train_c.out, quiet ? nullptr : &std::cerr);
      std::cout << "selected epoch " << rep.selected_epoch << " of " << rep.stop_epoch << ", checkpoint "
                << rep.checkpoint_path.string() << '\n';
    } else if (*detect) {
      cmd::DetectOptions o;
      load_config(detect_c, o);
      if (!detector.empty()) o.detector = cmd::parse_detector(detector);
      if (!checkpoint.empty()) o.checkpoint = checkpoint;
      if (inner) o.window.inner = *inner;
      if (outer) o.window.outer = *outer;
      if (emit_residual) o.emit_residual = true;
      if (detect_c.jobs) o.jobs = *detect_c.jobs;
      for (const auto& r : cmd::detect(o, input, detect_c.out)) std::cout << r.scene_id << ' ' << r.seconds << "s\n";
    } else if (*eval) {
      if (!eval_c.config.empty()) StrictObject(read_json_file(eval_c.config), "eval config").finish();
      const auto s = cmd::evaluate(scores_dir, truth_dir, eval_c.out, eval_c.jobs.value_or(1));
      std::cout << "mAUC " << s.mean_auc << "  mASNPR " << s.mean_asnpr_db << " dB  mean " << s.mean_seconds
                << " s over " << s.scenes.size() << " scenes\n";
    } else if (*mask) {
      cmd::MaskPreviewOptions o;
      load_config(mask_c, o);
      if (mask_c.seed) o.seed = *mask_c.seed;
      if (mask_count) o.count = *mask_count;
      for (const auto& w : cmd::mask_preview(o, mask_c.out)) std::cerr << "warning: " << w << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
