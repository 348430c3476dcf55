// Command-line front end: gen-data, train, curve, bound, compare.
//
// On failure prints one line "error: <category>: <message>" to stderr and
// exits with status 1 (2 for usage errors).

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "cclsc/checkpoint.hpp"
#include "cclsc/config.hpp"
#include "cclsc/errors.hpp"
#include "cclsc/run.hpp"
#include "cclsc/text.hpp"

namespace fs = std::filesystem;
using namespace cclsc;

namespace {

struct ConfigFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "Key-value config file");
    app->add_option("--seed", seed, "Training seed override");
    for (const auto& key : config_keys()) {
      if (key == "seed") continue;
      app->add_option("--" + key, values[key], "Config key " + key);
    }
  }

  ExperimentConfig resolve() const {
    ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    for (const auto& [key, value] : values)
      if (!value.empty()) apply_config_value(cfg, key, value);
    if (seed) cfg.train.seed = *seed;
    return cfg;
  }
};

void write_dataset_csv(const fs::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (Eigen::Index j = 0; j < data.dim(); ++j) out << 'x' << j << ',';
  out << "label\n";
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index j = 0; j < data.dim(); ++j) out << text::format_double(data.features(i, j)) << ',';
    out << data.labels[static_cast<std::size_t>(i)] << '\n';
  }
}

// Config and checkpoint for curve/bound: either a run directory or explicit paths.
struct ModelSource {
  std::string run_dir;
  std::string checkpoint;
  ConfigFlags flags;

  void attach(CLI::App* app) {
    app->add_option("--run", run_dir, "Run directory produced by train");
    app->add_option("--checkpoint", checkpoint, "Checkpoint file");
    flags.attach(app);
  }

  std::pair<ExperimentConfig, Network<double>> load() {
    if (!run_dir.empty()) {
      if (flags.config_path.empty()) flags.config_path = (fs::path(run_dir) / "config.txt").string();
      if (checkpoint.empty()) checkpoint = (fs::path(run_dir) / "checkpoint.txt").string();
    }
    if (checkpoint.empty()) throw ConfigError("need --run or --checkpoint");
    return {flags.resolve(), load_checkpoint(checkpoint)};
  }
};

void emit(const std::string& out_path, const std::function<void(std::ostream&)>& writer) {
  if (out_path.empty() || out_path == "-") {
    writer(std::cout);
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw IoError("cannot write " + out_path);
  writer(out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Confidence-aware contrastive selective classification toolkit"};
  app.require_subcommand(1);

  ConfigFlags gen_flags;
  std::string gen_out = "data";
  auto* gen = app.add_subcommand("gen-data", "Build the configured dataset and write train.csv/test.csv");
  gen_flags.attach(gen);
  gen->add_option("--out", gen_out, "Output directory");

  ConfigFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "Train, evaluate and write a run directory");
  train_flags.attach(train_cmd);

  ModelSource curve_src;
  std::string curve_out;
  auto* curve = app.add_subcommand("curve", "Re-evaluate a checkpoint on a coverage grid");
  curve_src.attach(curve);
  curve->add_option("--out", curve_out, "Output CSV (default stdout)");

  ModelSource bound_src;
  std::string bound_out;
  int bound_epoch = 0;
  auto* bound = app.add_subcommand("bound", "Recompute the bound report for a checkpoint");
  bound_src.attach(bound);
  bound->add_option("--out", bound_out, "Output CSV (default stdout)");
  bound->add_option("--epoch", bound_epoch, "Epoch label for the report row");

  std::vector<std::string> runs_a, runs_b;
  double cmp_coverage = -1, cmp_alpha = 0.05;
  std::string cmp_out;
  auto* compare = app.add_subcommand("compare", "Rank-sum comparison of two groups of runs");
  compare->add_option("--a", runs_a, "Run directories of method A")->required();
  compare->add_option("--b", runs_b, "Run directories of method B")->required();
  compare->add_option("--coverage", cmp_coverage, "Single coverage to compare (default: all)");
  compare->add_option("--alpha", cmp_alpha, "Significance level");
  compare->add_option("--out", cmp_out, "Output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: usage: " << e.what() << '\n';
    return 2;
  }

  try {
    if (gen->parsed()) {
      const auto cfg = gen_flags.resolve();
      const Split data = build_dataset(cfg.dataset);
      fs::create_directories(gen_out);
      write_dataset_csv(fs::path(gen_out) / "train.csv", data.train);
      write_dataset_csv(fs::path(gen_out) / "test.csv", data.test);
      std::cout << "train " << data.train.size() << " test " << data.test.size() << " fingerprint " << std::hex
                << dataset_fingerprint(data.train) << '\n';
    } else if (train_cmd->parsed()) {
      const auto rec = run_experiment(train_flags.resolve());
      std::cout << rec.run_dir << '\n';
    } else if (curve->parsed()) {
      auto [cfg, net] = curve_src.load();
      const Split data = build_dataset(cfg.dataset);
      const Dataset& eval = data.test.size() > 0 ? data.test : data.train;
      const auto scored = score_dataset(net, eval.features, eval.labels, data.train.num_classes);
      const auto points = risk_coverage_curve(scored, cfg.coverages);
      emit(curve_out, [&](std::ostream& o) { write_curve_csv(o, points); });
    } else if (bound->parsed()) {
      auto [cfg, net] = bound_src.load();
      const Split data = build_dataset(cfg.dataset);
      const auto ev = evaluate_epoch(net, data.train, data.test, cfg.train.bound, bound_epoch);
      const auto reports = bound_trace({ev}, cfg.train.bound);
      emit(bound_out, [&](std::ostream& o) { write_bound_csv(o, reports); });
    } else if (compare->parsed()) {
      const auto rows = compare_runs(runs_a, runs_b, cmp_coverage, cmp_alpha);
      emit(cmp_out, [&](std::ostream& o) { write_comparison(o, rows); });
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.category() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
