#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "sthyper/checkpoint.hpp"
#include "sthyper/config.hpp"
#include "sthyper/dataset.hpp"
#include "sthyper/dtw.hpp"
#include "sthyper/errors.hpp"
#include "sthyper/export.hpp"
#include "sthyper/metrics.hpp"
#include "sthyper/synthetic.hpp"
#include "sthyper/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw sthyper::IoError("cannot write " + path.string());
}

sthyper::data::TimeSeriesDataset load_for_config(const fs::path& path, const sthyper::ModelConfig& cfg,
                                                 const std::vector<std::string>& variables = {}) {
  sthyper::data::CsvSchema schema;
  schema.timestamp_column = cfg.timestamp_column;
  schema.variable_columns = variables;
  return sthyper::data::load_dataset(path, schema);
}

json metrics_summary(const std::vector<sthyper::MetricValues>& runs) {
  auto stat = [&](auto field) {
    double mean = 0.0;
    for (const auto& r : runs) mean += r.*field;
    mean /= static_cast<double>(runs.size());
    double var = 0.0;
    for (const auto& r : runs) var += (r.*field - mean) * (r.*field - mean);
    var /= static_cast<double>(runs.size());
    return json{{"mean", mean}, {"std", std::sqrt(var)}};
  };
  return {{"MAE", stat(&sthyper::MetricValues::mae)},
          {"MSE", stat(&sthyper::MetricValues::mse)},
          {"RMSE", stat(&sthyper::MetricValues::rmse)},
          {"MAPE", stat(&sthyper::MetricValues::mape)},
          {"runs", runs.size()}};
}

json history_json(const sthyper::TrainResult& r) {
  json epochs = json::array();
  for (const auto& e : r.history) {
    epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}});
  }
  return {{"epochs", epochs},
          {"best_epoch", r.best_epoch},
          {"best_val_loss", r.best.best_val_loss},
          {"steps", r.steps},
          {"stopped_early", r.stopped_early}};
}

struct Options {
  std::string config;
  std::string data;
  std::string out;
  std::string checkpoint;
  std::string split = "test";
  std::vector<std::uint64_t> seeds;
  std::string dtw_cache;
  bool verbose = false;
  std::int64_t groups = 3;
  std::int64_t vars_per_group = 4;
  std::int64_t length = 512;
  double noise = 0.1;
};

int run_prepare(const Options& o) {
  const auto cfg = sthyper::load_config(o.config);
  const auto raw = load_for_config(o.data, cfg);
  for (const auto& w : cfg.validate(raw.num_vars())) std::cerr << "warning: " << w << '\n';
  fs::create_directories(o.out);
  const auto prepared = sthyper::prepare_data(cfg, raw, o.out);
  const auto& s = prepared.splits;
  json splits = {{"length", raw.length()},
                 {"n_vars", raw.num_vars()},
                 {"train", {s.train.begin, s.train.end}},
                 {"val", {s.val.begin, s.val.end}},
                 {"test", {s.test.begin, s.test.end}},
                 {"norm_stats", {{"mean", prepared.normalized.norm_stats->mean},
                                 {"std", prepared.normalized.norm_stats->stddev}}}};
  if (prepared.dtw_affinity.defined()) splits["dtw_sigma"] = prepared.dtw_sigma;
  write_json(splits, fs::path(o.out) / "splits.json");
  std::cout << splits.dump() << '\n';
  return 0;
}

int run_train(const Options& o) {
  auto cfg = sthyper::load_config(o.config);
  const auto raw = load_for_config(o.data, cfg);
  const auto seeds = o.seeds.empty() ? std::vector<std::uint64_t>{cfg.seed} : o.seeds;
  sthyper::TrainHooks hooks;
  hooks.verbose = o.verbose;
  if (!o.dtw_cache.empty()) hooks.dtw_cache_dir = o.dtw_cache;

  std::vector<sthyper::MetricValues> test_runs;
  json per_seed = json::array();
  for (const auto seed : seeds) {
    cfg.seed = seed;
    const fs::path dir = seeds.size() == 1 ? fs::path(o.out) : fs::path(o.out) / ("seed_" + std::to_string(seed));
    const auto result = sthyper::train(cfg, raw, hooks);
    sthyper::save_checkpoint(result.best, dir / "best");
    write_json(history_json(result), dir / "history.json");
    json entry = {{"seed", seed}, {"best_epoch", result.best_epoch}, {"best_val_loss", result.best.best_val_loss}};
    if (seeds.size() > 1) {
      const auto report = sthyper::evaluate(result.best, raw, sthyper::Split::kTest);
      test_runs.push_back(report.overall);
      entry["test"] = sthyper::to_json(report.overall);
    }
    per_seed.push_back(entry);
  }
  json summary = {{"runs", per_seed}};
  if (!test_runs.empty()) {
    summary["test_summary"] = metrics_summary(test_runs);
    write_json(summary, fs::path(o.out) / "summary.json");
  }
  std::cout << summary.dump() << '\n';
  return 0;
}

int run_evaluate(const Options& o) {
  const auto ck = sthyper::load_checkpoint(o.checkpoint);
  const auto raw = load_for_config(o.data, ck.config, ck.variable_names);
  const auto report = sthyper::evaluate(ck, raw, sthyper::parse_split(o.split));
  std::cout << sthyper::to_json(report).dump(2) << '\n';
  return 0;
}

int run_predict(const Options& o) {
  const auto ck = sthyper::load_checkpoint(o.checkpoint);
  const auto raw = load_for_config(o.data, ck.config, ck.variable_names);
  const auto t = ck.config.input_len;
  if (raw.length() < t) {
    throw sthyper::ShapeError("input has " + std::to_string(raw.length()) + " time steps, the model needs " +
                              std::to_string(t));
  }
  const auto window = raw.values.slice(1, raw.length() - t, raw.length());
  const auto forecast = sthyper::predict(ck, window);

  sthyper::data::TimeSeriesDataset out;
  out.values = forecast.prediction;
  out.variable_names = ck.variable_names;
  const auto last = raw.timestamps.back();
  const auto step = raw.length() > 1 ? last - raw.timestamps[raw.timestamps.size() - 2] : 1;
  for (std::int64_t h = 1; h <= ck.config.horizon; ++h) out.timestamps.push_back(last + h * step);
  if (o.out.empty()) {
    sthyper::data::write_csv(out, std::cout);
  } else {
    sthyper::data::save_csv(out, o.out);
  }
  return 0;
}

int run_export(const Options& o) {
  const auto ck = sthyper::load_checkpoint(o.checkpoint);
  const auto stems = sthyper::export_structures(ck, o.out);
  std::cout << json{{"files", stems}}.dump() << '\n';
  return 0;
}

int run_synth(const Options& o) {
  sthyper::data::SyntheticSpec spec;
  spec.n_groups = o.groups;
  spec.vars_per_group = o.vars_per_group;
  spec.length = o.length;
  spec.noise = o.noise;
  spec.seed = o.seeds.empty() ? 0 : o.seeds.front();
  const auto ds = sthyper::data::generate_synthetic(spec);
  fs::create_directories(o.out);
  sthyper::data::save_csv(ds, fs::path(o.out) / "data.csv");
  write_json({{"n_groups", spec.n_groups},
              {"vars_per_group", spec.vars_per_group},
              {"length", spec.length},
              {"noise", spec.noise},
              {"seed", spec.seed},
              {"group_labels", ds.group_labels},
              {"variable_names", ds.variable_names}},
             fs::path(o.out) / "meta.json");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-scale hypergraph forecaster"};
  app.require_subcommand(1);
  Options o;

  auto* prepare = app.add_subcommand("prepare", "Compute splits, normalization and the DTW cache");
  prepare->add_option("--config", o.config, "Config file (JSON)")->required()->check(CLI::ExistingFile);
  prepare->add_option("--data", o.data, "Dataset file or directory")->required();
  prepare->add_option("--out", o.out, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Train and save the best-validation checkpoint");
  train->add_option("--config", o.config, "Config file (JSON)")->required()->check(CLI::ExistingFile);
  train->add_option("--data", o.data, "Dataset file or directory")->required();
  train->add_option("--out", o.out, "Output directory")->required();
  train->add_option("--seed", o.seeds, "Seed; repeat for several runs reported as mean and std");
  train->add_option("--dtw-cache", o.dtw_cache, "DTW cache directory");
  train->add_flag("--verbose", o.verbose, "Print per-epoch losses");

  auto* evaluate = app.add_subcommand("evaluate", "Print metrics of a checkpoint as JSON");
  evaluate->add_option("--checkpoint", o.checkpoint, "Checkpoint directory")->required();
  evaluate->add_option("--data", o.data, "Dataset file or directory")->required();
  evaluate->add_option("--split", o.split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));

  auto* predict = app.add_subcommand("predict", "Forecast from the last input window of a file");
  predict->add_option("--checkpoint", o.checkpoint, "Checkpoint directory")->required();
  predict->add_option("--data", o.data, "Input series (at least T steps)")->required();
  predict->add_option("--out", o.out, "Output CSV (stdout when omitted)");

  auto* exp = app.add_subcommand("export", "Write learned structures as CSV matrices with JSON sidecars");
  exp->add_option("--checkpoint", o.checkpoint, "Checkpoint directory")->required();
  exp->add_option("--out", o.out, "Output directory")->required();

  auto* synth = app.add_subcommand("synth", "Generate a synthetic grouped dataset");
  synth->add_option("--seed", o.seeds, "Generator seed")->expected(1);
  synth->add_option("--out", o.out, "Output directory")->required();
  synth->add_option("--groups", o.groups, "Number of groups")->check(CLI::PositiveNumber);
  synth->add_option("--vars-per-group", o.vars_per_group, "Variables per group")->check(CLI::PositiveNumber);
  synth->add_option("--length", o.length, "Series length")->check(CLI::PositiveNumber);
  synth->add_option("--noise", o.noise, "Noise amplitude")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << one_line(e.what()) << '\n';
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    std::cerr << sub->help();
    return kUsageError;
  }

  try {
    if (*prepare) return run_prepare(o);
    if (*train) return run_train(o);
    if (*evaluate) return run_evaluate(o);
    if (*predict) return run_predict(o);
    if (*exp) return run_export(o);
    if (*synth) return run_synth(o);
  } catch (const sthyper::ConfigError& e) {
    std::cerr << "error: " << e.kind() << ": " << one_line(e.what()) << '\n';
    return kUsageError;
  } catch (const sthyper::Error& e) {
    std::cerr << "error: " << e.kind() << ": " << one_line(e.what()) << '\n';
    return kRuntimeFailure;
  } catch (const c10::Error& e) {
    std::cerr << "error: tensor: " << one_line(e.what_without_backtrace()) << '\n';
    return kRuntimeFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: runtime: " << one_line(e.what()) << '\n';
    return kRuntimeFailure;
  }
  return kUsageError;
}
