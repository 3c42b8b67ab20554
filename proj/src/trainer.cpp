#include "sthyper/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>

#include <torch/torch.h>

#include "sthyper/dtw.hpp"
#include "sthyper/errors.hpp"
#include "sthyper/fusion.hpp"

namespace sthyper {

EarlyStopping::EarlyStopping(std::int64_t patience) : patience_(patience) {
  if (patience < 1) {
    throw ConfigError("patience must be >= 1");
  }
}

bool EarlyStopping::update(double loss) {
  ++epoch_;
  improved_ = loss < best_;
  if (improved_) {
    best_ = loss;
    best_epoch_ = epoch_;
    counter_ = 0;
    return false;
  }
  ++counter_;
  return counter_ >= patience_;
}

namespace {

bool all_finite(const torch::Tensor& t) { return !t.defined() || torch::isfinite(t).all().item<bool>(); }

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

}  // namespace

void diagnose_non_finite(const NamedTensors& tensors, const StHyper& model, const std::string& where) {
  for (const auto& [name, t] : tensors) {
    if (!all_finite(t)) {
      throw DivergenceError(where + ": non-finite values in " + name);
    }
  }
  for (const auto& item : model->named_parameters()) {
    if (!all_finite(item.value())) {
      throw DivergenceError(where + ": non-finite values in parameter " + item.key());
    }
  }
  for (const auto& item : model->named_parameters()) {
    if (!all_finite(item.value().grad())) {
      throw DivergenceError(where + ": non-finite gradient of " + item.key());
    }
  }
  throw DivergenceError(where + ": non-finite loss");
}

PreparedData prepare_data(const ModelConfig& config, const data::TimeSeriesDataset& raw,
                          const std::filesystem::path& dtw_cache_dir) {
  PreparedData out;
  out.splits = data::chronological_split(raw.length(), config.split_ratios);
  if (out.splits.train.size() < 2) {
    throw ConfigError("training range is too short");
  }
  out.normalized = data::zscore_normalize(raw, out.splits.train);
  if (config.spatial_scales >= 2) {
    const auto train_values = out.normalized.values.slice(1, out.splits.train.begin, out.splits.train.end);
    const auto affinity = dtw_cache_dir.empty() ? data::compute_dtw_adjacency(train_values)
                                                : data::load_or_compute_dtw(train_values, dtw_cache_dir);
    out.dtw_affinity = affinity.matrix;
    out.dtw_sigma = affinity.sigma;
  }
  return out;
}

torch::Tensor predict_windows(StHyper& model, const std::vector<data::WindowSample>& windows,
                              std::int64_t batch_size) {
  torch::NoGradGuard guard;
  std::vector<torch::Tensor> parts;
  const auto idx = iota_indices(windows.size());
  for (std::size_t start = 0; start < idx.size(); start += static_cast<std::size_t>(batch_size)) {
    const auto stop = std::min(idx.size(), start + static_cast<std::size_t>(batch_size));
    const std::vector<std::size_t> batch(idx.begin() + static_cast<std::ptrdiff_t>(start),
                                         idx.begin() + static_cast<std::ptrdiff_t>(stop));
    auto [x, y] = data::stack_windows(windows, batch);
    parts.push_back(model->forward(x));
  }
  if (parts.empty()) {
    throw ShapeError("no windows to predict");
  }
  return torch::cat(parts, 0);
}

double mean_l1(StHyper& model, const std::vector<data::WindowSample>& windows, const std::string& reduction,
               std::int64_t batch_size) {
  torch::NoGradGuard guard;
  const auto red = fusion::parse_reduction(reduction);
  const auto pred = predict_windows(model, windows, batch_size);
  const auto idx = iota_indices(windows.size());
  const auto target = data::stack_windows(windows, idx).second;
  return fusion::l1_loss(pred, target, red).item<double>();
}

TrainResult train(const ModelConfig& config, const data::TimeSeriesDataset& raw, const TrainHooks& hooks) {
  for (const auto& w : config.validate(raw.num_vars())) {
    std::cerr << "warning: " << w << '\n';
  }
  if (config.serial) {
    torch::set_num_threads(1);
  }
  torch::manual_seed(config.seed);

  auto prepared = prepare_data(config, raw, hooks.dtw_cache_dir);
  const auto& ds = prepared.normalized;
  const auto train_windows = data::make_windows(ds, config.input_len, config.horizon, prepared.splits.train);
  auto val_windows =
      data::make_windows(ds, config.input_len, config.horizon, prepared.splits.val, data::WindowMode::kLenient);
  if (val_windows.empty()) {
    std::cerr << "warning: validation range holds no full window; model selection uses the training L1\n";
  }

  StHyper model(config, raw.num_vars());
  if (prepared.dtw_affinity.defined()) {
    model->set_dtw_affinity(prepared.dtw_affinity);
  }
  torch::optim::Adam optimizer(model->parameters(), torch::optim::AdamOptions(config.learning_rate));
  const auto reduction = fusion::parse_reduction(config.loss_reduction);
  const double lambda = config.effective_gp_weight();

  std::mt19937_64 rng(config.seed);
  EarlyStopping stopper(config.patience);
  TrainResult result;
  result.best.config = config;
  result.best.n_vars = raw.num_vars();
  result.best.variable_names = raw.variable_names;
  result.best.norm_stats = *ds.norm_stats;
  result.best.parameters = snapshot_state(model);

  auto order = iota_indices(train_windows.size());
  const auto bs = static_cast<std::size_t>(config.batch_size);
  bool step_limit = false;
  for (std::int64_t epoch = 1; epoch <= config.max_epochs && !step_limit; ++epoch) {
    model->train();
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::int64_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const auto stop = std::min(order.size(), start + bs);
      const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(stop));
      auto [x, y] = data::stack_windows(train_windows, batch);

      optimizer.zero_grad();
      const auto pred = model->forward(x);
      const auto gp = lambda > 0.0 ? model->graph_pooling_loss() : torch::zeros({}, torch::kFloat64);
      const auto loss = fusion::training_loss(pred, y, gp, lambda, reduction);
      const double loss_value = loss.item<double>();
      if (!std::isfinite(loss_value)) {
        diagnose_non_finite({{"input batch", x}, {"prediction", pred}, {"graph pooling loss", gp}}, model,
                            "epoch " + std::to_string(epoch));
      }
      loss.backward();
      for (const auto& item : model->named_parameters()) {
        if (!all_finite(item.value().grad())) {
          throw DivergenceError("epoch " + std::to_string(epoch) + ": non-finite gradient of " + item.key());
        }
      }
      if (config.grad_clip > 0.0) {
        torch::nn::utils::clip_grad_norm_(model->parameters(), config.grad_clip);
      }
      optimizer.step();
      ++result.steps;
      loss_sum += loss_value;
      ++batches;
      if (hooks.on_step) hooks.on_step(model, result.steps);
      if (hooks.max_steps >= 0 && result.steps >= hooks.max_steps) {
        step_limit = true;
        break;
      }
    }

    model->eval();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = batches > 0 ? loss_sum / static_cast<double>(batches) : 0.0;
    rec.val_loss = mean_l1(model, val_windows.empty() ? train_windows : val_windows, config.loss_reduction);
    if (!std::isfinite(rec.val_loss)) {
      diagnose_non_finite({}, model, "validation after epoch " + std::to_string(epoch));
    }
    result.history.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);
    if (hooks.verbose) {
      std::cerr << "epoch " << epoch << " train " << rec.train_loss << " val " << rec.val_loss << '\n';
    }

    const bool stop = stopper.update(rec.val_loss);
    if (stopper.improved()) {
      result.best.parameters = snapshot_state(model);
      result.best.optimizer = snapshot_optimizer(model, optimizer);
      result.best.epoch = epoch;
      result.best.best_val_loss = rec.val_loss;
    }
    if (stop) {
      result.stopped_early = true;
      break;
    }
  }
  result.best_epoch = stopper.best_epoch();
  return result;
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw ConfigError("unknown split \"" + name + "\" (expected train, val or test)");
}

data::Range split_range(const data::SplitRanges& splits, Split split) {
  switch (split) {
    case Split::kTrain:
      return splits.train;
    case Split::kVal:
      return splits.val;
    case Split::kTest:
      return splits.test;
  }
  return splits.test;
}

MetricsReport evaluate(const Checkpoint& checkpoint, const data::TimeSeriesDataset& raw, Split split) {
  const auto& cfg = checkpoint.config;
  if (raw.num_vars() != checkpoint.n_vars) {
    throw ShapeError("dataset has " + std::to_string(raw.num_vars()) + " variables, checkpoint expects " +
                     std::to_string(checkpoint.n_vars));
  }
  auto model = instantiate(checkpoint);
  const auto splits = data::chronological_split(raw.length(), cfg.split_ratios);
  const auto range = split_range(splits, split);

  data::TimeSeriesDataset normalized = raw;
  normalized.values = data::apply_normalization(raw.values, checkpoint.norm_stats);
  const auto windows = data::make_windows(normalized, cfg.input_len, cfg.horizon, range);
  const auto raw_windows = data::make_windows(raw, cfg.input_len, cfg.horizon, range);

  const auto pred = data::denormalize(predict_windows(model, windows), checkpoint.norm_stats);
  const auto target = data::stack_windows(raw_windows, iota_indices(raw_windows.size())).second;
  return build_report(pred, target);
}

ForecastOutput predict(StHyper& model, const data::NormStats& stats, const torch::Tensor& window) {
  const auto n = model->n_vars();
  const auto t = model->config().input_len;
  if (window.dim() != 2 || window.size(0) != n || window.size(1) != t) {
    std::string actual;
    for (std::int64_t i = 0; i < window.dim(); ++i) {
      actual += (i ? " x " : "") + std::to_string(window.size(i));
    }
    throw ShapeError("expected input window " + std::to_string(n) + " x " + std::to_string(t) + ", got " +
                     (actual.empty() ? "a scalar" : actual));
  }
  const auto x = window.to(torch::kFloat64);
  if (!all_finite(x)) {
    throw ContractError("input window contains NaN or infinite values");
  }
  torch::NoGradGuard guard;
  const auto pred = model->forward(data::apply_normalization(x, stats)).squeeze(0);
  return ForecastOutput{data::denormalize(pred, stats)};
}

ForecastOutput predict(const Checkpoint& checkpoint, const torch::Tensor& window) {
  auto model = instantiate(checkpoint);
  return predict(model, checkpoint.norm_stats, window);
}

}  // namespace sthyper
