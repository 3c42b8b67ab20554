#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sthyper/checkpoint.hpp"
#include "sthyper/config.hpp"
#include "sthyper/dataset.hpp"
#include "sthyper/metrics.hpp"
#include "sthyper/model.hpp"

namespace sthyper {

/// Patience-based early stopping on a loss to be minimized. The counter
/// resets on every strict improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::int64_t patience);

  /// Records one epoch's validation loss. Returns true when training should
  /// stop (the loss has not improved for `patience` consecutive epochs).
  bool update(double loss);
  /// True if the most recent update was a strict improvement.
  bool improved() const { return improved_; }
  double best() const { return best_; }
  /// 1-based epoch of the best loss.
  std::int64_t best_epoch() const { return best_epoch_; }
  std::int64_t counter() const { return counter_; }

 private:
  std::int64_t patience_;
  double best_ = std::numeric_limits<double>::infinity();
  std::int64_t best_epoch_ = 0;
  std::int64_t epoch_ = 0;
  std::int64_t counter_ = 0;
  bool improved_ = false;
};

struct EpochRecord {
  std::int64_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainHooks {
  /// Called after every optimizer step with the 1-based global step count.
  std::function<void(StHyper&, std::int64_t)> on_step;
  std::function<void(const EpochRecord&)> on_epoch;
  /// Directory for the DTW affinity cache; no caching when empty.
  std::filesystem::path dtw_cache_dir;
  /// Stop after this many optimizer steps (< 0: unlimited).
  std::int64_t max_steps = -1;
  bool verbose = false;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochRecord> history;
  std::int64_t best_epoch = 0;
  std::int64_t steps = 0;
  bool stopped_early = false;
};

/// Normalized data, splits and base DTW affinity as used for training.
struct PreparedData {
  data::TimeSeriesDataset normalized;
  data::SplitRanges splits;
  torch::Tensor dtw_affinity;
  double dtw_sigma = 0.0;
};

PreparedData prepare_data(const ModelConfig& config, const data::TimeSeriesDataset& raw,
                          const std::filesystem::path& dtw_cache_dir = {});

/// Adam training with gradient clipping, early stopping on validation L1 and
/// restoration of the best-validation parameters.
TrainResult train(const ModelConfig& config, const data::TimeSeriesDataset& raw, const TrainHooks& hooks = {});

/// Mean per-window L1 (config reduction) over `windows`, no gradient.
double mean_l1(StHyper& model, const std::vector<data::WindowSample>& windows, const std::string& reduction,
               std::int64_t batch_size = 256);

/// Predictions for all windows, stacked B x N x tau (normalized scale).
torch::Tensor predict_windows(StHyper& model, const std::vector<data::WindowSample>& windows,
                              std::int64_t batch_size = 256);

enum class Split { kTrain, kVal, kTest };
Split parse_split(const std::string& name);
data::Range split_range(const data::SplitRanges& splits, Split split);

/// Metrics on the denormalized scale for the windows of one split.
MetricsReport evaluate(const Checkpoint& checkpoint, const data::TimeSeriesDataset& raw, Split split);

struct ForecastOutput {
  torch::Tensor prediction;  // N x tau, original units
};

/// Forecast for one raw N x T window. Rejects non-finite input and shape
/// mismatches.
ForecastOutput predict(const Checkpoint& checkpoint, const torch::Tensor& window);
ForecastOutput predict(StHyper& model, const data::NormStats& stats, const torch::Tensor& window);

/// Throws DivergenceError naming the first non-finite tensor among
/// `tensors`, then the model's parameters and gradients.
void diagnose_non_finite(const NamedTensors& tensors, const StHyper& model, const std::string& where);

}  // namespace sthyper
