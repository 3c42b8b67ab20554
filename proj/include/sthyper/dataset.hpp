#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <torch/types.h>

namespace sthyper::data {

/// Per-variable z-score statistics (population standard deviation),
/// computed on the training range only.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  /// Column tensors of shape N x 1 for broadcasting against N x L data.
  torch::Tensor mean_column() const;
  torch::Tensor stddev_column() const;
};

/// A multivariate series stored variable-major: values is N x L, float64.
struct TimeSeriesDataset {
  torch::Tensor values;
  std::vector<std::int64_t> timestamps;
  std::vector<std::string> variable_names;
  std::optional<NormStats> norm_stats;
  /// Planted group label per variable (synthetic data only; empty otherwise).
  std::vector<std::int64_t> group_labels;

  std::int64_t num_vars() const { return values.size(0); }
  std::int64_t length() const { return values.size(1); }
};

/// Half-open interval [begin, end) of time steps.
struct Range {
  std::int64_t begin = 0;
  std::int64_t end = 0;
  std::int64_t size() const { return end - begin; }
  bool operator==(const Range&) const = default;
};

struct SplitRanges {
  Range train;
  Range val;
  Range test;
};

struct WindowSample {
  torch::Tensor input;   // N x T
  torch::Tensor target;  // N x tau
  std::int64_t origin = 0;
};

/// Column mapping for delimited text input. Rows are time steps; the header
/// row names the columns.
struct CsvSchema {
  /// Column holding integer timestamps. If absent from the header, the row
  /// index is used.
  std::string timestamp_column = "timestamp";
  /// Variables to read, in output order. Empty selects every column except
  /// the timestamp column, in header order.
  std::vector<std::string> variable_columns;
};

TimeSeriesDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});

/// Raw little-endian array (variable-major, N x L) with a JSON sidecar
/// `<stem>.json` holding {n_vars, length, dtype, variable_names}.
TimeSeriesDataset load_binary(const std::filesystem::path& path);

/// Dispatches on the path: `.csv`/`.txt` -> load_csv, `.bin` -> load_binary,
/// a directory -> its `data.csv`.
TimeSeriesDataset load_dataset(const std::filesystem::path& path, const CsvSchema& schema = {});

void save_csv(const TimeSeriesDataset& ds, const std::filesystem::path& path);
void write_csv(const TimeSeriesDataset& ds, std::ostream& out);
void save_binary(const TimeSeriesDataset& ds, const std::filesystem::path& path);

/// Contiguous train/val/test ranges covering [0, length). Train and val take
/// floor(length * ratio); test gets the remainder.
SplitRanges chronological_split(std::int64_t length, const std::array<double, 3>& ratios);

/// Normalizes every variable with statistics taken from `train` only.
TimeSeriesDataset zscore_normalize(const TimeSeriesDataset& ds, Range train);

NormStats compute_norm_stats(const torch::Tensor& values, Range train,
                             const std::vector<std::string>& names = {});
torch::Tensor apply_normalization(const torch::Tensor& values, const NormStats& stats);
/// Inverse transform. `values` has the variable axis at dimension -2
/// (N x L, or B x N x tau).
torch::Tensor denormalize(const torch::Tensor& values, const NormStats& stats);

enum class WindowMode { kStrict, kLenient };

/// Stride-1 windows whose input and target both lie inside `range`.
/// Count = range.size() - input_len - horizon + 1. A range that is too short
/// throws ConfigError in strict mode and yields no windows (with a warning on
/// stderr) in lenient mode.
std::vector<WindowSample> make_windows(const TimeSeriesDataset& ds, std::int64_t input_len,
                                       std::int64_t horizon, Range range,
                                       WindowMode mode = WindowMode::kStrict);

/// Stacks the selected samples into B x N x T inputs and B x N x tau targets.
std::pair<torch::Tensor, torch::Tensor> stack_windows(const std::vector<WindowSample>& windows,
                                                      const std::vector<std::size_t>& indices);

}  // namespace sthyper::data
