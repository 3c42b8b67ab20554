#include "sthyper/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

#include <torch/torch.h>

#include <json.hpp>

#include "sthyper/errors.hpp"

namespace sthyper::data {

namespace {

using nlohmann::json;

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, delim)) {
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == delim) {
    cells.emplace_back();
  }
  return cells;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

bool is_missing_token(const std::string& s) {
  if (s.empty()) return true;
  std::string lower(s.size(), '\0');
  std::transform(s.begin(), s.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  return lower == "nan" || lower == "na" || lower == "null" || lower == "none";
}

std::string cell_location(std::int64_t row, const std::string& column) {
  return "row " + std::to_string(row) + ", column \"" + column + "\"";
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  auto side = path;
  side.replace_extension(".json");
  return side;
}

std::vector<std::int64_t> iota_timestamps(std::int64_t n) {
  std::vector<std::int64_t> ts(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) ts[static_cast<std::size_t>(i)] = i;
  return ts;
}

}  // namespace

torch::Tensor NormStats::mean_column() const {
  return torch::tensor(mean, torch::kFloat64).unsqueeze(1);
}

torch::Tensor NormStats::stddev_column() const {
  return torch::tensor(stddev, torch::kFloat64).unsqueeze(1);
}

TimeSeriesDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) {
    throw LoadError("cannot open " + path.string());
  }
  std::string header_line;
  if (!std::getline(in, header_line)) {
    throw LoadError(path.string() + ": empty file");
  }
  if (!header_line.empty() && header_line.back() == '\r') header_line.pop_back();
  const char delim = header_line.find('\t') != std::string::npos ? '\t' : ',';

  std::vector<std::string> header = split_line(header_line, delim);
  for (auto& h : header) h = trim(h);

  std::int64_t ts_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (!schema.timestamp_column.empty() && header[c] == schema.timestamp_column) {
      ts_col = static_cast<std::int64_t>(c);
    }
  }

  std::vector<std::size_t> var_cols;
  std::vector<std::string> names;
  if (schema.variable_columns.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (static_cast<std::int64_t>(c) == ts_col) continue;
      var_cols.push_back(c);
      names.push_back(header[c]);
    }
  } else {
    for (const auto& name : schema.variable_columns) {
      auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end()) {
        throw LoadError(path.string() + ": column \"" + name + "\" not found in header");
      }
      var_cols.push_back(static_cast<std::size_t>(it - header.begin()));
      names.push_back(name);
    }
  }
  if (var_cols.empty()) {
    throw LoadError(path.string() + ": no variable columns");
  }

  const std::size_t n_vars = var_cols.size();
  std::vector<double> row_major;
  std::vector<std::int64_t> timestamps;
  std::string line;
  std::int64_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split_line(line, delim);
    if (cells.size() != header.size()) {
      throw LoadError(path.string() + ": row " + std::to_string(row) + " has " +
                      std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(header.size()));
    }
    for (std::size_t v = 0; v < n_vars; ++v) {
      const std::string cell = trim(cells[var_cols[v]]);
      if (is_missing_token(cell)) {
        throw LoadError("missing value at " + cell_location(row, names[v]));
      }
      double value = 0.0;
      const char* first = cell.data();
      const char* last = cell.data() + cell.size();
      if (*first == '+') ++first;
      auto [ptr, ec] = std::from_chars(first, last, value);
      if (ec != std::errc() || ptr != last) {
        throw LoadError("non-numeric value \"" + cell + "\" at " + cell_location(row, names[v]));
      }
      if (!std::isfinite(value)) {
        throw LoadError("missing value at " + cell_location(row, names[v]));
      }
      row_major.push_back(value);
    }
    if (ts_col >= 0) {
      const std::string cell = trim(cells[static_cast<std::size_t>(ts_col)]);
      std::int64_t ts = 0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), ts);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw LoadError("invalid timestamp \"" + cell + "\" at " +
                        cell_location(row, schema.timestamp_column));
      }
      if (!timestamps.empty() && ts <= timestamps.back()) {
        throw OrderError("timestamps not strictly increasing at row " + std::to_string(row) +
                         " (" + std::to_string(timestamps.back()) + " then " +
                         std::to_string(ts) + ")");
      }
      timestamps.push_back(ts);
    }
    ++row;
  }
  if (row == 0) {
    throw LoadError(path.string() + ": no data rows");
  }

  TimeSeriesDataset ds;
  ds.values = torch::from_blob(row_major.data(), {row, static_cast<std::int64_t>(n_vars)},
                               torch::kFloat64)
                  .t()
                  .clone(torch::MemoryFormat::Contiguous);
  ds.timestamps = ts_col >= 0 ? std::move(timestamps) : iota_timestamps(row);
  ds.variable_names = std::move(names);
  return ds;
}

TimeSeriesDataset load_binary(const std::filesystem::path& path) {
  const auto side = sidecar_path(path);
  std::ifstream meta_in(side);
  if (!meta_in) {
    throw LoadError("missing metadata sidecar " + side.string());
  }
  json meta;
  try {
    meta_in >> meta;
  } catch (const json::exception& e) {
    throw LoadError(side.string() + ": " + e.what());
  }
  const auto n_vars = meta.at("n_vars").get<std::int64_t>();
  const auto length = meta.at("length").get<std::int64_t>();
  const auto dtype = meta.value("dtype", std::string("float64"));
  if (n_vars < 1 || length < 1) {
    throw LoadError(side.string() + ": n_vars and length must be positive");
  }
  std::size_t elem = 0;
  torch::Dtype torch_dtype;
  if (dtype == "float64") {
    elem = 8;
    torch_dtype = torch::kFloat64;
  } else if (dtype == "float32") {
    elem = 4;
    torch_dtype = torch::kFloat32;
  } else {
    throw LoadError(side.string() + ": unsupported dtype " + dtype);
  }

  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw LoadError("cannot open " + path.string());
  }
  const auto count = static_cast<std::size_t>(n_vars * length);
  std::vector<char> bytes(count * elem);
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) {
    throw LoadError(path.string() + ": expected " + std::to_string(bytes.size()) + " bytes");
  }
  auto values = torch::from_blob(bytes.data(), {n_vars, length}, torch_dtype)
                    .to(torch::kFloat64)
                    .clone();

  TimeSeriesDataset ds;
  if (meta.contains("variable_names")) {
    ds.variable_names = meta.at("variable_names").get<std::vector<std::string>>();
  } else {
    for (std::int64_t i = 0; i < n_vars; ++i) ds.variable_names.push_back("v" + std::to_string(i));
  }
  if (static_cast<std::int64_t>(ds.variable_names.size()) != n_vars) {
    throw LoadError(side.string() + ": variable_names has wrong length");
  }
  auto acc = values.accessor<double, 2>();
  for (std::int64_t i = 0; i < n_vars; ++i) {
    for (std::int64_t t = 0; t < length; ++t) {
      if (!std::isfinite(acc[i][t])) {
        throw LoadError("missing value at " + cell_location(t, ds.variable_names[i]));
      }
    }
  }
  ds.values = values;
  ds.timestamps = iota_timestamps(length);
  return ds;
}

TimeSeriesDataset load_dataset(const std::filesystem::path& path, const CsvSchema& schema) {
  if (std::filesystem::is_directory(path)) {
    return load_csv(path / "data.csv", schema);
  }
  const auto ext = path.extension().string();
  if (ext == ".bin") {
    return load_binary(path);
  }
  return load_csv(path, schema);
}

void write_csv(const TimeSeriesDataset& ds, std::ostream& out) {
  out << "timestamp";
  for (const auto& name : ds.variable_names) out << ',' << name;
  out << '\n';
  const auto values = ds.values.to(torch::kFloat64).contiguous();
  auto acc = values.accessor<double, 2>();
  char buf[64];
  for (std::int64_t t = 0; t < ds.length(); ++t) {
    out << ds.timestamps[static_cast<std::size_t>(t)];
    for (std::int64_t i = 0; i < ds.num_vars(); ++i) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), acc[i][t]);
      out << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
}

void save_csv(const TimeSeriesDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  write_csv(ds, out);
  if (!out) {
    throw IoError("failed writing " + path.string());
  }
}

void save_binary(const TimeSeriesDataset& ds, const std::filesystem::path& path) {
  const auto values = ds.values.to(torch::kFloat64).contiguous();
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  out.write(reinterpret_cast<const char*>(values.data_ptr<double>()),
            static_cast<std::streamsize>(values.numel() * sizeof(double)));
  json meta = {{"n_vars", ds.num_vars()},
               {"length", ds.length()},
               {"dtype", "float64"},
               {"variable_names", ds.variable_names}};
  std::ofstream side(sidecar_path(path));
  side << meta.dump(2) << '\n';
  if (!out || !side) {
    throw IoError("failed writing " + path.string());
  }
}

SplitRanges chronological_split(std::int64_t length, const std::array<double, 3>& ratios) {
  for (double r : ratios) {
    if (!(r > 0.0)) {
      throw ConfigError("split ratios must be positive");
    }
  }
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("split ratios must sum to 1 (got " + std::to_string(total) + ")");
  }
  // The small epsilon absorbs representation error such as 0.7 * 100 = 69.999...
  const auto part = [length](double r) {
    return static_cast<std::int64_t>(std::floor(static_cast<double>(length) * r + 1e-9));
  };
  const std::int64_t n_train = part(ratios[0]);
  const std::int64_t n_val = part(ratios[1]);
  SplitRanges s;
  s.train = {0, n_train};
  s.val = {n_train, n_train + n_val};
  s.test = {n_train + n_val, length};
  return s;
}

NormStats compute_norm_stats(const torch::Tensor& values, Range train,
                             const std::vector<std::string>& names) {
  if (train.size() <= 0 || train.begin < 0 || train.end > values.size(1)) {
    throw ConfigError("normalization range is empty or out of bounds");
  }
  const auto slice = values.slice(1, train.begin, train.end);
  const auto mean = slice.mean(1);
  const auto var = (slice - mean.unsqueeze(1)).pow(2).mean(1);
  const auto std = var.sqrt();
  NormStats stats;
  stats.mean.assign(mean.data_ptr<double>(), mean.data_ptr<double>() + mean.numel());
  stats.stddev.assign(std.data_ptr<double>(), std.data_ptr<double>() + std.numel());
  for (std::size_t i = 0; i < stats.stddev.size(); ++i) {
    const double scale = std::max(1.0, std::abs(stats.mean[i]));
    if (!(stats.stddev[i] > 1e-12 * scale)) {
      const std::string name = i < names.size() ? names[i] : "#" + std::to_string(i);
      throw NormalizationError("variable \"" + name + "\" has zero variance on the training range");
    }
  }
  return stats;
}

torch::Tensor apply_normalization(const torch::Tensor& values, const NormStats& stats) {
  return (values - stats.mean_column()) / stats.stddev_column();
}

torch::Tensor denormalize(const torch::Tensor& values, const NormStats& stats) {
  return values * stats.stddev_column() + stats.mean_column();
}

TimeSeriesDataset zscore_normalize(const TimeSeriesDataset& ds, Range train) {
  TimeSeriesDataset out = ds;
  auto stats = compute_norm_stats(ds.values, train, ds.variable_names);
  out.values = apply_normalization(ds.values, stats);
  out.norm_stats = std::move(stats);
  return out;
}

std::vector<WindowSample> make_windows(const TimeSeriesDataset& ds, std::int64_t input_len,
                                       std::int64_t horizon, Range range, WindowMode mode) {
  if (input_len < 1 || horizon < 1) {
    throw ConfigError("input length and horizon must be positive");
  }
  if (range.begin < 0 || range.end > ds.length() || range.begin > range.end) {
    throw ConfigError("window range out of bounds");
  }
  const std::int64_t count = range.size() - input_len - horizon + 1;
  std::vector<WindowSample> windows;
  if (count < 1) {
    const std::string msg = "range of length " + std::to_string(range.size()) +
                            " is shorter than input + horizon = " +
                            std::to_string(input_len + horizon);
    if (mode == WindowMode::kStrict) {
      throw ConfigError(msg);
    }
    std::cerr << "warning: " << msg << "; no windows produced\n";
    return windows;
  }
  windows.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    const std::int64_t origin = range.begin + i;
    WindowSample w;
    w.origin = origin;
    w.input = ds.values.slice(1, origin, origin + input_len);
    w.target = ds.values.slice(1, origin + input_len, origin + input_len + horizon);
    windows.push_back(std::move(w));
  }
  return windows;
}

std::pair<torch::Tensor, torch::Tensor> stack_windows(const std::vector<WindowSample>& windows,
                                                      const std::vector<std::size_t>& indices) {
  std::vector<torch::Tensor> inputs;
  std::vector<torch::Tensor> targets;
  inputs.reserve(indices.size());
  targets.reserve(indices.size());
  for (auto i : indices) {
    inputs.push_back(windows.at(i).input);
    targets.push_back(windows.at(i).target);
  }
  return {torch::stack(inputs), torch::stack(targets)};
}

}  // namespace sthyper::data
