#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <json.hpp>
#include <torch/types.h>

namespace sthyper {

/// Denominator floor for MAPE.
inline constexpr double kMapeEpsilon = 1e-5;

struct MetricValues {
  double mae = 0.0;
  double mse = 0.0;
  double rmse = 0.0;
  double mape = 0.0;  // percent
};

/// MAE, MSE, RMSE and MAPE over all entries of `prediction` vs `target`.
MetricValues compute_metrics(const torch::Tensor& prediction, const torch::Tensor& target);

struct MetricsReport {
  MetricValues overall;
  /// Keyed by 1-based horizon step.
  std::map<std::int64_t, MetricValues> per_horizon;
  std::int64_t samples = 0;
};

/// prediction/target: B x N x tau on the denormalized scale.
MetricsReport build_report(const torch::Tensor& prediction, const torch::Tensor& target);

nlohmann::json to_json(const MetricValues& m);
/// {"all": {...}, "horizon_1": {...}, ..., "samples": B}
nlohmann::json to_json(const MetricsReport& r);

}  // namespace sthyper
