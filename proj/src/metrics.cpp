#include "sthyper/metrics.hpp"

#include <cmath>

#include <torch/torch.h>

#include "sthyper/errors.hpp"

namespace sthyper {

MetricValues compute_metrics(const torch::Tensor& prediction, const torch::Tensor& target) {
  if (!prediction.sizes().equals(target.sizes())) {
    throw ShapeError("metrics: prediction and target shapes differ");
  }
  if (prediction.numel() == 0) {
    throw ShapeError("metrics: empty input");
  }
  torch::NoGradGuard guard;
  const auto p = prediction.to(torch::kFloat64);
  const auto y = target.to(torch::kFloat64);
  const auto err = p - y;
  MetricValues m;
  m.mae = err.abs().mean().item<double>();
  m.mse = err.pow(2).mean().item<double>();
  m.rmse = std::sqrt(m.mse);
  m.mape = (err.abs() / y.abs().clamp_min(kMapeEpsilon)).mean().item<double>() * 100.0;
  return m;
}

MetricsReport build_report(const torch::Tensor& prediction, const torch::Tensor& target) {
  MetricsReport r;
  r.overall = compute_metrics(prediction, target);
  r.samples = prediction.dim() == 3 ? prediction.size(0) : 1;
  const auto horizon = prediction.size(-1);
  for (std::int64_t h = 0; h < horizon; ++h) {
    r.per_horizon[h + 1] = compute_metrics(prediction.select(-1, h), target.select(-1, h));
  }
  return r;
}

nlohmann::json to_json(const MetricValues& m) {
  return {{"MAE", m.mae}, {"MSE", m.mse}, {"RMSE", m.rmse}, {"MAPE", m.mape}};
}

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["all"] = to_json(r.overall);
  for (const auto& [h, m] : r.per_horizon) {
    j["horizon_" + std::to_string(h)] = to_json(m);
  }
  j["samples"] = r.samples;
  return j;
}

}  // namespace sthyper
