#include "sthyper/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <torch/torch.h>

#include "sthyper/errors.hpp"

namespace sthyper::data {

TimeSeriesDataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n_groups < 1 || spec.vars_per_group < 1 || spec.length < 1) {
    throw ConfigError("generate_synthetic: group count, group size and length must be >= 1");
  }
  if (!(spec.noise >= 0.0)) {
    throw ConfigError("generate_synthetic: noise amplitude must be non-negative");
  }
  constexpr double two_pi = 2.0 * std::numbers::pi;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const std::int64_t n = spec.n_groups * spec.vars_per_group;
  const std::int64_t len = spec.length;
  const double slow_period = static_cast<double>(len) / 4.0;
  const double fast_period = static_cast<double>(len) / 32.0;

  std::vector<double> slow_amp(spec.n_groups), fast_amp(spec.n_groups);
  std::vector<double> slow_phase(spec.n_groups), fast_phase(spec.n_groups);
  for (std::int64_t g = 0; g < spec.n_groups; ++g) {
    slow_amp[g] = 0.8 + 0.4 * unit(rng);
    fast_amp[g] = 0.3 + 0.3 * unit(rng);
    slow_phase[g] = two_pi * (static_cast<double>(g) + 0.2 * (unit(rng) - 0.5)) /
                    static_cast<double>(spec.n_groups);
    fast_phase[g] = two_pi * unit(rng);
  }

  TimeSeriesDataset ds;
  ds.values = torch::empty({n, len}, torch::kFloat64);
  auto acc = ds.values.accessor<double, 2>();
  for (std::int64_t g = 0; g < spec.n_groups; ++g) {
    for (std::int64_t v = 0; v < spec.vars_per_group; ++v) {
      const std::int64_t i = g * spec.vars_per_group + v;
      const double scale = 0.5 + unit(rng);
      for (std::int64_t t = 0; t < len; ++t) {
        const double tt = static_cast<double>(t);
        const double signal = slow_amp[g] * std::sin(two_pi * tt / slow_period + slow_phase[g]) +
                              fast_amp[g] * std::sin(two_pi * tt / fast_period + fast_phase[g]);
        acc[i][t] = scale * signal + spec.noise * gauss(rng);
      }
      ds.variable_names.push_back("g" + std::to_string(g) + "_v" + std::to_string(v));
      ds.group_labels.push_back(g);
    }
  }
  ds.timestamps.resize(static_cast<std::size_t>(len));
  for (std::int64_t t = 0; t < len; ++t) ds.timestamps[static_cast<std::size_t>(t)] = t;
  return ds;
}

}  // namespace sthyper::data
