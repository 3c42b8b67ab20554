#pragma once

#include <cstdint>

#include "sthyper/dataset.hpp"

namespace sthyper::data {

struct SyntheticSpec {
  std::int64_t n_groups = 3;
  std::int64_t vars_per_group = 4;
  std::int64_t length = 512;
  double noise = 0.1;
  std::uint64_t seed = 0;
};

/// Variables of group g follow scale_v * (a_g sin(2πt/(L/4) + φ_g) +
/// b_g sin(2πt/(L/32) + ψ_g)) + noise * ε. Slow phases are spread evenly over
/// the groups (with a small jitter) so groups stay distinguishable. Variables
/// are ordered group-major; `group_labels` records the planted group.
TimeSeriesDataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace sthyper::data
