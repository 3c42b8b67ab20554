#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <torch/torch.h>

#include "sthyper/config.hpp"

namespace testing {

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("sthyper_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline torch::Tensor randn(std::initializer_list<std::int64_t> shape) {
  return torch::randn(shape, torch::kFloat64);
}

inline double max_abs(const torch::Tensor& t) { return t.abs().max().item<double>(); }

/// The small configuration used for gradient checks.
inline sthyper::ModelConfig tiny_config() {
  sthyper::ModelConfig c;
  c.input_len = 16;
  c.horizon = 4;
  c.pooling_ratio = 3;
  c.spatial_scales = 2;
  c.temporal_scales = 2;
  c.patch_len = 4;
  c.hidden_dim = 8;
  c.memory_dim = 4;
  c.memory_items = 5;
  c.hyperedges = 4;
  c.nodes_per_hyperedge = 3;
  c.batch_size = 2;
  return c;
}

/// Synthetic-task configuration (12 variables, T = 32, tau = 8).
inline sthyper::ModelConfig synthetic_config() {
  sthyper::ModelConfig c;
  c.input_len = 32;
  c.horizon = 8;
  c.pooling_ratio = 4;
  c.spatial_scales = 2;
  c.temporal_scales = 2;
  c.patch_len = 8;
  c.hidden_dim = 16;
  c.memory_items = 8;
  c.memory_dim = 8;
  c.hyperedges = 8;
  c.nodes_per_hyperedge = 6;
  c.batch_size = 32;
  return c;
}

}  // namespace testing
