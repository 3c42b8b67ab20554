#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <torch/optim/adam.h>

#include "sthyper/config.hpp"
#include "sthyper/dataset.hpp"
#include "sthyper/model.hpp"

namespace sthyper {

using NamedTensors = std::vector<std::pair<std::string, torch::Tensor>>;

/// Everything needed to rebuild a trained model: config, learnable
/// parameters and buffers, optimizer moments, normalization statistics.
struct Checkpoint {
  ModelConfig config;
  std::int64_t n_vars = 0;
  std::vector<std::string> variable_names;
  data::NormStats norm_stats;
  std::int64_t epoch = 0;
  double best_val_loss = 0.0;
  NamedTensors parameters;  // parameters and buffers, by module path
  NamedTensors optimizer;   // "<param>/exp_avg", "<param>/exp_avg_sq", "<param>/step"
};

/// Deep copy of the model state (and optionally the Adam moments).
NamedTensors snapshot_state(const StHyper& model);
NamedTensors snapshot_optimizer(const StHyper& model, torch::optim::Adam& optimizer);
void restore_state(StHyper& model, const NamedTensors& state);
void restore_optimizer(const StHyper& model, torch::optim::Adam& optimizer, const NamedTensors& state);

/// A new model built from the checkpoint config with its parameters loaded.
StHyper instantiate(const Checkpoint& checkpoint);

/// Directory layout: manifest.json (name -> shape, dtype, byte offset),
/// tensors.bin (raw little-endian float64/int64), metadata.json.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace sthyper
