#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace sthyper {

/// Every hyperparameter of the model and of the training protocol. The JSON
/// config file uses exactly these field names as keys.
struct ModelConfig {
  // Task.
  std::int64_t input_len = 96;  // T
  std::int64_t horizon = 96;    // tau
  std::array<double, 3> split_ratios{0.7, 0.1, 0.2};
  std::string timestamp_column = "timestamp";

  // Spatial-temporal pyramid.
  std::int64_t pooling_ratio = 20;   // q
  std::int64_t spatial_scales = 2;   // J
  std::int64_t patch_len = 16;       // r
  std::int64_t temporal_scales = 3;  // K
  std::int64_t hidden_dim = 64;      // D, GCRU hidden size
  std::int64_t memory_items = 20;    // m
  std::int64_t memory_dim = 32;      // d
  std::int64_t graph_order = 1;

  // Hypergraph.
  std::int64_t hyperedges = 40;           // beta
  std::int64_t nodes_per_hyperedge = 20;  // K'
  std::int64_t ahm_layers = 1;
  std::int64_t topk_neighbors = 0;        // 0 keeps the dense hyperedge graph

  // Output and loss.
  std::string head = "auto";  // auto | short | long
  double gp_weight = 1e-2;    // lambda
  std::string loss_reduction = "sum";  // sum | mean

  // Optimization.
  double learning_rate = 1e-3;
  std::int64_t max_epochs = 150;
  std::int64_t patience = 15;
  std::int64_t batch_size = 32;
  double grad_clip = 5.0;  // global norm; <= 0 disables
  std::uint64_t seed = 0;
  bool serial = true;

  // Ablations.
  bool disable_ahm = false;
  bool disable_gp_loss = false;
  bool plain_graph_learning = false;

  /// Hypergraph feature width D + d.
  std::int64_t feature_dim() const { return hidden_dim + memory_dim; }
  /// Effective lambda after the disable_gp_loss switch.
  double effective_gp_weight() const { return disable_gp_loss ? 0.0 : gp_weight; }
  /// Short-term (recurrent) head iff horizon <= input length, unless overridden.
  bool use_short_head() const;

  /// N_1 = n_vars, N_j = floor(N_{j-1} / q).
  std::vector<std::int64_t> node_counts(std::int64_t n_vars) const;
  /// T_k = T / 2^(k-1).
  std::vector<std::int64_t> temporal_lengths() const;
  /// floor(T_k / r) per temporal scale.
  std::vector<std::int64_t> patch_counts() const;
  /// Hypergraph node count (N_1 + ... + N_J) * K.
  std::int64_t alpha(std::int64_t n_vars) const;

  /// Joint validation; throws ConfigError. Returns non-fatal warnings.
  std::vector<std::string> validate(std::int64_t n_vars) const;
  /// Checks that do not depend on the dataset.
  void validate_static() const;

  std::string hash() const;
};

nlohmann::json to_json(const ModelConfig& cfg);
/// Unknown keys and ill-typed values raise ConfigError.
ModelConfig config_from_json(const nlohmann::json& j);
ModelConfig load_config(const std::filesystem::path& path);
void save_config(const ModelConfig& cfg, const std::filesystem::path& path);

}  // namespace sthyper
