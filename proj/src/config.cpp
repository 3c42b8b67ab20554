#include "sthyper/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "sthyper/errors.hpp"

namespace sthyper {

namespace {

using nlohmann::json;

template <typename Config, typename Visitor>
void visit_fields(Config& c, Visitor&& v) {
  v("input_len", c.input_len);
  v("horizon", c.horizon);
  v("split_ratios", c.split_ratios);
  v("timestamp_column", c.timestamp_column);
  v("pooling_ratio", c.pooling_ratio);
  v("spatial_scales", c.spatial_scales);
  v("patch_len", c.patch_len);
  v("temporal_scales", c.temporal_scales);
  v("hidden_dim", c.hidden_dim);
  v("memory_items", c.memory_items);
  v("memory_dim", c.memory_dim);
  v("graph_order", c.graph_order);
  v("hyperedges", c.hyperedges);
  v("nodes_per_hyperedge", c.nodes_per_hyperedge);
  v("ahm_layers", c.ahm_layers);
  v("topk_neighbors", c.topk_neighbors);
  v("head", c.head);
  v("gp_weight", c.gp_weight);
  v("loss_reduction", c.loss_reduction);
  v("learning_rate", c.learning_rate);
  v("max_epochs", c.max_epochs);
  v("patience", c.patience);
  v("batch_size", c.batch_size);
  v("grad_clip", c.grad_clip);
  v("seed", c.seed);
  v("serial", c.serial);
  v("disable_ahm", c.disable_ahm);
  v("disable_gp_loss", c.disable_gp_loss);
  v("plain_graph_learning", c.plain_graph_learning);
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace

bool ModelConfig::use_short_head() const {
  if (head == "short") return true;
  if (head == "long") return false;
  return horizon <= input_len;
}

std::vector<std::int64_t> ModelConfig::node_counts(std::int64_t n_vars) const {
  std::vector<std::int64_t> counts{n_vars};
  for (std::int64_t j = 1; j < spatial_scales; ++j) {
    counts.push_back(counts.back() / pooling_ratio);
  }
  return counts;
}

std::vector<std::int64_t> ModelConfig::temporal_lengths() const {
  std::vector<std::int64_t> lengths{input_len};
  for (std::int64_t k = 1; k < temporal_scales; ++k) {
    lengths.push_back(lengths.back() / 2);
  }
  return lengths;
}

std::vector<std::int64_t> ModelConfig::patch_counts() const {
  std::vector<std::int64_t> out;
  for (auto t : temporal_lengths()) out.push_back(t / patch_len);
  return out;
}

std::int64_t ModelConfig::alpha(std::int64_t n_vars) const {
  std::int64_t total = 0;
  for (auto n : node_counts(n_vars)) total += n;
  return total * temporal_scales;
}

void ModelConfig::validate_static() const {
  require(input_len >= 1, "input_len must be >= 1");
  require(horizon >= 1, "horizon must be >= 1");
  require(pooling_ratio >= 1, "pooling_ratio must be >= 1");
  require(spatial_scales >= 1, "spatial_scales must be >= 1");
  require(temporal_scales >= 1, "temporal_scales must be >= 1");
  require(patch_len >= 1, "patch_len must be >= 1");
  require(hidden_dim >= 1 && memory_items >= 1 && memory_dim >= 1,
          "hidden_dim, memory_items and memory_dim must be >= 1");
  require(graph_order >= 1, "graph_order must be >= 1");
  require(hyperedges >= 1, "hyperedges must be >= 1");
  require(nodes_per_hyperedge >= 1, "nodes_per_hyperedge must be >= 1");
  require(ahm_layers >= 1, "ahm_layers must be >= 1");
  require(topk_neighbors >= 0, "topk_neighbors must be >= 0");
  require(head == "auto" || head == "short" || head == "long", "head must be auto, short or long");
  require(gp_weight >= 0.0 && gp_weight <= 1.0, "gp_weight must lie in [0, 1]");
  require(loss_reduction == "sum" || loss_reduction == "mean", "loss_reduction must be sum or mean");
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(max_epochs >= 1, "max_epochs must be >= 1");
  require(patience >= 1, "patience must be >= 1");
  require(batch_size >= 1, "batch_size must be >= 1");
  for (double r : split_ratios) require(r > 0.0, "split ratios must be positive");
  const double total = split_ratios[0] + split_ratios[1] + split_ratios[2];
  require(std::abs(total - 1.0) <= 1e-9, "split ratios must sum to 1");

  const std::int64_t divisor = std::int64_t{1} << (temporal_scales - 1);
  require(input_len % divisor == 0,
          "input_len " + std::to_string(input_len) + " is not divisible by 2^(temporal_scales-1) = " +
              std::to_string(divisor));
  const auto lengths = temporal_lengths();
  for (std::size_t k = 0; k < lengths.size(); ++k) {
    require(lengths[k] / patch_len >= 1,
            "no complete patch at scale (j=1, k=" + std::to_string(k + 1) + ", r=" + std::to_string(patch_len) +
                "): T_k=" + std::to_string(lengths[k]));
  }
}

std::vector<std::string> ModelConfig::validate(std::int64_t n_vars) const {
  validate_static();
  require(n_vars >= 1, "dataset must have at least one variable");
  const auto counts = node_counts(n_vars);
  for (std::size_t j = 0; j < counts.size(); ++j) {
    require(counts[j] >= 1, "spatial scale j=" + std::to_string(j + 1) +
                                " has no nodes (N=" + std::to_string(n_vars) +
                                ", q=" + std::to_string(pooling_ratio) +
                                ", J=" + std::to_string(spatial_scales) + ")");
  }
  std::vector<std::string> warnings;
  const auto lengths = temporal_lengths();
  for (std::size_t k = 0; k < lengths.size(); ++k) {
    const std::int64_t dropped = lengths[k] % patch_len;
    if (2 * dropped > patch_len) {
      warnings.push_back("temporal scale k=" + std::to_string(k + 1) + " drops " +
                         std::to_string(dropped) + " trailing steps when patching with r=" +
                         std::to_string(patch_len));
    }
  }
  if (nodes_per_hyperedge > alpha(n_vars)) {
    warnings.push_back("nodes_per_hyperedge exceeds the hypergraph node count; incidence stays dense");
  }
  return warnings;
}

std::string ModelConfig::hash() const {
  const std::string text = to_json(*this).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

json to_json(const ModelConfig& cfg) {
  json j = json::object();
  visit_fields(const_cast<ModelConfig&>(cfg), [&j](const char* name, const auto& field) { j[name] = field; });
  return j;
}

ModelConfig config_from_json(const json& j) {
  if (!j.is_object()) {
    throw ConfigError("config must be a JSON object");
  }
  ModelConfig cfg;
  std::set<std::string> known;
  visit_fields(cfg, [&](const char* name, auto& field) {
    known.insert(name);
    if (!j.contains(name)) return;
    try {
      j.at(name).get_to(field);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config field ") + name + ": " + e.what());
    }
  });
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) {
      throw ConfigError("unknown config field \"" + item.key() + "\"");
    }
  }
  cfg.validate_static();
  return cfg;
}

ModelConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config " + path.string());
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void save_config(const ModelConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  out << to_json(cfg).dump(2) << '\n';
}

}  // namespace sthyper
