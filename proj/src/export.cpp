#include "sthyper/export.hpp"

#include <charconv>
#include <fstream>

#include <torch/torch.h>

#include "sthyper/errors.hpp"

namespace sthyper {

void write_matrix(const torch::Tensor& matrix, const std::filesystem::path& dir, const std::string& stem,
                  const nlohmann::json& meta) {
  auto m = matrix.detach().to(torch::kFloat64).contiguous();
  if (m.dim() == 1) m = m.unsqueeze(1);
  if (m.dim() != 2) {
    throw ShapeError("export: " + stem + " is not a matrix");
  }
  const auto csv_path = dir / (stem + ".csv");
  std::ofstream csv(csv_path);
  if (!csv) {
    throw IoError("cannot write " + csv_path.string());
  }
  const auto acc = m.accessor<double, 2>();
  char buf[64];
  for (std::int64_t i = 0; i < m.size(0); ++i) {
    for (std::int64_t j = 0; j < m.size(1); ++j) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), acc[i][j]);
      if (j) csv << ',';
      csv.write(buf, ptr - buf);
    }
    csv << '\n';
  }
  nlohmann::json side = meta;
  side["rows"] = m.size(0);
  side["cols"] = m.size(1);
  side["file"] = stem + ".csv";
  std::ofstream js(dir / (stem + ".json"));
  js << side.dump(2) << '\n';
  if (!csv || !js) {
    throw IoError("failed writing " + stem + " in " + dir.string());
  }
}

std::vector<std::string> export_structures(const Checkpoint& checkpoint, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw IoError("cannot create export directory " + out_dir.string());
  }
  torch::NoGradGuard guard;
  auto model = instantiate(checkpoint);
  const auto& cfg = checkpoint.config;
  const auto counts = cfg.node_counts(checkpoint.n_vars);
  std::vector<std::string> stems;
  auto emit = [&](const torch::Tensor& t, const std::string& stem, nlohmann::json meta) {
    write_matrix(t, out_dir, stem, meta);
    stems.push_back(stem);
  };

  for (std::size_t j = 0; j < counts.size(); ++j) {
    emit(model->pyramid->adjacency(j), "A_" + std::to_string(j + 1),
         {{"description", "learned adjacency, row-stochastic"}, {"scale", j + 1}});
  }
  for (std::size_t j = 0; j + 1 < counts.size(); ++j) {
    const auto s = model->pyramid->assignment(j);
    emit(s, "S_" + std::to_string(j + 1),
         {{"description", "soft assignment from scale j to scale j+1, row-softmax"}, {"scale", j + 1}});
    emit(s.argmax(1).to(torch::kFloat64), "labels_" + std::to_string(j + 1),
         {{"description", "arg-max group label per node"}, {"scale", j + 1}});
  }

  nlohmann::json index = nlohmann::json::array();
  for (const auto& slot : stpm::ScaleFeatureSet::index_map(counts, cfg.temporal_scales)) {
    index.push_back({{"j", slot.spatial + 1}, {"k", slot.temporal + 1}, {"node", slot.node}});
  }
  for (std::size_t l = 0; l < model->hypergraphs.size(); ++l) {
    auto& h = model->hypergraphs[l];
    const auto suffix = std::to_string(l + 1);
    emit(h->sparse_incidence(), "Lambda_tilde_" + suffix,
         {{"description", "sparsified incidence, rows are hypergraph nodes, columns hyperedges"},
          {"keep_per_column", std::min(cfg.nodes_per_hyperedge, cfg.alpha(checkpoint.n_vars))},
          {"row_index", index}});
    emit(h->hyperedge_adjacency(), "A_h_" + suffix, {{"description", "hyperedge adjacency, row-stochastic"}});
    emit(h->hyperedge_weights(), "U_" + suffix, {{"description", "hyperedge weight matrix, row-stochastic"}});
  }
  emit(model->fusion_weights(), "omega",
       {{"description", "fusion weights, rows are spatial scales, columns temporal scales"}});
  return stems;
}

}  // namespace sthyper
