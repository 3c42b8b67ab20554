#include "sthyper/stpm.hpp"

#include <string>

#include <torch/torch.h>

#include "sthyper/errors.hpp"

namespace sthyper::stpm {

torch::Tensor coarsen_series(const torch::Tensor& series, const torch::Tensor& assignment) {
  if (assignment.dim() != 2 || series.dim() < 2 || series.size(-2) != assignment.size(0)) {
    throw ShapeError("coarsen_series: series has " + std::to_string(series.size(-2)) +
                     " nodes but the assignment matrix has " + std::to_string(assignment.size(0)) + " rows");
  }
  return assignment.t().matmul(series);
}

torch::Tensor graph_propagate(const torch::Tensor& adjacency, const torch::Tensor& z, std::int64_t order) {
  std::vector<torch::Tensor> hops;
  hops.reserve(static_cast<std::size_t>(order));
  auto cur = z;
  for (std::int64_t k = 0; k < order; ++k) {
    cur = adjacency.matmul(cur);
    hops.push_back(cur);
  }
  return hops.size() == 1 ? hops.front() : torch::cat(hops, -1);
}

GcruCellImpl::GcruCellImpl(std::int64_t input_dim, std::int64_t hidden_dim, std::int64_t graph_order)
    : input_dim_(input_dim), hidden_dim_(hidden_dim), graph_order_(graph_order) {
  if (input_dim < 1 || hidden_dim < 1 || graph_order < 1) {
    throw ConfigError("GCRU cell dimensions and graph order must be >= 1");
  }
  const auto in = graph_order * (input_dim + hidden_dim);
  gates = register_module("gates", torch::nn::Linear(in, 2 * hidden_dim));
  candidate = register_module("candidate", torch::nn::Linear(in, hidden_dim));
  to(torch::kFloat64);
}

torch::Tensor GcruCellImpl::forward(const torch::Tensor& x, const torch::Tensor& h, const torch::Tensor& adjacency) {
  const auto xh = torch::cat({x, h}, -1);
  const auto zr = torch::sigmoid(gates->forward(graph_propagate(adjacency, xh, graph_order_)));
  auto parts = zr.split(hidden_dim_, -1);
  const auto& z = parts[0];
  const auto& r = parts[1];
  const auto xrh = torch::cat({x, r * h}, -1);
  const auto c = torch::tanh(candidate->forward(graph_propagate(adjacency, xrh, graph_order_)));
  return z * h + (1.0 - z) * c;
}

torch::Tensor gcru_encode(GcruCell& cell, const torch::Tensor& patches, const torch::Tensor& adjacency) {
  if (patches.dim() != 4 || patches.size(2) < 1) {
    throw ShapeError("gcru_encode: expected B x N x P x D patches with P >= 1");
  }
  spg::check_row_stochastic(adjacency, "GCRU adjacency");
  auto h = torch::zeros({patches.size(0), patches.size(1), cell->hidden_dim()}, patches.options());
  for (std::int64_t p = 0; p < patches.size(2); ++p) {
    h = cell->forward(patches.select(2, p), h, adjacency);
  }
  return h;
}

TemporalPyramidImpl::TemporalPyramidImpl(std::int64_t scales) {
  if (scales < 1) {
    throw ConfigError("temporal pyramid needs at least one scale");
  }
  for (std::int64_t k = 1; k < scales; ++k) {
    const auto tag = std::to_string(k + 1);
    conv_weight.push_back(register_parameter("conv_weight_" + tag, torch::ones({1}, torch::kFloat64)));
    conv_bias.push_back(register_parameter("conv_bias_" + tag, torch::zeros({1}, torch::kFloat64)));
  }
}

std::vector<torch::Tensor> TemporalPyramidImpl::forward(const torch::Tensor& series) {
  std::vector<torch::Tensor> out{series};
  for (std::size_t k = 0; k < conv_weight.size(); ++k) {
    const auto& prev = out.back();
    if (prev.size(-1) % 2 != 0) {
      throw ConfigError("temporal pyramid: length " + std::to_string(prev.size(-1)) + " is not divisible by 2");
    }
    const auto conv = prev * conv_weight[k] + conv_bias[k];
    auto shape = conv.sizes().vec();
    shape.back() /= 2;
    shape.push_back(2);
    out.push_back(conv.reshape(shape).mean(-1));
  }
  return out;
}

PatchEmbeddingImpl::PatchEmbeddingImpl(std::int64_t patch_len, std::int64_t dim) : patch_len_(patch_len) {
  if (patch_len < 1 || dim < 1) {
    throw ConfigError("patch length and embedding dim must be >= 1");
  }
  proj = register_module("proj", torch::nn::Linear(patch_len, dim));
  to(torch::kFloat64);
}

torch::Tensor PatchEmbeddingImpl::forward(const torch::Tensor& series) {
  const auto count = series.size(-1) / patch_len_;
  if (count < 1) {
    throw ConfigError("series of length " + std::to_string(series.size(-1)) + " has no complete patch of length " +
                      std::to_string(patch_len_));
  }
  auto shape = series.sizes().vec();
  shape.back() = count;
  shape.push_back(patch_len_);
  const auto patches = series.narrow(-1, 0, count * patch_len_).reshape(shape);
  return proj->forward(patches);
}

torch::Tensor memory_match(const torch::Tensor& x, const torch::Tensor& memory, const torch::Tensor& weight,
                           const torch::Tensor& bias) {
  if (memory.dim() != 2 || weight.dim() != 2 || weight.size(0) != x.size(-1) || weight.size(1) != memory.size(1)) {
    throw ShapeError("memory_match: expected X (.. x D), M (m x d), W (D x d)");
  }
  const auto query = x.matmul(weight) + bias;
  const auto attention = torch::softmax(query.matmul(memory.t()), -1);
  return torch::cat({attention.matmul(memory), x}, -1);
}

std::int64_t ScaleFeatureSet::alpha() const {
  std::int64_t total = 0;
  for (auto n : node_counts) total += n;
  return total * temporal_scales;
}

const torch::Tensor& ScaleFeatureSet::block(std::int64_t j, std::int64_t k) const {
  const auto idx = static_cast<std::size_t>(j * temporal_scales + k);
  if (j < 0 || k < 0 || k >= temporal_scales || idx >= blocks.size() || !blocks[idx].defined()) {
    throw ShapeError("missing feature block (j=" + std::to_string(j + 1) + ", k=" + std::to_string(k + 1) + ")");
  }
  return blocks[idx];
}

torch::Tensor ScaleFeatureSet::flatten() const {
  if (blocks.size() != node_counts.size() * static_cast<std::size_t>(temporal_scales)) {
    throw ShapeError("incomplete feature set");
  }
  return torch::cat(blocks, -2);
}

ScaleFeatureSet ScaleFeatureSet::unflatten(const torch::Tensor& flat, const std::vector<std::int64_t>& node_counts,
                                           std::int64_t temporal_scales) {
  ScaleFeatureSet out;
  out.node_counts = node_counts;
  out.temporal_scales = temporal_scales;
  if (flat.size(-2) != out.alpha()) {
    throw ShapeError("unflatten: expected " + std::to_string(out.alpha()) + " slots, got " +
                     std::to_string(flat.size(-2)));
  }
  std::int64_t offset = 0;
  for (auto n : node_counts) {
    for (std::int64_t k = 0; k < temporal_scales; ++k) {
      out.blocks.push_back(flat.narrow(-2, offset, n));
      offset += n;
    }
  }
  return out;
}

std::vector<SlotIndex> ScaleFeatureSet::index_map(const std::vector<std::int64_t>& node_counts,
                                                  std::int64_t temporal_scales) {
  std::vector<SlotIndex> map;
  for (std::size_t j = 0; j < node_counts.size(); ++j) {
    for (std::int64_t k = 0; k < temporal_scales; ++k) {
      for (std::int64_t i = 0; i < node_counts[j]; ++i) {
        map.push_back({static_cast<std::int64_t>(j), k, i});
      }
    }
  }
  return map;
}

StpmEncoderImpl::StpmEncoderImpl(const StpmOptions& options) : options_(options) {
  if (options.node_counts.empty()) {
    throw ConfigError("STPM encoder needs at least one spatial scale");
  }
  const auto K = options.temporal_scales;
  for (std::size_t j = 0; j < options.node_counts.size(); ++j) {
    const auto tj = std::to_string(j + 1);
    pyramids_.push_back(register_module("temporal_" + tj, TemporalPyramid(K)));
    queries_.push_back(register_module("query_" + tj, torch::nn::Linear(options.hidden_dim, options.memory_dim)));
    for (std::int64_t k = 0; k < K; ++k) {
      const auto tag = tj + "_" + std::to_string(k + 1);
      patches_.push_back(register_module("patch_" + tag, PatchEmbedding(options.patch_len, options.hidden_dim)));
      encoders_.push_back(register_module(
          "encoder_" + tag, GcruCell(options.hidden_dim, options.hidden_dim, options.graph_order)));
    }
  }
  to(torch::kFloat64);
}

ScaleFeatureSet StpmEncoderImpl::forward(const torch::Tensor& series, const spg::SpatialPyramidImpl& pyramid) {
  if (series.dim() != 3 || series.size(1) != options_.node_counts.front()) {
    throw ShapeError("STPM encoder: expected B x " + std::to_string(options_.node_counts.front()) + " x T input");
  }
  const auto J = options_.node_counts.size();
  const auto K = options_.temporal_scales;
  ScaleFeatureSet out;
  out.node_counts = options_.node_counts;
  out.temporal_scales = K;

  auto spatial = series;
  for (std::size_t j = 0; j < J; ++j) {
    if (j > 0) {
      spatial = coarsen_series(spatial, pyramid.assignment(j - 1));
    }
    const auto adjacency = pyramid.adjacency(j);
    const auto levels = pyramids_[j]->forward(spatial);
    const auto& query = queries_[j];
    for (std::int64_t k = 0; k < K; ++k) {
      const auto idx = j * static_cast<std::size_t>(K) + static_cast<std::size_t>(k);
      const auto patches = patches_[idx]->forward(levels[static_cast<std::size_t>(k)]);
      const auto encoded = gcru_encode(encoders_[idx], patches, adjacency);
      out.blocks.push_back(memory_match(encoded, pyramid.memory(j), query->weight.t(), query->bias));
    }
  }
  return out;
}

}  // namespace sthyper::stpm
