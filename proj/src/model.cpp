#include "sthyper/model.hpp"

#include <torch/torch.h>

#include "sthyper/errors.hpp"

namespace sthyper {

StHyperImpl::StHyperImpl(const ModelConfig& config, std::int64_t n_vars)
    : config_(config), n_vars_(n_vars), short_head_(config.use_short_head()) {
  config_.validate(n_vars);
  const auto counts = config_.node_counts(n_vars);
  const auto J = config_.spatial_scales;
  const auto K = config_.temporal_scales;
  const auto De = config_.feature_dim();

  pyramid = register_module("pyramid", spg::SpatialPyramid(spg::SpatialPyramidOptions{
                                           n_vars, config_.pooling_ratio, J, config_.memory_items,
                                           config_.memory_dim, config_.plain_graph_learning}));
  encoder = register_module("encoder", stpm::StpmEncoder(stpm::StpmOptions{
                                           counts, K, config_.patch_len, config_.hidden_dim,
                                           config_.memory_dim, config_.graph_order}));
  if (!config_.disable_ahm) {
    for (std::int64_t l = 0; l < config_.ahm_layers; ++l) {
      hypergraphs.push_back(register_module(
          "hypergraph_" + std::to_string(l + 1),
          ahm::AdaptiveHypergraph(ahm::HypergraphOptions{config_.alpha(n_vars), config_.hyperedges,
                                                         config_.nodes_per_hyperedge, De, config_.memory_items,
                                                         config_.memory_dim, config_.topk_neighbors})));
    }
  }
  adapter = register_module("adapter", fusion::FusionAdapter(config_.hidden_dim, config_.memory_dim));
  fusion_logits = register_parameter("fusion_logits", torch::zeros({J, K}, torch::kFloat64));
  if (short_head_) {
    short_term = register_module("short_term", fusion::ShortTermHead(De, De, config_.graph_order));
  } else {
    long_term = register_module("long_term", fusion::LongTermHead(De, De, config_.horizon));
  }
  dtw_affinity_ = register_buffer("dtw_affinity", torch::zeros({0, 0}, torch::kFloat64));
}

ForwardResult StHyperImpl::forward_full(const torch::Tensor& series) {
  auto x = series.dim() == 2 ? series.unsqueeze(0) : series;
  if (x.dim() != 3 || x.size(1) != n_vars_ || x.size(2) != config_.input_len) {
    throw ShapeError("expected input window " + std::to_string(n_vars_) + " x " + std::to_string(config_.input_len) +
                     ", got " + std::to_string(x.size(-2)) + " x " + std::to_string(x.size(-1)));
  }
  x = x.to(torch::kFloat64);

  ForwardResult out;
  out.features = encoder->forward(x, *pyramid);
  auto nodes = out.features.flatten();
  for (auto& layer : hypergraphs) {
    nodes = layer->forward(nodes);
  }
  out.hyper = nodes;

  auto hyper = stpm::ScaleFeatureSet::unflatten(nodes, out.features.node_counts, out.features.temporal_scales);
  for (auto& block : hyper.blocks) {
    block = adapter->forward(block);
  }
  out.fused = fusion::fuse_scales(hyper, fusion_weights(), assignments());

  if (short_head_) {
    const auto last = x.select(-1, x.size(-1) - 1);
    out.prediction = short_term->forward(out.fused, pyramid->adjacency(0), last, config_.horizon);
  } else {
    out.prediction = long_term->forward(out.fused);
  }
  return out;
}

torch::Tensor StHyperImpl::graph_pooling_loss() const {
  if (!dtw_affinity_.defined() || dtw_affinity_.numel() == 0 || config_.spatial_scales < 2) {
    return torch::zeros({}, torch::kFloat64);
  }
  return pyramid->graph_pooling_loss(dtw_affinity_);
}

void StHyperImpl::set_dtw_affinity(const torch::Tensor& affinity) {
  if (affinity.dim() != 2 || affinity.size(0) != n_vars_ || affinity.size(1) != n_vars_) {
    throw ShapeError("DTW affinity must be " + std::to_string(n_vars_) + " x " + std::to_string(n_vars_));
  }
  torch::NoGradGuard guard;
  dtw_affinity_.set_(affinity.to(torch::kFloat64).clone());
}

torch::Tensor StHyperImpl::fusion_weights() const { return torch::softmax(fusion_logits, -1); }

std::vector<torch::Tensor> StHyperImpl::assignments() const {
  std::vector<torch::Tensor> out;
  for (std::int64_t j = 0; j + 1 < config_.spatial_scales; ++j) {
    out.push_back(pyramid->assignment(static_cast<std::size_t>(j)));
  }
  return out;
}

}  // namespace sthyper
