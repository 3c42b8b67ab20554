#include "sthyper/ahm.hpp"

#include <cmath>
#include <string>

#include <torch/torch.h>

#include "sthyper/errors.hpp"
#include "sthyper/spg.hpp"

namespace sthyper::ahm {

namespace {

torch::Tensor xavier(std::int64_t rows, std::int64_t cols) {
  return torch::randn({rows, cols}, torch::kFloat64) * std::sqrt(2.0 / static_cast<double>(rows + cols));
}

}  // namespace

torch::Tensor top_k_support(const torch::Tensor& incidence, std::int64_t keep) {
  if (incidence.dim() != 2) {
    throw ShapeError("top_k_support: expected an alpha x beta matrix");
  }
  if (keep < 1) {
    throw ConfigError("nodes per hyperedge must be >= 1");
  }
  torch::NoGradGuard guard;
  const auto rows = incidence.size(0);
  if (keep >= rows) {
    return torch::ones_like(incidence);
  }
  // Stable descending sort: equal weights keep ascending row order.
  const auto order = std::get<1>(torch::sort(incidence, /*stable=*/true, /*dim=*/0, /*descending=*/true));
  auto mask = torch::zeros_like(incidence);
  mask.scatter_(0, order.narrow(0, 0, keep), 1.0);
  return mask;
}

torch::Tensor top_k_row_support(const torch::Tensor& m, std::int64_t keep) {
  return top_k_support(m.t(), keep).t();
}

torch::Tensor sparsify_incidence(const torch::Tensor& incidence, std::int64_t keep) {
  return incidence * top_k_support(incidence, keep);
}

torch::Tensor nodes_to_hyperedges(const torch::Tensor& sparse_incidence, const torch::Tensor& x,
                                  const torch::Tensor& hyperedge_weights) {
  if (sparse_incidence.dim() != 2 || x.size(-2) != sparse_incidence.size(0) ||
      hyperedge_weights.size(0) != sparse_incidence.size(1) || hyperedge_weights.size(1) != sparse_incidence.size(1)) {
    throw ShapeError("nodes_to_hyperedges: expected Λ̃ (α x β), X (α x F), U (β x β)");
  }
  const auto aggregated = sparse_incidence.t().matmul(x);
  return torch::relu(hyperedge_weights.matmul(aggregated)) + aggregated;
}

torch::Tensor build_mask(const torch::Tensor& sparse_incidence) {
  torch::NoGradGuard guard;
  return torch::where(sparse_incidence != 0, torch::zeros_like(sparse_incidence),
                      torch::full_like(sparse_incidence, kMaskedLogit));
}

HyperedgeGatImpl::HyperedgeGatImpl(std::int64_t dim, std::int64_t topk_neighbors)
    : topk_neighbors_(topk_neighbors) {
  proj = register_module("proj", torch::nn::Linear(torch::nn::LinearOptions(dim, dim).bias(false)));
  attn_src = register_parameter("attn_src", xavier(dim, 1).squeeze(1));
  attn_dst = register_parameter("attn_dst", xavier(dim, 1).squeeze(1));
  to(torch::kFloat64);
}

torch::Tensor HyperedgeGatImpl::forward(const torch::Tensor& edges, const torch::Tensor& adjacency) {
  const auto h = proj->forward(edges);
  const auto src = h.matmul(attn_src).unsqueeze(-1);  // B x β x 1
  const auto dst = h.matmul(attn_dst).unsqueeze(-2);  // B x 1 x β
  auto attention = torch::softmax(torch::leaky_relu(src + dst, 0.2), -1);
  auto prior = adjacency;
  if (topk_neighbors_ > 0) {
    prior = prior * top_k_row_support(adjacency.detach(), topk_neighbors_);
  }
  attention = attention * prior;
  attention = attention / attention.sum(-1, /*keepdim=*/true);
  attention_ = attention;
  return torch::elu(attention.matmul(h));
}

HyperedgeUpdateImpl::HyperedgeUpdateImpl(std::int64_t dim, std::int64_t memory_dim, std::int64_t topk_neighbors) {
  gat = register_module("gat", HyperedgeGat(dim, topk_neighbors));
  query = register_module("query", torch::nn::Linear(dim, memory_dim));
  combine = register_module("combine", torch::nn::Linear(dim + memory_dim, dim));
  mlp_in = register_module("mlp_in", torch::nn::Linear(dim, dim));
  mlp_out = register_module("mlp_out", torch::nn::Linear(dim, dim));
  to(torch::kFloat64);
}

torch::Tensor HyperedgeUpdateImpl::forward(const torch::Tensor& edges, const torch::Tensor& adjacency,
                                           const torch::Tensor& memory) {
  spg::check_row_stochastic(adjacency, "hyperedge adjacency");
  const auto e2 = gat->forward(edges, adjacency);
  const auto recalled = torch::softmax(query->forward(e2).matmul(memory.t()), -1).matmul(memory);
  const auto mixed = edges + combine->forward(torch::cat({e2, recalled}, -1));
  return mlp_out->forward(torch::relu(mlp_in->forward(mixed)));
}

NodeUpdateImpl::NodeUpdateImpl(std::int64_t dim) {
  q = register_module("q", torch::nn::Linear(dim, dim));
  k = register_module("k", torch::nn::Linear(dim, dim));
  v = register_module("v", torch::nn::Linear(dim, dim));
  mlp_in = register_module("mlp_in", torch::nn::Linear(dim, dim));
  mlp_out = register_module("mlp_out", torch::nn::Linear(dim, dim));
  norm = register_module("norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  to(torch::kFloat64);
}

torch::Tensor NodeUpdateImpl::forward(const torch::Tensor& nodes, const torch::Tensor& edges, const torch::Tensor& mask) {
  if (mask.dim() != 2 || mask.size(0) != nodes.size(-2) || mask.size(1) != edges.size(-2)) {
    throw ShapeError("hyperedges_to_nodes: mask must be alpha x beta");
  }
  const auto scores = q->forward(nodes).matmul(k->forward(edges).transpose(-1, -2)) + mask;
  attention_ = torch::softmax(scores, -1);
  const auto attended = attention_.matmul(v->forward(edges));
  const auto updated = norm->forward(mlp_out->forward(torch::relu(mlp_in->forward(attended))) + nodes);
  const auto isolated = (mask != 0).all(-1, /*keepdim=*/true);  // α x 1
  if (!isolated.any().item<bool>()) {
    return updated;
  }
  return torch::where(isolated, norm->forward(nodes), updated);
}

AdaptiveHypergraphImpl::AdaptiveHypergraphImpl(const HypergraphOptions& options) : options_(options) {
  if (options.nodes < 1 || options.hyperedges < 1 || options.keep < 1 || options.dim < 1) {
    throw ConfigError("hypergraph sizes must be >= 1");
  }
  const auto beta = options.hyperedges;
  incidence_logits =
      register_parameter("incidence_logits", torch::randn({options.nodes, beta}, torch::kFloat64));
  weight_logits = register_parameter("weight_logits", torch::randn({beta, beta}, torch::kFloat64) * 0.1);
  memory = register_parameter("memory", xavier(options.memory_items, options.memory_dim));
  w_e1 = register_parameter("w_e1", xavier(beta, options.memory_items));
  w_e2 = register_parameter("w_e2", xavier(beta, options.memory_items));
  edge_update = register_module("edge_update", HyperedgeUpdate(options.dim, options.memory_dim, options.topk_neighbors));
  node_update = register_module("node_update", NodeUpdate(options.dim));
}

torch::Tensor AdaptiveHypergraphImpl::incidence() const { return torch::sigmoid(incidence_logits); }

torch::Tensor AdaptiveHypergraphImpl::sparse_incidence() const {
  return sparsify_incidence(incidence(), options_.keep);
}

torch::Tensor AdaptiveHypergraphImpl::hyperedge_weights() const { return spg::row_softmax(weight_logits); }

torch::Tensor AdaptiveHypergraphImpl::hyperedge_adjacency() const { return spg::learn_adjacency(memory, w_e1, w_e2); }

torch::Tensor AdaptiveHypergraphImpl::forward(const torch::Tensor& nodes) {
  const auto lam = sparse_incidence();
  const auto e1 = nodes_to_hyperedges(lam, nodes, hyperedge_weights());
  const auto e_hat = edge_update->forward(e1, hyperedge_adjacency(), memory);
  return node_update->forward(nodes, e_hat, build_mask(lam));
}

}  // namespace sthyper::ahm
