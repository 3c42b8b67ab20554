#pragma once

#include <cstdint>

#include <torch/nn/module.h>
#include <torch/nn/modules/linear.h>
#include <torch/nn/modules/normalization.h>
#include <torch/nn/pimpl.h>

namespace sthyper::ahm {

/// Additive mask value standing in for -inf.
inline constexpr double kMaskedLogit = -1e9;

/// 0/1 mask keeping, per column, the `keep` largest entries of `incidence`
/// (ties go to the lower row index). Never carries gradient.
torch::Tensor top_k_support(const torch::Tensor& incidence, std::int64_t keep);

/// Same selection along rows: keeps the `keep` largest entries of each row.
torch::Tensor top_k_row_support(const torch::Tensor& m, std::int64_t keep);

/// Λ̃: `incidence` (α x β) with all but the top-`keep` entries of each column
/// zeroed. Gradient reaches only the retained entries.
torch::Tensor sparsify_incidence(const torch::Tensor& incidence, std::int64_t keep);

/// E1 = ReLU(U Λ̃^T X) + Λ̃^T X. x: [B x] α x F, u: β x β.
torch::Tensor nodes_to_hyperedges(const torch::Tensor& sparse_incidence, const torch::Tensor& x,
                                  const torch::Tensor& hyperedge_weights);

/// Γ: 0 where Λ̃ != 0, kMaskedLogit elsewhere.
torch::Tensor build_mask(const torch::Tensor& sparse_incidence);

/// Single-head graph attention over the hyperedge graph. Attention logits
/// LeakyReLU(a_src·Wh_i + a_dst·Wh_j) are softmaxed, multiplied by the
/// hyperedge adjacency as a prior and renormalized per row.
class HyperedgeGatImpl : public torch::nn::Module {
 public:
  HyperedgeGatImpl(std::int64_t dim, std::int64_t topk_neighbors = 0);
  /// edges: B x β x F, adjacency: β x β. Returns B x β x F.
  torch::Tensor forward(const torch::Tensor& edges, const torch::Tensor& adjacency);
  /// Row-stochastic B x β x β attention of the last forward call.
  const torch::Tensor& last_attention() const { return attention_; }

  torch::nn::Linear proj{nullptr};
  torch::Tensor attn_src;
  torch::Tensor attn_dst;

 private:
  std::int64_t topk_neighbors_;
  torch::Tensor attention_;
};
TORCH_MODULE(HyperedgeGat);

/// Hyperedges-to-hyperedges phase:
///   E2  = GAT(E1, A_h)
///   E2' = softmax((E2 W_Q + b_Q) M_h^T) M_h
///   Ê   = MLP(E1 + W concat(E2, E2') + b)
class HyperedgeUpdateImpl : public torch::nn::Module {
 public:
  HyperedgeUpdateImpl(std::int64_t dim, std::int64_t memory_dim, std::int64_t topk_neighbors = 0);
  torch::Tensor forward(const torch::Tensor& edges, const torch::Tensor& adjacency, const torch::Tensor& memory);

  HyperedgeGat gat{nullptr};
  torch::nn::Linear query{nullptr};
  torch::nn::Linear combine{nullptr};
  torch::nn::Linear mlp_in{nullptr};
  torch::nn::Linear mlp_out{nullptr};
};
TORCH_MODULE(HyperedgeUpdate);

/// Hyperedges-to-nodes phase: masked attention from nodes (queries) to
/// hyperedges (keys/values), then LayerNorm(MLP(X_att) + X). Nodes whose mask
/// row is fully masked skip attention and return LayerNorm(X).
class NodeUpdateImpl : public torch::nn::Module {
 public:
  explicit NodeUpdateImpl(std::int64_t dim);
  /// nodes: B x α x F, edges: B x β x F, mask: α x β.
  torch::Tensor forward(const torch::Tensor& nodes, const torch::Tensor& edges, const torch::Tensor& mask);
  const torch::Tensor& last_attention() const { return attention_; }

  torch::nn::Linear q{nullptr};
  torch::nn::Linear k{nullptr};
  torch::nn::Linear v{nullptr};
  torch::nn::Linear mlp_in{nullptr};
  torch::nn::Linear mlp_out{nullptr};
  torch::nn::LayerNorm norm{nullptr};

 private:
  torch::Tensor attention_;
};
TORCH_MODULE(NodeUpdate);

struct HypergraphOptions {
  std::int64_t nodes = 1;       // α
  std::int64_t hyperedges = 40; // β
  std::int64_t keep = 20;       // K'
  std::int64_t dim = 96;        // D_e
  std::int64_t memory_items = 20;
  std::int64_t memory_dim = 32;
  std::int64_t topk_neighbors = 0;
};

/// Learnable sparse incidence plus tri-phase propagation over α feature
/// nodes.
class AdaptiveHypergraphImpl : public torch::nn::Module {
 public:
  explicit AdaptiveHypergraphImpl(const HypergraphOptions& options);

  /// nodes: B x α x D_e -> B x α x D_e.
  torch::Tensor forward(const torch::Tensor& nodes);

  /// Λ = sigmoid(logits), α x β.
  torch::Tensor incidence() const;
  torch::Tensor sparse_incidence() const;
  /// U: row-softmax of free β x β logits.
  torch::Tensor hyperedge_weights() const;
  /// A_h from the hyperedge memory bank.
  torch::Tensor hyperedge_adjacency() const;

  const HypergraphOptions& options() const { return options_; }

  torch::Tensor incidence_logits;
  torch::Tensor weight_logits;
  torch::Tensor memory;
  torch::Tensor w_e1;
  torch::Tensor w_e2;
  HyperedgeUpdate edge_update{nullptr};
  NodeUpdate node_update{nullptr};

 private:
  HypergraphOptions options_;
};
TORCH_MODULE(AdaptiveHypergraph);

}  // namespace sthyper::ahm
