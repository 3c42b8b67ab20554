#pragma once

#include <cstdint>
#include <vector>

#include <torch/nn/module.h>
#include <torch/nn/pimpl.h>

namespace sthyper::spg {

/// Softmax along the last dimension.
torch::Tensor row_softmax(const torch::Tensor& logits);

/// Throws ContractError unless every row of `m` is non-negative and sums to 1
/// within `tol`.
void check_row_stochastic(const torch::Tensor& m, const char* what, double tol = 1e-6);

/// Memory-network graph structure learning:
///   E1 = W_E1 M, E2 = W_E2 M, A = softmax(ReLU(E1 E2^T)).
/// memory: m x d, w_e1/w_e2: n x m. Returns the n x n row-stochastic A.
torch::Tensor learn_adjacency(const torch::Tensor& memory, const torch::Tensor& w_e1,
                              const torch::Tensor& w_e2);

/// Same construction on free node embeddings (n x d), without a memory bank.
torch::Tensor embedding_adjacency(const torch::Tensor& e1, const torch::Tensor& e2);

/// ||A_dtw - S S^T||_F + mean_i H(S_i), with H the natural-log Shannon
/// entropy. S must be row-stochastic.
torch::Tensor pooling_loss(const torch::Tensor& assignment, const torch::Tensor& dtw_affinity);

/// S^T A_dtw S: the DTW affinity of the next, coarser scale.
torch::Tensor coarsen_dtw(const torch::Tensor& dtw_affinity, const torch::Tensor& assignment);

struct SpatialPyramidOptions {
  std::int64_t n_vars = 1;
  std::int64_t pooling_ratio = 20;
  std::int64_t scales = 2;
  std::int64_t memory_items = 20;
  std::int64_t memory_dim = 32;
  bool plain_graph_learning = false;
};

/// Learned adjacency A^j, memory bank M^j and assignment S^j per spatial scale.
/// Scales and boundaries are 0-based here: scale 0 is the variable level and
/// boundary j links scale j to scale j+1.
class SpatialPyramidImpl : public torch::nn::Module {
 public:
  explicit SpatialPyramidImpl(const SpatialPyramidOptions& options);

  std::int64_t num_scales() const { return static_cast<std::int64_t>(node_counts_.size()); }
  const std::vector<std::int64_t>& node_counts() const { return node_counts_; }

  torch::Tensor adjacency(std::size_t scale) const;
  torch::Tensor assignment(std::size_t boundary) const;
  const torch::Tensor& memory(std::size_t scale) const;
  const torch::Tensor& assignment_logits(std::size_t boundary) const;

  /// A^1_dtw followed by S^T A S for every coarser scale, using the current S.
  /// Coarsened targets are detached: they act as fixed targets for the step.
  std::vector<torch::Tensor> dtw_pyramid(const torch::Tensor& base_dtw) const;

  /// Graph pooling loss summed over all J-1 boundaries.
  torch::Tensor graph_pooling_loss(const torch::Tensor& base_dtw) const;

 private:
  SpatialPyramidOptions options_;
  std::vector<std::int64_t> node_counts_;
  std::vector<torch::Tensor> memory_;
  std::vector<torch::Tensor> w_e1_;
  std::vector<torch::Tensor> w_e2_;
  std::vector<torch::Tensor> embed1_;
  std::vector<torch::Tensor> embed2_;
  std::vector<torch::Tensor> assign_logits_;
};
TORCH_MODULE(SpatialPyramid);

}  // namespace sthyper::spg
