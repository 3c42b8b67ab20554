#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <torch/nn/module.h>
#include <torch/nn/modules/linear.h>
#include <torch/nn/pimpl.h>

#include "sthyper/stpm.hpp"

namespace sthyper::fusion {

/// O^j = Σ_k ω^{j,k} X^{j,k};  X_fused = O^1 + Σ_{j>=2} (S^1 ··· S^{j-1}) O^j.
/// weights: J x K with rows on the simplex; assignments: the J-1 matrices S^j.
torch::Tensor fuse_scales(const stpm::ScaleFeatureSet& features, const torch::Tensor& weights,
                          const std::vector<torch::Tensor>& assignments);

/// Maps each D_e-wide hypergraph block to concat(W x + b, x[..., :d]): the
/// first D channels are the projected features that fusion combines as O^j,
/// the last d carry the memory-retrieval channels around the projection so
/// X_fused keeps width D + d.
class FusionAdapterImpl : public torch::nn::Module {
 public:
  FusionAdapterImpl(std::int64_t hidden_dim, std::int64_t memory_dim);
  torch::Tensor forward(const torch::Tensor& block);

  torch::nn::Linear proj{nullptr};

 private:
  std::int64_t memory_dim_;
};
TORCH_MODULE(FusionAdapter);

/// Recurrent decoder: h_0 = tanh(W X_fused + b); the first input is the last
/// observed value of each node, later inputs are the previous predictions.
class ShortTermHeadImpl : public torch::nn::Module {
 public:
  ShortTermHeadImpl(std::int64_t feature_dim, std::int64_t hidden_dim, std::int64_t graph_order = 1);
  /// fused: B x N x D_e, adjacency: N x N, last_value: B x N. Returns B x N x horizon.
  torch::Tensor forward(const torch::Tensor& fused, const torch::Tensor& adjacency, const torch::Tensor& last_value,
                        std::int64_t horizon);

  torch::nn::Linear init{nullptr};
  stpm::GcruCell cell{nullptr};
  torch::nn::Linear out{nullptr};
};
TORCH_MODULE(ShortTermHead);

/// Two-layer MLP from each node's fused vector straight to `horizon` values.
class LongTermHeadImpl : public torch::nn::Module {
 public:
  LongTermHeadImpl(std::int64_t feature_dim, std::int64_t hidden_dim, std::int64_t horizon);
  torch::Tensor forward(const torch::Tensor& fused);

  torch::nn::Linear fc1{nullptr};
  torch::nn::Linear fc2{nullptr};
};
TORCH_MODULE(LongTermHead);

enum class Reduction { kSum, kMean };
Reduction parse_reduction(const std::string& name);

/// L1 between prediction and target. kSum sums over the N x tau entries of
/// each sample and averages over the batch; kMean averages over all entries.
torch::Tensor l1_loss(const torch::Tensor& prediction, const torch::Tensor& target, Reduction reduction = Reduction::kSum);

/// L1 + lambda * L_GP; lambda must lie in [0, 1].
torch::Tensor training_loss(const torch::Tensor& prediction, const torch::Tensor& target,
                            const torch::Tensor& pooling_loss, double lambda,
                            Reduction reduction = Reduction::kSum);

}  // namespace sthyper::fusion
