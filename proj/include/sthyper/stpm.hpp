#pragma once

#include <cstdint>
#include <vector>

#include <torch/nn/module.h>
#include <torch/nn/modules/linear.h>
#include <torch/nn/pimpl.h>

#include "sthyper/spg.hpp"

namespace sthyper::stpm {

/// S^T X: series of scale j (N_j x T, optionally batched B x N_j x T) pooled
/// into the N_{j+1} group nodes of scale j+1.
torch::Tensor coarsen_series(const torch::Tensor& series, const torch::Tensor& assignment);

/// Concatenation [A Z, A^2 Z, ..., A^order Z] along the feature axis.
/// z: B x N x F, adjacency: N x N.
torch::Tensor graph_propagate(const torch::Tensor& adjacency, const torch::Tensor& z, std::int64_t order);

/// GRU cell whose gate transforms are graph convolutions Z -> A Z W.
///   z, r = sigmoid(A [x, h] W_g + b_g)
///   c    = tanh(A [x, r*h] W_c + b_c)
///   h'   = z*h + (1-z)*c
class GcruCellImpl : public torch::nn::Module {
 public:
  GcruCellImpl(std::int64_t input_dim, std::int64_t hidden_dim, std::int64_t graph_order = 1);

  /// x: B x N x input_dim, h: B x N x hidden_dim, adjacency: N x N.
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& h, const torch::Tensor& adjacency);

  std::int64_t hidden_dim() const { return hidden_dim_; }
  torch::nn::Linear gates{nullptr};
  torch::nn::Linear candidate{nullptr};

 private:
  std::int64_t input_dim_;
  std::int64_t hidden_dim_;
  std::int64_t graph_order_;
};
TORCH_MODULE(GcruCell);

/// Runs `cell` over the P patch steps of `patches` (B x N x P x D) from a zero
/// initial state and returns the final hidden state B x N x H. The adjacency
/// must be row-stochastic.
torch::Tensor gcru_encode(GcruCell& cell, const torch::Tensor& patches, const torch::Tensor& adjacency);

/// K-1 stages of (1x1 conv, 1x2 average pooling). The 1x1 conv acts on a
/// single input channel, so each stage is x -> pool(w*x + b).
class TemporalPyramidImpl : public torch::nn::Module {
 public:
  explicit TemporalPyramidImpl(std::int64_t scales);
  /// series: B x N x T. Returns K tensors with lengths T, T/2, ..., T/2^(K-1).
  std::vector<torch::Tensor> forward(const torch::Tensor& series);

  std::vector<torch::Tensor> conv_weight;
  std::vector<torch::Tensor> conv_bias;
};
TORCH_MODULE(TemporalPyramid);

/// Non-overlapping length-r patches, each projected to D dims by one shared
/// linear map; trailing steps that do not fill a patch are dropped.
class PatchEmbeddingImpl : public torch::nn::Module {
 public:
  PatchEmbeddingImpl(std::int64_t patch_len, std::int64_t dim);
  /// series: B x N x T -> B x N x floor(T/r) x D.
  torch::Tensor forward(const torch::Tensor& series);

  std::int64_t patch_len() const { return patch_len_; }
  torch::nn::Linear proj{nullptr};

 private:
  std::int64_t patch_len_;
};
TORCH_MODULE(PatchEmbedding);

/// Memory pattern matching: Q = X W + b, X_att = softmax(Q M^T) M,
/// output concat(X_att, X). x: ... x N x D, memory: m x d, weight: D x d.
torch::Tensor memory_match(const torch::Tensor& x, const torch::Tensor& memory, const torch::Tensor& weight,
                           const torch::Tensor& bias);

/// Position of one hypergraph node slot in the (j, k, node) grid (0-based).
struct SlotIndex {
  std::int64_t spatial = 0;
  std::int64_t temporal = 0;
  std::int64_t node = 0;
};

/// Encoded features for all J x K scales. blocks[j*K + k] is B x N_j x F.
/// Flattening orders slots j-major, then k, then node.
struct ScaleFeatureSet {
  std::vector<std::int64_t> node_counts;
  std::int64_t temporal_scales = 1;
  std::vector<torch::Tensor> blocks;

  std::int64_t alpha() const;
  const torch::Tensor& block(std::int64_t j, std::int64_t k) const;
  torch::Tensor flatten() const;
  static ScaleFeatureSet unflatten(const torch::Tensor& flat, const std::vector<std::int64_t>& node_counts,
                                   std::int64_t temporal_scales);
  static std::vector<SlotIndex> index_map(const std::vector<std::int64_t>& node_counts,
                                          std::int64_t temporal_scales);
};

struct StpmOptions {
  std::vector<std::int64_t> node_counts;
  std::int64_t temporal_scales = 3;
  std::int64_t patch_len = 16;
  std::int64_t hidden_dim = 64;
  std::int64_t memory_dim = 32;
  std::int64_t graph_order = 1;
};

/// Spatial coarsening, temporal pyramid, patch embedding, one GCRU encoder per
/// (j, k) with its own parameters, then memory matching against M^j.
class StpmEncoderImpl : public torch::nn::Module {
 public:
  explicit StpmEncoderImpl(const StpmOptions& options);

  /// series: B x N x T (normalized input window).
  ScaleFeatureSet forward(const torch::Tensor& series, const spg::SpatialPyramidImpl& pyramid);

  const StpmOptions& options() const { return options_; }

 private:
  StpmOptions options_;
  std::vector<TemporalPyramid> pyramids_;
  std::vector<PatchEmbedding> patches_;
  std::vector<GcruCell> encoders_;
  std::vector<torch::nn::Linear> queries_;
};
TORCH_MODULE(StpmEncoder);

}  // namespace sthyper::stpm
