#pragma once

#include <cstdint>
#include <vector>

#include <torch/nn/module.h>
#include <torch/nn/pimpl.h>

#include "sthyper/ahm.hpp"
#include "sthyper/config.hpp"
#include "sthyper/fusion.hpp"
#include "sthyper/spg.hpp"
#include "sthyper/stpm.hpp"

namespace sthyper {

struct ForwardResult {
  torch::Tensor prediction;  // B x N x tau, normalized scale
  stpm::ScaleFeatureSet features;
  torch::Tensor hyper;       // B x α x D_e after the hypergraph layers
  torch::Tensor fused;       // B x N x D_e
};

/// The full forecaster: spatial pyramid, multi-scale encoder, hypergraph
/// layers, fusion and output head.
class StHyperImpl : public torch::nn::Module {
 public:
  StHyperImpl(const ModelConfig& config, std::int64_t n_vars);

  /// series: B x N x T (or N x T) on the normalized scale.
  ForwardResult forward_full(const torch::Tensor& series);
  torch::Tensor forward(const torch::Tensor& series) { return forward_full(series).prediction; }

  /// Sum of the graph pooling loss over all spatial boundaries against the
  /// stored DTW affinity. Zero when J = 1 or no affinity has been set.
  torch::Tensor graph_pooling_loss() const;

  void set_dtw_affinity(const torch::Tensor& affinity);
  const torch::Tensor& dtw_affinity() const { return dtw_affinity_; }

  /// J x K simplex weights ω.
  torch::Tensor fusion_weights() const;
  std::vector<torch::Tensor> assignments() const;

  const ModelConfig& config() const { return config_; }
  std::int64_t n_vars() const { return n_vars_; }
  bool short_head() const { return short_head_; }

  spg::SpatialPyramid pyramid{nullptr};
  stpm::StpmEncoder encoder{nullptr};
  std::vector<ahm::AdaptiveHypergraph> hypergraphs;
  fusion::FusionAdapter adapter{nullptr};
  torch::Tensor fusion_logits;
  fusion::ShortTermHead short_term{nullptr};
  fusion::LongTermHead long_term{nullptr};

 private:
  ModelConfig config_;
  std::int64_t n_vars_;
  bool short_head_;
  torch::Tensor dtw_affinity_;
};
TORCH_MODULE(StHyper);

}  // namespace sthyper
