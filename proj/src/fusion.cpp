#include "sthyper/fusion.hpp"

#include <torch/torch.h>

#include "sthyper/errors.hpp"

namespace sthyper::fusion {

torch::Tensor fuse_scales(const stpm::ScaleFeatureSet& features, const torch::Tensor& weights,
                          const std::vector<torch::Tensor>& assignments) {
  const auto J = static_cast<std::int64_t>(features.node_counts.size());
  const auto K = features.temporal_scales;
  if (weights.dim() != 2 || weights.size(0) != J || weights.size(1) != K) {
    throw ShapeError("fuse_scales: weights must be J x K");
  }
  if (static_cast<std::int64_t>(assignments.size()) != J - 1) {
    throw ShapeError("fuse_scales: expected J-1 assignment matrices");
  }
  torch::Tensor fused;
  torch::Tensor lift;  // S^1 ··· S^{j-1}, N_1 x N_j
  for (std::int64_t j = 0; j < J; ++j) {
    torch::Tensor scale_sum;
    for (std::int64_t k = 0; k < K; ++k) {
      const auto term = weights[j][k] * features.block(j, k);
      scale_sum = scale_sum.defined() ? scale_sum + term : term;
    }
    if (j == 0) {
      fused = scale_sum;
      continue;
    }
    const auto& s = assignments[static_cast<std::size_t>(j - 1)];
    lift = lift.defined() ? lift.matmul(s) : s;
    fused = fused + lift.matmul(scale_sum);
  }
  return fused;
}

FusionAdapterImpl::FusionAdapterImpl(std::int64_t hidden_dim, std::int64_t memory_dim) : memory_dim_(memory_dim) {
  proj = register_module("proj", torch::nn::Linear(hidden_dim + memory_dim, hidden_dim));
  to(torch::kFloat64);
}

torch::Tensor FusionAdapterImpl::forward(const torch::Tensor& block) {
  return torch::cat({proj->forward(block), block.narrow(-1, 0, memory_dim_)}, -1);
}

ShortTermHeadImpl::ShortTermHeadImpl(std::int64_t feature_dim, std::int64_t hidden_dim, std::int64_t graph_order) {
  init = register_module("init", torch::nn::Linear(feature_dim, hidden_dim));
  cell = register_module("cell", stpm::GcruCell(1, hidden_dim, graph_order));
  out = register_module("out", torch::nn::Linear(hidden_dim, 1));
  to(torch::kFloat64);
}

torch::Tensor ShortTermHeadImpl::forward(const torch::Tensor& fused, const torch::Tensor& adjacency,
                                         const torch::Tensor& last_value, std::int64_t horizon) {
  if (horizon < 1) {
    throw ConfigError("horizon must be >= 1");
  }
  auto h = torch::tanh(init->forward(fused));
  auto input = last_value.unsqueeze(-1);
  std::vector<torch::Tensor> steps;
  steps.reserve(static_cast<std::size_t>(horizon));
  for (std::int64_t t = 0; t < horizon; ++t) {
    h = cell->forward(input, h, adjacency);
    input = out->forward(h);
    steps.push_back(input);
  }
  return torch::cat(steps, -1);
}

LongTermHeadImpl::LongTermHeadImpl(std::int64_t feature_dim, std::int64_t hidden_dim, std::int64_t horizon) {
  if (horizon < 1) {
    throw ConfigError("horizon must be >= 1");
  }
  fc1 = register_module("fc1", torch::nn::Linear(feature_dim, hidden_dim));
  fc2 = register_module("fc2", torch::nn::Linear(hidden_dim, horizon));
  to(torch::kFloat64);
}

torch::Tensor LongTermHeadImpl::forward(const torch::Tensor& fused) {
  return fc2->forward(torch::relu(fc1->forward(fused)));
}

Reduction parse_reduction(const std::string& name) {
  if (name == "sum") return Reduction::kSum;
  if (name == "mean") return Reduction::kMean;
  throw ConfigError("unknown loss reduction \"" + name + "\"");
}

torch::Tensor l1_loss(const torch::Tensor& prediction, const torch::Tensor& target, Reduction reduction) {
  if (!prediction.sizes().equals(target.sizes())) {
    throw ShapeError("l1_loss: prediction and target shapes differ");
  }
  const auto abs = (prediction - target).abs();
  if (reduction == Reduction::kMean) {
    return abs.mean();
  }
  if (abs.dim() == 3) {
    return abs.sum({1, 2}).mean();
  }
  return abs.sum();
}

torch::Tensor training_loss(const torch::Tensor& prediction, const torch::Tensor& target,
                            const torch::Tensor& pooling_loss, double lambda, Reduction reduction) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ConfigError("balancing factor must lie in [0, 1], got " + std::to_string(lambda));
  }
  auto loss = l1_loss(prediction, target, reduction);
  if (lambda != 0.0) {
    loss = loss + lambda * pooling_loss;
  }
  return loss;
}

}  // namespace sthyper::fusion
