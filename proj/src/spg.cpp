#include "sthyper/spg.hpp"

#include <cmath>
#include <string>

#include <torch/torch.h>

#include "sthyper/errors.hpp"

namespace sthyper::spg {

namespace {

torch::Tensor init_param(std::int64_t rows, std::int64_t cols) {
  // Xavier-normal.
  const double std = std::sqrt(2.0 / static_cast<double>(rows + cols));
  return torch::randn({rows, cols}, torch::kFloat64) * std;
}

}  // namespace

torch::Tensor row_softmax(const torch::Tensor& logits) { return torch::softmax(logits, -1); }

void check_row_stochastic(const torch::Tensor& m, const char* what, double tol) {
  torch::NoGradGuard guard;
  if (m.numel() == 0) return;
  const double max_dev = (m.sum(-1) - 1.0).abs().max().item<double>();
  const double min_val = m.min().item<double>();
  if (!(max_dev <= tol) || min_val < -tol) {
    throw ContractError(std::string(what) + " is not row-stochastic (max row-sum deviation " +
                        std::to_string(max_dev) + ", min entry " + std::to_string(min_val) + ")");
  }
}

torch::Tensor learn_adjacency(const torch::Tensor& memory, const torch::Tensor& w_e1,
                              const torch::Tensor& w_e2) {
  if (memory.dim() != 2 || w_e1.dim() != 2 || w_e2.dim() != 2 || w_e1.size(1) != memory.size(0) ||
      w_e2.size(1) != memory.size(0) || w_e1.size(0) != w_e2.size(0)) {
    throw ShapeError("learn_adjacency: expected M (m x d), W_E1 and W_E2 (n x m)");
  }
  return embedding_adjacency(w_e1.matmul(memory), w_e2.matmul(memory));
}

torch::Tensor embedding_adjacency(const torch::Tensor& e1, const torch::Tensor& e2) {
  return row_softmax(torch::relu(e1.matmul(e2.t())));
}

torch::Tensor pooling_loss(const torch::Tensor& assignment, const torch::Tensor& dtw_affinity) {
  const auto n = assignment.size(0);
  if (assignment.dim() != 2 || dtw_affinity.dim() != 2 || dtw_affinity.size(0) != n ||
      dtw_affinity.size(1) != n) {
    throw ShapeError("pooling_loss: expected S (n x g) and A_dtw (n x n)");
  }
  check_row_stochastic(assignment, "assignment matrix");
  const auto diff = dtw_affinity - assignment.matmul(assignment.t());
  // linalg_vector_norm has a well-defined (zero) subgradient at diff == 0.
  const auto link = torch::linalg_vector_norm(diff, 2);
  const auto safe = assignment.clamp_min(1e-300);
  const auto entropy = -(assignment * safe.log()).sum(-1).mean();
  return link + entropy;
}

torch::Tensor coarsen_dtw(const torch::Tensor& dtw_affinity, const torch::Tensor& assignment) {
  if (dtw_affinity.dim() != 2 || assignment.dim() != 2 || dtw_affinity.size(0) != dtw_affinity.size(1) ||
      dtw_affinity.size(1) != assignment.size(0)) {
    throw ShapeError("coarsen_dtw: expected A_dtw (n x n) and S (n x g), got " +
                     std::to_string(dtw_affinity.size(0)) + "x" + std::to_string(dtw_affinity.size(-1)) +
                     " and " + std::to_string(assignment.size(0)) + "x" +
                     std::to_string(assignment.size(-1)));
  }
  return assignment.t().matmul(dtw_affinity).matmul(assignment);
}

SpatialPyramidImpl::SpatialPyramidImpl(const SpatialPyramidOptions& options) : options_(options) {
  if (options.n_vars < 1 || options.pooling_ratio < 1 || options.scales < 1) {
    throw ConfigError("spatial pyramid needs n_vars, pooling_ratio and scales >= 1");
  }
  node_counts_.push_back(options.n_vars);
  for (std::int64_t j = 1; j < options.scales; ++j) {
    node_counts_.push_back(node_counts_.back() / options.pooling_ratio);
    if (node_counts_.back() < 1) {
      throw ConfigError("spatial scale " + std::to_string(j + 1) + " collapses to zero nodes");
    }
  }
  const auto m = options.memory_items;
  const auto d = options.memory_dim;
  for (std::size_t j = 0; j < node_counts_.size(); ++j) {
    const auto n = node_counts_[j];
    const auto tag = std::to_string(j + 1);
    memory_.push_back(register_parameter("memory_" + tag, init_param(m, d)));
    if (options.plain_graph_learning) {
      embed1_.push_back(register_parameter("embed1_" + tag, init_param(n, d)));
      embed2_.push_back(register_parameter("embed2_" + tag, init_param(n, d)));
    } else {
      w_e1_.push_back(register_parameter("w_e1_" + tag, init_param(n, m)));
      w_e2_.push_back(register_parameter("w_e2_" + tag, init_param(n, m)));
    }
    if (j + 1 < node_counts_.size()) {
      assign_logits_.push_back(register_parameter(
          "assign_logits_" + tag, torch::randn({n, node_counts_[j + 1]}, torch::kFloat64) * 0.1));
    }
  }
}

torch::Tensor SpatialPyramidImpl::adjacency(std::size_t scale) const {
  if (scale >= node_counts_.size()) {
    throw std::out_of_range("spatial scale index " + std::to_string(scale) + " out of range");
  }
  if (options_.plain_graph_learning) {
    return embedding_adjacency(embed1_[scale], embed2_[scale]);
  }
  return learn_adjacency(memory_[scale], w_e1_[scale], w_e2_[scale]);
}

torch::Tensor SpatialPyramidImpl::assignment(std::size_t boundary) const {
  return row_softmax(assignment_logits(boundary));
}

const torch::Tensor& SpatialPyramidImpl::assignment_logits(std::size_t boundary) const {
  if (boundary >= assign_logits_.size()) {
    throw std::out_of_range("assignment boundary " + std::to_string(boundary) + " out of range (J-1 = " +
                            std::to_string(assign_logits_.size()) + ")");
  }
  return assign_logits_[boundary];
}

const torch::Tensor& SpatialPyramidImpl::memory(std::size_t scale) const {
  if (scale >= memory_.size()) {
    throw std::out_of_range("spatial scale index " + std::to_string(scale) + " out of range");
  }
  return memory_[scale];
}

std::vector<torch::Tensor> SpatialPyramidImpl::dtw_pyramid(const torch::Tensor& base_dtw) const {
  std::vector<torch::Tensor> out{base_dtw};
  for (std::size_t j = 0; j < assign_logits_.size(); ++j) {
    out.push_back(coarsen_dtw(out.back(), assignment(j)).detach());
  }
  return out;
}

torch::Tensor SpatialPyramidImpl::graph_pooling_loss(const torch::Tensor& base_dtw) const {
  auto total = torch::zeros({}, torch::kFloat64);
  if (assign_logits_.empty()) return total;
  const auto targets = dtw_pyramid(base_dtw);
  for (std::size_t j = 0; j < assign_logits_.size(); ++j) {
    total = total + pooling_loss(assignment(j), targets[j]);
  }
  return total;
}

}  // namespace sthyper::spg
