#pragma once

#include <cstdint>
#include <filesystem>
#include <span>

#include <torch/types.h>

namespace sthyper::data {

/// Dynamic time warping distance with absolute-difference local cost and the
/// standard (match, insertion, deletion) step pattern, no window constraint.
/// Runs in O(|a|·|b|) time and O(|b|) memory.
double dtw_distance(std::span<const double> a, std::span<const double> b);

struct DtwAffinity {
  /// N x N, symmetric, entries in (0, 1], diagonal 1.
  torch::Tensor matrix;
  /// Kernel bandwidth: the median of the pairwise distances (i < j).
  double sigma = 0.0;
};

/// Pairwise DTW distances between the rows of `series` (N x L) mapped to
/// affinities exp(-dist^2 / sigma^2).
DtwAffinity compute_dtw_adjacency(const torch::Tensor& series);

/// FNV-1a over the shape and raw float64 bytes of `values`.
std::uint64_t hash_values(const torch::Tensor& values);

/// Looks for `dtw_<hash>.bin` (+ `.json` sidecar) in `cache_dir`; computes and
/// writes it when absent or when the sidecar hash does not match.
DtwAffinity load_or_compute_dtw(const torch::Tensor& series, const std::filesystem::path& cache_dir);

}  // namespace sthyper::data
