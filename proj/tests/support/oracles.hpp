#pragma once

// Independent reference implementations used only by the tests. They work on
// plain std::vector data so they share no code with the library.

#include <cstdint>
#include <functional>
#include <vector>

#include <torch/torch.h>

namespace oracle {

struct Mat {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(std::int64_t r, std::int64_t c, double fill = 0.0) : rows(r), cols(c), v(static_cast<std::size_t>(r * c), fill) {}
  double& operator()(std::int64_t i, std::int64_t j) { return v[static_cast<std::size_t>(i * cols + j)]; }
  double operator()(std::int64_t i, std::int64_t j) const { return v[static_cast<std::size_t>(i * cols + j)]; }
};

Mat from_tensor(const torch::Tensor& t);
torch::Tensor to_tensor(const Mat& m);
std::vector<double> to_vector(const torch::Tensor& t);

Mat matmul(const Mat& a, const Mat& b);
Mat transpose(const Mat& a);

/// Full (n+1) x (m+1) lattice DP with infinite borders, cost |a_i - b_j|.
double dtw_lattice(const std::vector<double>& a, const std::vector<double>& b);
/// Minimum cost over every monotone warping path, by exhaustive recursion.
/// Exponential; only for very short series.
double dtw_enumerate(const std::vector<double>& a, const std::vector<double>& b);

/// One step of a standard GRU with h' = z*h + (1-z)*c, where
/// [z; r] = sigmoid(Wg [x; h] + bg) and c = tanh(Wc [x; r*h] + bc).
std::vector<double> gru_step(const std::vector<double>& x, const std::vector<double>& h, const Mat& wg,
                             const std::vector<double>& bg, const Mat& wc, const std::vector<double>& bc);

double mean(const std::vector<double>& x);
double population_std(const std::vector<double>& x);
double pearson(const std::vector<double>& x, const std::vector<double>& y);
double adjusted_rand_index(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b);

/// Row-wise softmax and Shannon entropy (natural log), straight from the
/// definitions.
Mat softmax_rows(const Mat& m);
double entropy(const std::vector<double>& p);

/// Central finite-difference check of one scalar function of the
/// parameters. Returns the analytic and numerical partial derivative for each
/// sampled (parameter, flat index).
struct GradSample {
  std::string name;
  std::int64_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};
std::vector<GradSample> gradient_check(const std::vector<std::pair<std::string, torch::Tensor>>& params,
                                       const std::function<torch::Tensor()>& loss, std::int64_t samples,
                                       double step, std::uint64_t seed);
/// |a - n| / max(|a|, |n|, floor).
double relative_error(const GradSample& s, double floor);

}  // namespace oracle
