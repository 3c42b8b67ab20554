#include "sthyper/dtw.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <vector>

#include <torch/torch.h>

#include <json.hpp>

#include "sthyper/errors.hpp"

namespace sthyper::data {

double dtw_distance(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) {
    throw ShapeError("dtw_distance: series must be non-empty");
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  const std::size_t m = b.size();
  std::vector<double> prev(m + 1, inf);
  std::vector<double> curr(m + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    curr[0] = inf;
    for (std::size_t j = 1; j <= m; ++j) {
      const double cost = std::abs(a[i - 1] - b[j - 1]);
      curr[j] = cost + std::min({prev[j], curr[j - 1], prev[j - 1]});
    }
    std::swap(prev, curr);
  }
  return prev[m];
}

DtwAffinity compute_dtw_adjacency(const torch::Tensor& series) {
  if (series.dim() != 2 || series.size(0) < 1 || series.size(1) < 1) {
    throw ShapeError("compute_dtw_adjacency: expected a non-empty N x L matrix");
  }
  const auto values = series.to(torch::kFloat64).contiguous();
  const std::int64_t n = values.size(0);
  const std::int64_t len = values.size(1);
  const double* base = values.data_ptr<double>();
  const auto row = [&](std::int64_t i) {
    return std::span<const double>(base + i * len, static_cast<std::size_t>(len));
  };

  auto dist = torch::zeros({n, n}, torch::kFloat64);
  auto d = dist.accessor<double, 2>();
  std::vector<double> upper;
  upper.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = i + 1; j < n; ++j) {
      const double v = dtw_distance(row(i), row(j));
      d[i][j] = v;
      d[j][i] = v;
      upper.push_back(v);
    }
  }

  DtwAffinity out;
  if (!upper.empty()) {
    std::sort(upper.begin(), upper.end());
    const std::size_t mid = upper.size() / 2;
    out.sigma = upper.size() % 2 == 1 ? upper[mid] : 0.5 * (upper[mid - 1] + upper[mid]);
  }

  out.matrix = torch::empty({n, n}, torch::kFloat64);
  auto a = out.matrix.accessor<double, 2>();
  const double s2 = out.sigma * out.sigma;
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      const double v = d[i][j];
      // Zero distance is affinity 1 even when sigma degenerates to 0.
      a[i][j] = v == 0.0 ? 1.0 : (s2 > 0.0 ? std::exp(-(v * v) / s2) : 0.0);
    }
  }
  return out;
}

std::uint64_t hash_values(const torch::Tensor& values) {
  const auto v = values.to(torch::kFloat64).contiguous();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&h](const unsigned char* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (std::int64_t i = 0; i < v.dim(); ++i) {
    const std::int64_t s = v.size(i);
    mix(reinterpret_cast<const unsigned char*>(&s), sizeof(s));
  }
  mix(reinterpret_cast<const unsigned char*>(v.data_ptr<double>()),
      static_cast<std::size_t>(v.numel()) * sizeof(double));
  return h;
}

DtwAffinity load_or_compute_dtw(const torch::Tensor& series, const std::filesystem::path& cache_dir) {
  const std::uint64_t h = hash_values(series);
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  const auto bin_path = cache_dir / ("dtw_" + std::string(hex) + ".bin");
  const auto meta_path = cache_dir / ("dtw_" + std::string(hex) + ".json");
  const std::int64_t n = series.size(0);

  if (std::filesystem::exists(bin_path) && std::filesystem::exists(meta_path)) {
    try {
      nlohmann::json meta;
      std::ifstream(meta_path) >> meta;
      if (meta.at("dataset_hash").get<std::string>() == hex && meta.at("n").get<std::int64_t>() == n) {
        DtwAffinity out;
        out.sigma = meta.at("sigma").get<double>();
        out.matrix = torch::empty({n, n}, torch::kFloat64);
        std::ifstream in(bin_path, std::ios::binary);
        in.read(reinterpret_cast<char*>(out.matrix.data_ptr<double>()),
                static_cast<std::streamsize>(n * n * sizeof(double)));
        if (in.gcount() == static_cast<std::streamsize>(n * n * sizeof(double))) {
          return out;
        }
      }
    } catch (const nlohmann::json::exception&) {
      // unreadable sidecar: fall through and recompute
    }
  }

  auto out = compute_dtw_adjacency(series);
  std::error_code ec;
  std::filesystem::create_directories(cache_dir, ec);
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) {
    throw IoError("cannot write DTW cache " + bin_path.string());
  }
  bin.write(reinterpret_cast<const char*>(out.matrix.data_ptr<double>()),
            static_cast<std::streamsize>(n * n * sizeof(double)));
  nlohmann::json meta = {{"dataset_hash", hex}, {"sigma", out.sigma}, {"n", n}, {"dtype", "float64"}};
  std::ofstream(meta_path) << meta.dump(2) << '\n';
  return out;
}

}  // namespace sthyper::data
