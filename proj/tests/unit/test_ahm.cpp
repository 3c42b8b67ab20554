#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "oracles.hpp"
#include "sthyper/ahm.hpp"
#include "sthyper/errors.hpp"
#include "sthyper/spg.hpp"

using namespace sthyper;
using namespace sthyper::ahm;

namespace {

torch::Tensor column(std::initializer_list<double> v) {
  return torch::tensor(std::vector<double>(v), torch::kFloat64).reshape({-1, 1});
}

}  // namespace

TEST_SUITE("ahm") {

TEST_CASE("sparsify keeps the top-K' of each column") {
  CHECK(torch::equal(sparsify_incidence(column({0.9, 0.1, 0.5, 0.7}), 2), column({0.9, 0.0, 0.0, 0.7})));

  const auto lam = torch::rand({5, 3}, torch::kFloat64);
  CHECK(torch::equal(sparsify_incidence(lam, 5), lam));
  CHECK(torch::equal(sparsify_incidence(lam, 9), lam));

  CHECK(torch::equal(sparsify_incidence(column({0.5, 0.5, 0.5}), 2), column({0.5, 0.5, 0.0})));
  CHECK(torch::equal(sparsify_incidence(column({0.2, 0.5, 0.5, 0.5, 0.9}), 3), column({0.0, 0.5, 0.5, 0.0, 0.9})));
}

TEST_CASE("sparsify passes gradient only through the retained support") {
  auto lam = torch::rand({6, 4}, torch::kFloat64).requires_grad_();
  const auto w = torch::randn({6, 4}, torch::kFloat64);
  (sparsify_incidence(lam, 2) * w).sum().backward();
  const auto support = top_k_support(lam.detach(), 2);
  CHECK(torch::equal(lam.grad(), w * support));
}

TEST_CASE("every column keeps exactly min(K', alpha) nonzeros") {
  torch::manual_seed(13);
  for (int trial = 0; trial < 20; ++trial) {
    const auto alpha = 1 + trial % 9;
    const auto keep = 1 + trial % 5;
    const auto lam = torch::sigmoid(testing::randn({alpha, 7}));
    const auto counts = (sparsify_incidence(lam, keep) != 0).sum(0);
    CHECK(torch::all(counts == std::min<std::int64_t>(keep, alpha)).item<bool>());
  }
}

TEST_CASE("nodes to hyperedges examples") {
  torch::manual_seed(14);
  const auto lam = sparsify_incidence(torch::rand({5, 3}, torch::kFloat64), 2);
  const auto X = testing::randn({5, 4});
  CHECK(torch::equal(nodes_to_hyperedges(lam, X, torch::zeros({3, 3}, torch::kFloat64)), lam.t().matmul(X)));

  auto empty = lam.clone();
  empty.select(1, 1).zero_();
  const auto E = nodes_to_hyperedges(empty, X, torch::eye(3, torch::kFloat64));
  CHECK(torch::equal(E[1], torch::zeros({4}, torch::kFloat64)));

  const auto lam1 = column({1.0, 0.0, 0.5});
  const auto X1 = torch::tensor({{1.0, 1.0}, {2.0, 2.0}, {4.0, 4.0}}, torch::kFloat64);
  const auto E1 = nodes_to_hyperedges(lam1, X1, torch::ones({1, 1}, torch::kFloat64));
  CHECK(torch::equal(E1, torch::tensor({{6.0, 6.0}}, torch::kFloat64)));
}

TEST_CASE("nodes to hyperedges matches the oracle") {
  torch::manual_seed(15);
  const auto lam = sparsify_incidence(torch::rand({6, 3}, torch::kFloat64), 3);
  const auto X = testing::randn({6, 4});
  const auto U = torch::softmax(testing::randn({3, 3}), 1);
  const auto agg = oracle::matmul(oracle::transpose(oracle::from_tensor(lam)), oracle::from_tensor(X));
  auto mixed = oracle::matmul(oracle::from_tensor(U), agg);
  for (std::size_t i = 0; i < mixed.v.size(); ++i) mixed.v[i] = std::max(mixed.v[i], 0.0) + agg.v[i];
  CHECK(testing::max_abs(nodes_to_hyperedges(lam, X, U) - oracle::to_tensor(mixed)) < 1e-12);
}

TEST_CASE("locality: nodes outside a hyperedge do not affect its aggregate") {
  torch::manual_seed(16);
  const auto lam = sparsify_incidence(torch::rand({8, 4}, torch::kFloat64), 3);
  const auto X = testing::randn({8, 5});
  const auto U = torch::diag(torch::rand({4}, torch::kFloat64));
  const auto base = nodes_to_hyperedges(lam, X, U);
  for (int e = 0; e < 4; ++e) {
    for (int i = 0; i < 8; ++i) {
      if (lam[i][e].item<double>() != 0.0) continue;
      auto Xp = X.clone();
      Xp[i] += 100.0;
      CHECK(torch::equal(nodes_to_hyperedges(lam, Xp, U)[e], base[e]));
    }
  }
}

TEST_CASE("build mask examples") {
  const auto lam = torch::tensor({{0.9, 0.0}, {0.0, 0.3}}, torch::kFloat64);
  CHECK(torch::equal(build_mask(lam), torch::tensor({{0.0, kMaskedLogit}, {kMaskedLogit, 0.0}}, torch::kFloat64)));
  const auto zero_row = torch::tensor({{0.0, 0.0}, {0.2, 0.3}}, torch::kFloat64);
  CHECK(torch::equal(build_mask(zero_row)[0], torch::full({2}, kMaskedLogit, torch::kFloat64)));
  CHECK(torch::equal(build_mask(torch::rand({3, 4}, torch::kFloat64) + 0.1), torch::zeros({3, 4}, torch::kFloat64)));
}

TEST_CASE("GAT: a single hyperedge gets weight exactly 1") {
  HyperedgeGat gat(5);
  gat->forward(testing::randn({2, 1, 5}), torch::ones({1, 1}, torch::kFloat64));
  CHECK(torch::equal(gat->last_attention(), torch::ones({2, 1, 1}, torch::kFloat64)));
}

TEST_CASE("GAT attention rows sum to one after the prior") {
  torch::manual_seed(17);
  for (std::int64_t topk : {0, 2}) {
    HyperedgeGat gat(6, topk);
    const auto A = torch::softmax(testing::randn({5, 5}), 1);
    const auto out = gat->forward(testing::randn({3, 5, 6}), A);
    CHECK(out.sizes() == std::vector<std::int64_t>{3, 5, 6});
    CHECK(testing::max_abs(gat->last_attention().sum(-1) - 1.0) < 1e-6);
    if (topk > 0) CHECK(((gat->last_attention() != 0).sum(-1) == topk).all().item<bool>());
  }
}

TEST_CASE("hyperedge update output shape and contract") {
  for (std::int64_t beta : {1, 3, 8}) {
    HyperedgeUpdate up(6, 4);
    const auto mem = testing::randn({5, 4});
    const auto out = up->forward(testing::randn({2, beta, 6}), torch::softmax(testing::randn({beta, beta}), 1), mem);
    CHECK(out.sizes() == std::vector<std::int64_t>{2, beta, 6});
  }
  HyperedgeUpdate up(6, 4);
  CHECK_THROWS_AS(up->forward(testing::randn({1, 3, 6}), torch::ones({3, 3}, torch::kFloat64), testing::randn({5, 4})),
                  ContractError);
}

TEST_CASE("node update: single hyperedge, masked mass, zero MLP residual, isolated node") {
  torch::manual_seed(18);
  NodeUpdate nu(6);
  const auto nodes = testing::randn({1, 4, 6});
  const auto edges = testing::randn({1, 3, 6});
  const auto lam = torch::tensor({{0.7, 0.0, 0.0}, {0.2, 0.4, 0.9}, {0.0, 0.0, 0.5}, {0.0, 0.0, 0.0}}, torch::kFloat64);
  const auto out = nu->forward(nodes, edges, build_mask(lam));
  const auto& att = nu->last_attention();
  CHECK(att[0][0][0].item<double>() == 1.0);
  CHECK(att[0][2][2].item<double>() == 1.0);
  CHECK(att[0][0][1].item<double>() < 1e-30);
  CHECK(att[0][0][2].item<double>() < 1e-30);
  CHECK(torch::equal(out[0][3], nu->norm->forward(nodes)[0][3]));
  CHECK(torch::isfinite(out).all().item<bool>());

  {
    torch::NoGradGuard g;
    nu->mlp_out->weight.zero_();
    nu->mlp_out->bias.zero_();
  }
  const auto residual = nu->forward(nodes, edges, build_mask(lam));
  CHECK(torch::equal(residual, nu->norm->forward(nodes)));
}

TEST_CASE("masked attention mass stays below 1e-12 for random incidences") {
  torch::manual_seed(19);
  NodeUpdate nu(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto lam = sparsify_incidence(torch::rand({9, 4}, torch::kFloat64), 3);
    const auto mask = build_mask(lam);
    nu->forward(testing::randn({2, 9, 5}) * 5.0, testing::randn({2, 4, 5}) * 5.0, mask);
    const auto masked = (nu->last_attention() * (mask != 0)).sum(-1);
    const auto connected = (lam != 0).any(-1);
    CHECK((masked.masked_select(connected.unsqueeze(0).expand_as(masked)) < 1e-12).all().item<bool>());
  }
}

TEST_CASE("adaptive hypergraph invariants") {
  torch::manual_seed(20);
  AdaptiveHypergraph h(HypergraphOptions{12, 4, 3, 6, 5, 4, 0});
  const auto lam = h->incidence();
  CHECK(lam.min().item<double>() >= 0.0);
  CHECK(lam.max().item<double>() <= 1.0);
  const auto sparse = h->sparse_incidence();
  const auto support = sparse != 0;
  CHECK(torch::equal(sparse.masked_select(support), lam.masked_select(support)));
  CHECK(((support.sum(0)) == 3).all().item<bool>());
  CHECK_NOTHROW(spg::check_row_stochastic(h->hyperedge_adjacency(), "A_h"));
  CHECK_NOTHROW(spg::check_row_stochastic(h->hyperedge_weights(), "U"));
  const auto out = h->forward(testing::randn({2, 12, 6}));
  CHECK(out.sizes() == std::vector<std::int64_t>{2, 12, 6});
}

TEST_CASE("adaptive hypergraph gradient check (alpha=12, beta=4, K'=3, D_e=6)") {
  torch::manual_seed(23);
  AdaptiveHypergraph h(HypergraphOptions{12, 4, 3, 6, 5, 4, 0});
  const auto x = testing::randn({2, 12, 6});
  const auto w = testing::randn({2, 12, 6});
  std::vector<std::pair<std::string, torch::Tensor>> params;
  for (const auto& p : h->named_parameters()) params.emplace_back(p.key(), p.value());
  const auto samples = oracle::gradient_check(params, [&] { return (h->forward(x) * w).sum(); }, 150, 1e-5, 5);
  for (const auto& s : samples) {
    INFO(s.name << "[" << s.index << "] analytic " << s.analytic << " numeric " << s.numeric);
    CHECK(oracle::relative_error(s, 1e-6) < 1e-4);
  }
}

}  // TEST_SUITE
