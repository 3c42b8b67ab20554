#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "oracles.hpp"
#include "sthyper/config.hpp"
#include "sthyper/errors.hpp"
#include "sthyper/fusion.hpp"
#include "sthyper/model.hpp"

using namespace sthyper;
using namespace sthyper::fusion;

namespace {

stpm::ScaleFeatureSet feature_set(const std::vector<std::int64_t>& counts, std::int64_t K, std::int64_t F) {
  stpm::ScaleFeatureSet fs;
  fs.node_counts = counts;
  fs.temporal_scales = K;
  for (auto n : counts)
    for (std::int64_t k = 0; k < K; ++k) fs.blocks.push_back(testing::randn({n, F}));
  return fs;
}

}  // namespace

TEST_SUITE("fusion") {

TEST_CASE("K=1 and J=1 reduce to the single block") {
  const auto fs = feature_set({4, 2}, 1, 3);
  const auto w = torch::softmax(torch::randn({2, 1}, torch::kFloat64), 1);
  CHECK(torch::equal(w, torch::ones({2, 1}, torch::kFloat64)));
  const auto S = torch::softmax(testing::randn({4, 2}), 1);
  CHECK(testing::max_abs(fuse_scales(fs, w, {S}) - (fs.blocks[0] + S.matmul(fs.blocks[1]))) < 1e-15);

  const auto single = feature_set({5}, 1, 3);
  CHECK(torch::equal(fuse_scales(single, torch::ones({1, 1}, torch::kFloat64), {}), single.blocks[0]));

  const auto multi = feature_set({5}, 3, 3);
  const auto w3 = torch::softmax(testing::randn({1, 3}), 1);
  const auto expected = w3[0][0] * multi.blocks[0] + w3[0][1] * multi.blocks[1] + w3[0][2] * multi.blocks[2];
  CHECK(torch::equal(fuse_scales(multi, w3, {}), expected));
}

TEST_CASE("J=2 hard assignment lifts the group row to both base nodes") {
  stpm::ScaleFeatureSet fs;
  fs.node_counts = {2, 1};
  fs.temporal_scales = 1;
  const auto O1 = torch::tensor({{1.0, -1.0}, {0.5, 3.0}}, torch::kFloat64);
  fs.blocks = {O1, torch::tensor({{2.0, 2.0}}, torch::kFloat64)};
  const auto S = torch::tensor({{1.0}, {1.0}}, torch::kFloat64);
  const auto out = fuse_scales(fs, torch::ones({2, 1}, torch::kFloat64), {S});
  CHECK(torch::equal(out - O1, torch::tensor({{2.0, 2.0}, {2.0, 2.0}}, torch::kFloat64)));
}

TEST_CASE("three scales use the product of assignments") {
  const auto fs = feature_set({6, 3, 1}, 2, 4);
  const auto w = torch::softmax(testing::randn({3, 2}), 1);
  const auto S1 = torch::softmax(testing::randn({6, 3}), 1);
  const auto S2 = torch::softmax(testing::randn({3, 1}), 1);
  const auto O = [&](int j) { return w[j][0] * fs.blocks[2 * j] + w[j][1] * fs.blocks[2 * j + 1]; };
  const auto expected = O(0) + S1.matmul(O(1)) + S1.matmul(S2).matmul(O(2));
  CHECK(testing::max_abs(fuse_scales(fs, w, {S1, S2}) - expected) < 1e-12);
}

TEST_CASE("missing block is an error") {
  auto fs = feature_set({4, 2}, 2, 3);
  fs.blocks[3] = torch::Tensor();
  CHECK_THROWS_AS(fuse_scales(fs, torch::full({2, 2}, 0.5, torch::kFloat64), {torch::full({4, 2}, 0.5, torch::kFloat64)}),
                  ShapeError);
}

TEST_CASE("short head: tau=1 shape and plain GRU decoder oracle with A = I") {
  torch::manual_seed(41);
  ShortTermHead head(6, 4);
  const auto fused = testing::randn({2, 3, 6});
  const auto last = testing::randn({2, 3});
  const auto eye = torch::eye(3, torch::kFloat64);
  CHECK(head->forward(fused, eye, last, 1).sizes() == std::vector<std::int64_t>{2, 3, 1});

  const auto out = head->forward(fused, eye, last, 5);
  const auto wi = oracle::from_tensor(head->init->weight);
  const auto bi = oracle::to_vector(head->init->bias);
  const auto wg = oracle::from_tensor(head->cell->gates->weight);
  const auto bg = oracle::to_vector(head->cell->gates->bias);
  const auto wc = oracle::from_tensor(head->cell->candidate->weight);
  const auto bc = oracle::to_vector(head->cell->candidate->bias);
  const auto wo = oracle::to_vector(head->out->weight);
  const double bo = head->out->bias.item<double>();
  for (int b = 0; b < 2; ++b)
    for (int n = 0; n < 3; ++n) {
      const auto x = oracle::to_vector(fused[b][n]);
      std::vector<double> h(4);
      for (int o = 0; o < 4; ++o) {
        double s = bi[o];
        for (int i = 0; i < 6; ++i) s += wi(o, i) * x[i];
        h[o] = std::tanh(s);
      }
      double input = last[b][n].item<double>();
      for (int t = 0; t < 5; ++t) {
        h = oracle::gru_step({input}, h, wg, bg, wc, bc);
        double y = bo;
        for (int o = 0; o < 4; ++o) y += wo[o] * h[o];
        CHECK(std::abs(out[b][n][t].item<double>() - y) < 1e-6);
        input = y;
      }
    }
}

TEST_CASE("long head: zero weights give the bias, shape N x tau") {
  LongTermHead head(5, 7, 11);
  {
    torch::NoGradGuard g;
    head->fc1->weight.zero_();
    head->fc1->bias.zero_();
    head->fc2->weight.zero_();
  }
  const auto out = head->forward(testing::randn({2, 4, 5}));
  CHECK(out.sizes() == std::vector<std::int64_t>{2, 4, 11});
  CHECK(torch::equal(out, head->fc2->bias.expand({2, 4, 11})));
  for (std::int64_t tau : {1, 96, 720}) {
    LongTermHead h(5, 7, tau);
    CHECK(h->forward(testing::randn({3, 5})).sizes() == std::vector<std::int64_t>{3, tau});
  }
}

TEST_CASE("head selection rule over the benchmark settings") {
  struct Setting {
    std::int64_t T, tau;
    bool short_head;
  };
  const std::vector<Setting> settings{{12, 12, true},  {96, 24, true},   {96, 96, true},  {96, 192, false},
                                      {96, 336, false}, {96, 720, false}};
  for (const auto& s : settings) {
    ModelConfig cfg;
    cfg.input_len = s.T;
    cfg.horizon = s.tau;
    CHECK(cfg.use_short_head() == s.short_head);
  }
  ModelConfig cfg;
  cfg.input_len = 12;
  cfg.horizon = 12;
  cfg.head = "long";
  CHECK_FALSE(cfg.use_short_head());
  cfg.horizon = 720;
  cfg.input_len = 96;
  cfg.head = "short";
  CHECK(cfg.use_short_head());
}

TEST_CASE("training loss examples") {
  const auto y = testing::randn({3, 4});
  CHECK(training_loss(y, y, torch::zeros({}, torch::kFloat64), 0.0).item<double>() == 0.0);

  const auto pred = torch::tensor({{1.0, -2.0}}, torch::kFloat64);
  CHECK(training_loss(pred, torch::zeros({1, 2}, torch::kFloat64), torch::ones({}, torch::kFloat64), 0.0).item<double>() == 3.0);
  CHECK(training_loss(pred, torch::zeros({1, 2}, torch::kFloat64), torch::full({}, 2.0, torch::kFloat64), 0.1)
            .item<double>() == doctest::Approx(3.2).epsilon(1e-15));

  CHECK_THROWS_AS(training_loss(pred, pred, torch::zeros({}, torch::kFloat64), 1.5), ConfigError);
  CHECK_THROWS_AS(training_loss(pred, pred, torch::zeros({}, torch::kFloat64), -0.1), ConfigError);

  const auto batched = testing::randn({4, 3, 5});
  const auto target = testing::randn({4, 3, 5});
  const double per_sample = (batched - target).abs().sum().item<double>() / 4.0;
  CHECK(fusion::l1_loss(batched, target).item<double>() == doctest::Approx(per_sample).epsilon(1e-14));
  CHECK(fusion::l1_loss(batched, target, Reduction::kMean).item<double>() ==
        doctest::Approx((batched - target).abs().mean().item<double>()).epsilon(1e-14));
}

TEST_CASE("L1 scales exactly with the error") {
  const auto y = testing::randn({3, 4});
  const auto err = testing::randn({3, 4});
  const double base = fusion::l1_loss(y + err, y).item<double>();
  for (double c : {2.0, 4.0, 0.5}) {
    CHECK(fusion::l1_loss(y + c * err, y).item<double>() == doctest::Approx(c * base).epsilon(1e-14));
  }
  const auto zero = torch::zeros({3, 4}, torch::kFloat64);
  const auto e2 = torch::randint(-8, 8, {3, 4}, torch::kFloat64);
  CHECK(fusion::l1_loss(4.0 * e2, zero).item<double>() == 4.0 * fusion::l1_loss(e2, zero).item<double>());
}

TEST_CASE("full model: shapes and ablation variants") {
  torch::manual_seed(51);
  auto cfg = testing::tiny_config();
  StHyper model(cfg, 6);
  const auto x = testing::randn({2, 6, 16});
  const auto res = model->forward_full(x);
  CHECK(res.prediction.sizes() == std::vector<std::int64_t>{2, 6, 4});
  CHECK(res.hyper.sizes() == std::vector<std::int64_t>{2, cfg.alpha(6), cfg.feature_dim()});
  CHECK(res.fused.sizes() == std::vector<std::int64_t>{2, 6, cfg.feature_dim()});
  CHECK(model->forward(x[0]).sizes() == std::vector<std::int64_t>{1, 6, 4});
  CHECK(testing::max_abs(model->fusion_weights().sum(1) - 1.0) < 1e-12);

  try {
    model->forward(testing::randn({2, 5, 16}));
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("6 x 16") != std::string::npos);
    CHECK(std::string(e.what()).find("5 x 16") != std::string::npos);
  }

  auto no_ahm = cfg;
  no_ahm.disable_ahm = true;
  StHyper ablated(no_ahm, 6);
  CHECK(ablated->hypergraphs.empty());
  for (const auto& p : ablated->named_parameters()) CHECK(p.key().find("hypergraph") == std::string::npos);
  const auto pa = ablated->forward(x);
  CHECK(pa.sizes() == std::vector<std::int64_t>{2, 6, 4});
  CHECK(torch::isfinite(pa).all().item<bool>());

  auto no_gp = cfg;
  no_gp.disable_gp_loss = true;
  CHECK(no_gp.effective_gp_weight() == 0.0);

  auto plain = cfg;
  plain.plain_graph_learning = true;
  StHyper p(plain, 6);
  bool has_embed = false, has_w = false;
  for (const auto& item : p->named_parameters()) {
    if (item.key().find("pyramid.embed1_") != std::string::npos) has_embed = true;
    if (item.key().find("pyramid.w_e1_") != std::string::npos) has_w = true;
  }
  CHECK(has_embed);
  CHECK_FALSE(has_w);
  CHECK(torch::isfinite(p->forward(x)).all().item<bool>());

  auto long_cfg = cfg;
  long_cfg.head = "long";
  StHyper lm(long_cfg, 6);
  CHECK(lm->forward(x).sizes() == std::vector<std::int64_t>{2, 6, 4});
}

}  // TEST_SUITE
