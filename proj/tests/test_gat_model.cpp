/*
 * Copyright 2026 The mtfgat Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "op_checks.hpp"
#include "mtfgat/error.hpp"
#include "mtfgat/gat_model.hpp"
#include "mtfgat/mtf_graph.hpp"
#include "mtfgat/train.hpp"

using namespace mtfgat;
using namespace mtfgat::testing;

namespace {

TsGraph series_graph(Rng& rng, std::size_t n, int lo, int hi) {
  RssiTrace t{"s", {}};
  for (std::size_t i = 0; i < n; ++i) t.samples.push_back(static_cast<double>(rng.uniform_int(lo, hi)));
  return transform(t, TraceSchema{});
}

/// Dense attention layer computed straight from the adjacency matrix.
std::vector<std::vector<double>> dense_layer(const TsGraph& g, const std::vector<std::vector<double>>& x,
                                             const GatLayerConfig& cfg, const Tensor& w,
                                             const Tensor& a_src, const Tensor& a_dst) {
  const std::size_t n = g.n_nodes(), heads = cfg.n_heads, d = cfg.out_dim_per_head;
  std::vector<std::vector<double>> adj(n, std::vector<double>(n, 0.0));
  for (std::size_t e = 0; e < g.edges.size(); ++e) adj[g.edges[e].src][g.edges[e].dst] = g.edge_weights[e];
  for (std::size_t i = 0; i < n; ++i) {
    if (adj[i][i] == 0.0) adj[i][i] = 1.0;
  }
  std::vector<std::vector<double>> z(n, std::vector<double>(heads * d, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < heads * d; ++c) {
      for (std::size_t k = 0; k < cfg.in_dim; ++k) z[i][c] += x[i][k] * w(k, c);
    }
  }
  std::vector<std::vector<double>> out(n, std::vector<double>(cfg.output_width(), 0.0));
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> logit(n, -INFINITY);
      double top = -INFINITY;
      for (std::size_t a = 0; a < n; ++a) {
        if (adj[a][i] == 0.0) continue;
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
          s += a_src(h, k) * z[a][h * d + k] + a_dst(h, k) * z[i][h * d + k];
        }
        logit[a] = (s > 0 ? s : cfg.leaky_slope * s) + std::log(adj[a][i]);
        top = std::max(top, logit[a]);
      }
      double total = 0.0;
      for (std::size_t a = 0; a < n; ++a) {
        if (adj[a][i] != 0.0) total += std::exp(logit[a] - top);
      }
      for (std::size_t a = 0; a < n; ++a) {
        if (adj[a][i] == 0.0) continue;
        const double alpha = std::exp(logit[a] - top) / total;
        for (std::size_t k = 0; k < d; ++k) {
          const double v = alpha * z[a][h * d + k];
          if (cfg.head_mode == HeadMode::Concat) out[i][h * d + k] += v;
          else out[i][k] += v / static_cast<double>(heads);
        }
      }
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("gat_model") {
  TEST_CASE("standard config: widths and parameter count") {
    const auto cfg = ModelConfig::standard();
    REQUIRE(cfg.layers.size() == 3);
    CHECK(cfg.layers[0].n_heads == 4);
    CHECK(cfg.layers[1].n_heads == 4);
    CHECK(cfg.layers[2].n_heads == 6);
    CHECK(cfg.layers[0].output_width() == 128);
    CHECK(cfg.layers[1].output_width() == 128);
    CHECK(cfg.layers[2].output_width() == 32);
    for (const auto& l : cfg.layers) CHECK(l.out_dim_per_head == 32);
    const auto model = GatModel::initialize(cfg, 1);
    const auto count = count_parameters(model);
    CHECK(count == 63201);
    CHECK(count >= 20000);
    CHECK(count <= 70000);
  }

  TEST_CASE("count_parameters sums tensor sizes") {
    GatModel m;
    m.parameters.push_back({"w", Tensor(2, 3)});
    m.parameters.push_back({"b", Tensor(1, 3)});
    CHECK(count_parameters(m) == 9);
  }

  TEST_CASE("doubling layer-3 heads adds exactly six heads of weights") {
    auto cfg = ModelConfig::standard();
    const auto base = count_parameters(GatModel::initialize(cfg, 1));
    cfg.layers[2].n_heads = 12;
    const auto doubled = count_parameters(GatModel::initialize(cfg, 1));
    // Per head: a 128 x 32 projection plus two attention vectors of 32.
    CHECK(doubled - base == 6 * (128 * 32 + 2 * 32));
  }

  TEST_CASE("config validation and names") {
    auto cfg = ModelConfig::standard();
    cfg.layers[1].in_dim = 64;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK(parse_head_mode(to_string(HeadMode::Average)) == HeadMode::Average);
    CHECK(parse_head_mode(to_string(HeadMode::Concat)) == HeadMode::Concat);
    const auto model = GatModel::initialize(ModelConfig::standard(), 3);
    CHECK(model.parameter("gat3.att_src").rows() == 6);
    CHECK(model.parameter("head.weight").rows() == 32);
    CHECK_THROWS_AS(model.parameter("nope"), Error);
    CHECK(GatModel::initialize(ModelConfig::standard(), 3) == model);
    CHECK_FALSE(GatModel::initialize(ModelConfig::standard(), 4) == model);
  }

  TEST_CASE("AttentionGraph inserts missing self-loops and sorts by destination") {
    TsGraph g;
    g.node_features = {0.1, 0.2, 0.3};
    g.edges = {{0, 1}, {2, 2}, {1, 0}};
    g.edge_weights = {0.5, 0.25, 1.0};
    const auto ag = AttentionGraph::from(g);
    CHECK(ag.n_nodes == 3);
    CHECK(ag.n_edges() == 5);
    for (std::size_t e = 1; e < ag.n_edges(); ++e) {
      CHECK((ag.dst[e - 1] < ag.dst[e] || (ag.dst[e - 1] == ag.dst[e] && ag.src[e - 1] < ag.src[e])));
    }
    for (std::size_t e = 0; e < ag.n_edges(); ++e) {
      if (ag.src[e] == 2 && ag.dst[e] == 2) CHECK(ag.log_weights[e] == std::log(0.25));
      if (ag.src[e] == 0 && ag.dst[e] == 0) CHECK(ag.log_weights[e] == 0.0);
    }
    CHECK(ag.features.data == g.node_features);
  }

  TEST_CASE("single node with a self-loop: output is W x") {
    TsGraph g;
    g.node_features = {0.7};
    g.edges = {{0, 0}};
    g.edge_weights = {1.0};
    const auto ag = AttentionGraph::from(g);
    Rng rng(1);
    GatLayerConfig cfg{1, 4, 2, HeadMode::Concat, 0.2};
    Tape tape;
    const auto w = random_tensor(rng, 1, 8);
    Var alpha;
    const auto out = gat_attention(tape.constant(ag.features), ag, cfg, tape.constant(w),
                                   tape.constant(random_tensor(rng, 2, 4)),
                                   tape.constant(random_tensor(rng, 2, 4)), &alpha);
    for (double a : alpha.value().data) CHECK(a == 1.0);
    for (std::size_t c = 0; c < 8; ++c) CHECK(out.value().data[c] == doctest::Approx(0.7 * w.data[c]).epsilon(1e-15));
  }

  TEST_CASE("symmetric two-node graph gives identical outputs") {
    TsGraph g;
    g.node_features = {0.4, 0.4};
    g.edges = {{0, 1}, {1, 0}};
    g.edge_weights = {0.6, 0.6};
    const auto ag = AttentionGraph::from(g);
    const auto model = GatModel::initialize(ModelConfig::standard(), 5);
    const auto p = predict_proba(ag, model);
    CHECK(p[0] == p[1]);
  }

  TEST_CASE("attention layer matches the dense oracle") {
    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
      const auto g = random_graph(rng, 5, 0.4);
      const auto ag = AttentionGraph::from(g);
      const bool concat = trial % 2 == 0;
      GatLayerConfig cfg{3, 4, 3, concat ? HeadMode::Concat : HeadMode::Average, 0.2};
      const auto x = random_tensor(rng, 5, 3);
      const auto w = random_tensor(rng, 3, 12);
      const auto as = random_tensor(rng, 3, 4);
      const auto ad = random_tensor(rng, 3, 4);
      // Features of the AttentionGraph are the node features; pass x instead.
      Tape tape;
      Var alpha;
      const auto out = gat_attention(tape.constant(x), ag, cfg, tape.constant(w),
                                     tape.constant(as), tape.constant(ad), &alpha)
                           .value();
      std::vector<std::vector<double>> xr(5, std::vector<double>(3));
      for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t k = 0; k < 3; ++k) xr[i][k] = x(i, k);
      }
      const auto ref = dense_layer(g, xr, cfg, w, as, ad);
      for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t c = 0; c < cfg.output_width(); ++c) {
          CHECK(out(i, c) == doctest::Approx(ref[i][c]).epsilon(1e-12));
        }
      }
      for (std::size_t h = 0; h < 3; ++h) {
        std::vector<double> total(5, 0.0);
        for (std::size_t e = 0; e < ag.n_edges(); ++e) total[ag.dst[e]] += alpha.value()(e, h);
        for (double t : total) CHECK(std::abs(t - 1.0) <= 1e-9);
      }
    }
  }

  TEST_CASE("model outputs: length, range, zero parameters, determinism") {
    Rng rng(2);
    const auto g = AttentionGraph::from(series_graph(rng, 300, 40, 70));
    auto model = GatModel::initialize(ModelConfig::standard(), 9);
    const auto p = predict_proba(g, model);
    CHECK(p.size() == 300);
    for (double v : p) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
    CHECK(predict_proba(g, model) == p);
    const auto labels = predict(g, model);
    CHECK(labels.size() == 300);
    for (auto l : labels) CHECK(l <= 1);

    model.set_all(0.0);
    for (double v : predict_proba(g, model)) CHECK(v == 0.5);
  }

  TEST_CASE("threshold_labels") {
    CHECK(threshold_labels(std::vector<double>{0.2, 0.7}, 0.5) == std::vector<std::uint8_t>{0, 1});
    CHECK(threshold_labels(std::vector<double>{0.2, 0.7, 1e-9}, 0.0) ==
          std::vector<std::uint8_t>{1, 1, 1});
    CHECK(threshold_labels(std::vector<double>{0.5}, 0.5) == std::vector<std::uint8_t>{1});
  }

  TEST_CASE("node relabeling permutes the output") {
    Rng rng(31);
    const auto model = GatModel::initialize(ModelConfig::standard(), 2);
    for (int trial = 0; trial < 5; ++trial) {
      const auto g = random_graph(rng, 9, 0.35);
      std::vector<std::uint32_t> perm(9);
      std::iota(perm.begin(), perm.end(), 0u);
      rng.shuffle(std::span<std::uint32_t>(perm));
      TsGraph pg;
      pg.node_features.resize(9);
      for (std::size_t i = 0; i < 9; ++i) pg.node_features[perm[i]] = g.node_features[i];
      for (std::size_t e = 0; e < g.edges.size(); ++e) {
        pg.edges.push_back({perm[g.edges[e].src], perm[g.edges[e].dst]});
        pg.edge_weights.push_back(g.edge_weights[e]);
      }
      const auto p = predict_proba(AttentionGraph::from(g), model);
      const auto q = predict_proba(AttentionGraph::from(pg), model);
      for (std::size_t i = 0; i < 9; ++i) CHECK(q[perm[i]] == doctest::Approx(p[i]).epsilon(1e-12));
    }
  }

  TEST_CASE("compressed graphs give the same probabilities and gradients") {
    Rng rng(44);
    const auto model = GatModel::initialize(ModelConfig::standard(), 6);
    for (int trial = 0; trial < 12; ++trial) {
      const TsGraph g = trial % 2 == 0 ? series_graph(rng, 40, 50, 53)
                                       : random_graph(rng, 12, 0.5, /*integer_features=*/true);
      const auto ag = AttentionGraph::from(g);
      const auto cg = CompressedGraph::from(ag);
      CHECK(cg.n_original_nodes() == g.n_nodes());
      CHECK(cg.graph.n_nodes <= g.n_nodes());
      if (trial % 2 == 0) CHECK(cg.graph.n_edges() < ag.n_edges());

      std::vector<std::uint8_t> labels(g.n_nodes());
      for (auto& l : labels) l = static_cast<std::uint8_t>(rng.uniform_int(0, 1));
      const ClassWeights w{1.7, 0.6};
      auto loss_grads = [&](auto forward) {
        Tape tape;
        const auto params = ParameterVars::bind(tape, model, true);
        const auto probs = forward(params);
        tape.backward(weighted_bce(probs, labels, w));
        std::vector<std::vector<double>> grads;
        for (const auto& v : params.vars) grads.emplace_back(v.grad().begin(), v.grad().end());
        return std::make_pair(probs.value().data, grads);
      };
      const auto full = loss_grads([&](const ParameterVars& p) { return model_forward(ag, model, p); });
      const auto small = loss_grads([&](const ParameterVars& p) { return model_forward(cg, model, p); });
      REQUIRE(full.first.size() == small.first.size());
      for (std::size_t i = 0; i < full.first.size(); ++i) {
        CHECK(std::abs(full.first[i] - small.first[i]) <= 1e-12);
      }
      for (std::size_t k = 0; k < full.second.size(); ++k) {
        for (std::size_t i = 0; i < full.second[k].size(); ++i) {
          CHECK(std::abs(full.second[k][i] - small.second[k][i]) <=
                1e-9 * std::max(1.0, std::abs(full.second[k][i])));
        }
      }
    }
  }

  TEST_CASE("compression of a constant trace collapses to one node") {
    const auto g = transform(RssiTrace{"c", std::vector<double>(50, 60.0)}, TraceSchema{});
    const auto cg = CompressedGraph::from(AttentionGraph::from(g));
    CHECK(cg.graph.n_nodes == 1);
    REQUIRE(cg.graph.n_edges() == 1);
    CHECK(cg.graph.log_weights[0] == doctest::Approx(std::log(50.0)).epsilon(1e-15));
  }

  TEST_CASE("finite differences: full three-block model on small graphs") {
    Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
      const auto r = model_gradient_trial(rng, trial);
      INFO("trial " << trial << ", skipped " << r.skipped);
      CHECK(r.max_error < 1e-4);
      CHECK(r.coordinates >= r.skipped);
    }
  }

  TEST_CASE("checkpoint round trip reproduces the forward pass bit for bit") {
    const auto dir = std::filesystem::temp_directory_path() / "mtfgat_ckpt_test";
    std::filesystem::create_directories(dir);
    const std::string stem = (dir / "m").string();
    Rng rng(3);
    auto model = GatModel::initialize(ModelConfig::standard(), 12);
    model.parameter("head.bias").data[0] = 0.1 + 0.2;
    save_checkpoint(stem, model, {{"split", "3"}, {"note", "a b"}});
    const auto loaded = load_checkpoint(stem);
    CHECK(loaded.model == model);
    CHECK(loaded.meta.at("split") == "3");
    CHECK(loaded.meta.at("note") == "a b");
    const auto g = AttentionGraph::from(series_graph(rng, 60, 40, 45));
    CHECK(predict_proba(g, loaded.model) == predict_proba(g, model));

    std::filesystem::resize_file(stem + ".bin", 16);
    CHECK_THROWS_AS(load_checkpoint(stem), Error);
    CHECK_THROWS_AS(load_checkpoint((dir / "missing").string()), Error);
  }

  TEST_CASE("shape errors") {
    Rng rng(1);
    const auto g = AttentionGraph::from(random_graph(rng, 4, 0.5));
    GatLayerConfig cfg{2, 4, 2, HeadMode::Concat, 0.2};
    Tape tape;
    CHECK_THROWS_AS(gat_attention(tape.constant(Tensor(4, 1)), g, cfg, tape.constant(Tensor(2, 8)),
                                  tape.constant(Tensor(2, 4)), tape.constant(Tensor(2, 4))),
                    ShapeError);
  }
}
