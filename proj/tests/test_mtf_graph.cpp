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

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "mtf_oracle.hpp"
#include "mtfgat/error.hpp"
#include "mtfgat/mtf_graph.hpp"
#include "mtfgat/random.hpp"
#include "mtfgat/trace.hpp"

using namespace mtfgat;

namespace {

std::vector<std::size_t> bins_of(const std::vector<double>& s, std::size_t q) {
  return fit_quantizer(s, q).assign(s);
}

void check_row_stochastic(const DenseMatrix& w) {
  for (std::size_t i = 0; i < w.rows; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < w.cols; ++j) {
      CHECK(w(i, j) >= 0.0);
      CHECK(w(i, j) <= 1.0);
      total += w(i, j);
    }
    CHECK(std::abs(total - 1.0) <= 1e-9);
  }
}

std::vector<double> random_series(Rng& rng, std::size_t n, int lo, int hi) {
  std::vector<double> s(n);
  for (auto& x : s) x = static_cast<double>(rng.uniform_int(lo, hi));
  return s;
}

}  // namespace

TEST_SUITE("mtf_graph") {
  TEST_CASE("quantizer: constant series has a single bin") {
    for (std::size_t q : {1u, 2u, 5u, 10u}) {
      const std::vector<double> s(10, 3.0);
      const auto quant = fit_quantizer(s, q);
      CHECK(quant.effective_bins() == 1);
      for (auto b : quant.assign(s)) CHECK(b == 0);
    }
  }

  TEST_CASE("quantizer: [1,2,3,4] with two bins splits at 2.5") {
    const std::vector<double> s{1, 2, 3, 4};
    const auto quant = fit_quantizer(s, 2);
    REQUIRE(quant.edges.size() == 1);
    CHECK(quant.edges[0] == 2.5);
    CHECK(quant.assign(s) == std::vector<std::size_t>{0, 0, 1, 1});
  }

  TEST_CASE("quantizer: Q = N on an increasing series gives one bin per point") {
    for (std::size_t n : {2u, 3u, 7u, 30u, 100u}) {
      std::vector<double> s(n);
      for (std::size_t i = 0; i < n; ++i) s[i] = 0.5 * static_cast<double>(i) - 3.0;
      const auto bins = bins_of(s, n);
      for (std::size_t i = 0; i < n; ++i) CHECK(bins[i] == i);
    }
  }

  TEST_CASE("quantizer: ties collapse bins and edges stay strictly increasing") {
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
      const auto s = random_series(rng, 40, 0, 4);
      const auto quant = fit_quantizer(s, 40);
      CHECK(quant.effective_bins() <= 5);
      for (std::size_t i = 1; i < quant.edges.size(); ++i) {
        CHECK(quant.edges[i - 1] < quant.edges[i]);
      }
    }
    CHECK_THROWS_AS(fit_quantizer(std::vector<double>{1.0}, 0), ConfigError);
    CHECK_THROWS_AS(fit_quantizer(std::vector<double>{}, 2), ShapeError);
  }

  TEST_CASE("transition matrix worked cases") {
    const auto w = transition_matrix(std::vector<std::size_t>{0, 0, 1, 1}, 2);
    CHECK(w(0, 0) == 0.5);
    CHECK(w(0, 1) == 0.5);
    CHECK(w(1, 0) == 0.0);
    CHECK(w(1, 1) == 1.0);

    const auto single = transition_matrix(std::vector<std::size_t>{0, 0, 0}, 1);
    CHECK(single(0, 0) == 1.0);

    const auto alt = transition_matrix(std::vector<std::size_t>{0, 1, 0, 1, 0}, 2);
    CHECK(alt(0, 0) == 0.0);
    CHECK(alt(0, 1) == 1.0);
    CHECK(alt(1, 0) == 1.0);
    CHECK(alt(1, 1) == 0.0);
  }

  TEST_CASE("transition matrix: a bin seen only at the end gets a self-transition") {
    const auto w = transition_matrix(std::vector<std::size_t>{0, 0, 1}, 2);
    CHECK(w(1, 1) == 1.0);
    CHECK(w(1, 0) == 0.0);
    CHECK_THROWS_AS(transition_matrix(std::vector<std::size_t>{0, 3}, 2), ShapeError);
  }

  TEST_CASE("transition matrix rows are stochastic") {
    Rng rng(12);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t q = 1 + rng.uniform_int(0, 6);
      std::vector<std::size_t> bins(2 + rng.uniform_int(0, 40));
      for (auto& b : bins) b = rng.uniform_int(0, q - 1);
      check_row_stochastic(transition_matrix(bins, q));
    }
  }

  TEST_CASE("mtf of [1,1,2,2] with two bins") {
    const auto f = mtf(std::vector<double>{1, 1, 2, 2}, 2);
    const double expected[4][4] = {
        {.5, .5, .5, .5}, {.5, .5, .5, .5}, {0, 0, 1, 1}, {0, 0, 1, 1}};
    for (std::size_t a = 0; a < 4; ++a) {
      for (std::size_t b = 0; b < 4; ++b) {
        CHECK(f.field(a, b) == expected[a][b]);
        CHECK(f.at(a, b) == expected[a][b]);
      }
    }
  }

  TEST_CASE("mtf of a constant series is all ones") {
    const auto f = mtf(std::vector<double>(6, 9.0), 6);
    for (double v : f.field.data) CHECK(v == 1.0);
    CHECK_THROWS_AS(mtf(std::vector<double>{1.0}, 2), ShapeError);
  }

  TEST_CASE("build_graph: 12 directed edges for [1,1,2,2]") {
    const std::vector<double> s{1, 1, 2, 2};
    const auto g = build_graph(mtf(s, 2), s);
    CHECK(g.n_nodes() == 4);
    REQUIRE(g.edges.size() == 12);
    std::size_t from_bin0 = 0;
    for (const auto& e : g.edges) from_bin0 += e.src < 2;
    CHECK(from_bin0 == 8);
    CHECK(g.edges.size() == g.edge_weights.size());
  }

  TEST_CASE("build_graph: constant series of length 5 is complete with self-loops") {
    const std::vector<double> s(5, 1.0);
    const auto g = build_graph(mtf(s, 5), s);
    CHECK(g.edges.size() == 25);
    for (double w : g.edge_weights) CHECK(w == 1.0);
  }

  TEST_CASE("build_graph: edge weights are exactly the positive field entries") {
    Rng rng(21);
    for (int trial = 0; trial < 30; ++trial) {
      const auto s = random_series(rng, 3 + rng.uniform_int(0, 30), 0, 10);
      const auto f = mtf(s, s.size());
      const auto g = build_graph(f, s);
      std::multiset<double> positive, weights(g.edge_weights.begin(), g.edge_weights.end());
      for (double v : f.field.data) {
        if (v > 0) positive.insert(v);
      }
      CHECK(positive == weights);
      std::set<std::pair<std::uint32_t, std::uint32_t>> pairs;
      for (const auto& e : g.edges) {
        CHECK(e.src < s.size());
        CHECK(e.dst < s.size());
        pairs.insert({e.src, e.dst});
      }
      CHECK(pairs.size() == g.edges.size());
    }
  }

  TEST_CASE("transform: N nodes, deterministic, equal to the nested-loop oracle") {
    Rng rng(99);
    const TraceSchema schema;
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 2 + rng.uniform_int(0, 48);
      RssiTrace t{"x", random_series(rng, n, 20, 80)};
      const auto g = transform(t, schema);
      CHECK(g.n_nodes() == n);
      CHECK(transform(t, schema) == g);
      const auto ref = oracle::mtf(normalize(t, schema), n);
      REQUIRE(ref.graph.size() == g.edges.size());
      for (std::size_t e = 0; e < g.edges.size(); ++e) {
        CHECK(g.edges[e].src == ref.graph[e].src);
        CHECK(g.edges[e].dst == ref.graph[e].dst);
        CHECK(std::abs(g.edge_weights[e] - ref.graph[e].weight) <= 1e-12);
      }
    }
  }

  TEST_CASE("transform: positive affine rescaling leaves the structure unchanged") {
    Rng rng(4);
    for (int trial = 0; trial < 30; ++trial) {
      const auto s = random_series(rng, 3 + rng.uniform_int(0, 40), 0, 9);
      std::vector<double> scaled(s.size());
      for (std::size_t i = 0; i < s.size(); ++i) scaled[i] = 3.0 * s[i] + 7.0;
      for (std::size_t q : {std::size_t{2}, std::size_t{4}, s.size()}) {
        const auto a = mtf(s, q);
        const auto b = mtf(scaled, q);
        CHECK(a.bins == b.bins);
        CHECK(a.transitions == b.transitions);
        CHECK(a.field == b.field);
        CHECK(build_graph(a, s).edges == build_graph(b, scaled).edges);
      }
    }
  }

  TEST_CASE("transform is stateless across processing order") {
    Rng rng(6);
    std::vector<RssiTrace> traces;
    for (int i = 0; i < 10; ++i) traces.push_back({"t", random_series(rng, 25, 30, 60)});
    std::vector<TsGraph> forward, backward(traces.size());
    for (const auto& t : traces) forward.push_back(transform(t, TraceSchema{}));
    for (std::size_t i = traces.size(); i-- > 0;) backward[i] = transform(traces[i], TraceSchema{});
    CHECK(forward == backward);
  }

  TEST_CASE("long series use the streaming edge path") {
    Rng rng(1);
    const auto s = random_series(rng, kDenseFieldLimit + 10, 0, 3);
    const auto f = mtf(s, 4);
    CHECK(f.field.rows == 0);
    const auto g = build_graph(f, s);
    std::size_t positive = 0;
    for (std::size_t a = 0; a < s.size(); ++a) {
      for (std::size_t b = 0; b < s.size(); ++b) positive += f.at(a, b) > 0;
    }
    CHECK(g.edges.size() == positive);
  }

  TEST_CASE("graph text round trip preserves printed precision") {
    Rng rng(2);
    std::vector<TsGraph> graphs;
    for (int i = 0; i < 5; ++i) {
      graphs.push_back(transform(RssiTrace{"g" + std::to_string(i), random_series(rng, 30, 20, 70)},
                                 TraceSchema{}));
    }
    std::ostringstream out;
    write_graphs(out, graphs);
    std::istringstream in(out.str());
    const auto back = read_graphs(in);
    REQUIRE(back.size() == graphs.size());
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      CHECK(back[i].link_id == graphs[i].link_id);
      CHECK(back[i].node_features == graphs[i].node_features);
      CHECK(back[i].edges == graphs[i].edges);
      for (std::size_t e = 0; e < graphs[i].edges.size(); ++e) {
        CHECK(std::abs(back[i].edge_weights[e] - graphs[i].edge_weights[e]) <=
              5e-9 * graphs[i].edge_weights[e]);
      }
    }
    std::ostringstream again;
    write_graphs(again, back);
    CHECK(again.str() == out.str());
    std::istringstream bad("graph x 2 1\n0.1 0.2\n0 5 1\n");
    CHECK_THROWS_AS(read_graphs(bad), ParseError);
  }
}
