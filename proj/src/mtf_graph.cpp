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

#include "mtfgat/mtf_graph.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string_view>

#include "mtfgat/error.hpp"
#include "mtfgat/text.hpp"

namespace mtfgat {

std::size_t Quantizer::bin(double value) const {
  return static_cast<std::size_t>(std::lower_bound(edges.begin(), edges.end(), value) -
                                  edges.begin());
}

std::vector<std::size_t> Quantizer::assign(std::span<const double> series) const {
  std::vector<std::size_t> bins(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) bins[i] = bin(series[i]);
  return bins;
}

Quantizer fit_quantizer(std::span<const double> series, std::size_t n_bins) {
  if (n_bins < 1) throw ConfigError("n_bins must be >= 1");
  if (series.empty()) throw ShapeError("cannot quantize an empty series");

  std::vector<double> sorted(series.begin(), series.end());
  std::sort(sorted.begin(), sorted.end());
  const double last = static_cast<double>(sorted.size() - 1);

  Quantizer q;
  q.requested_bins = n_bins;
  q.edges.reserve(n_bins - 1);
  for (std::size_t k = 1; k < n_bins; ++k) {
    const double pos = last * static_cast<double>(k) / static_cast<double>(n_bins);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    const double edge =
        sorted[lo] == sorted[hi] ? sorted[lo] : sorted[lo] + frac * (sorted[hi] - sorted[lo]);
    if (q.edges.empty() || edge > q.edges.back()) q.edges.push_back(edge);
  }
  // Drop boundaries that would leave a bin without points.
  std::vector<double> kept;
  auto it = sorted.begin();
  for (double edge : q.edges) {
    const auto next = std::upper_bound(it, sorted.end(), edge);
    if (next != it) kept.push_back(edge);
    it = next;
  }
  if (!kept.empty() && kept.back() >= sorted.back()) kept.pop_back();
  q.edges = std::move(kept);
  return q;
}

DenseMatrix transition_matrix(std::span<const std::size_t> bins, std::size_t n_bins) {
  DenseMatrix w(n_bins, n_bins);
  for (std::size_t t = 0; t + 1 < bins.size(); ++t) {
    if (bins[t] >= n_bins || bins[t + 1] >= n_bins) {
      throw ShapeError("bin index out of range");
    }
    w(bins[t], bins[t + 1]) += 1.0;
  }
  for (std::size_t i = 0; i < n_bins; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < n_bins; ++j) total += w(i, j);
    if (total == 0.0) {
      w(i, i) = 1.0;
      continue;
    }
    for (std::size_t j = 0; j < n_bins; ++j) w(i, j) /= total;
  }
  return w;
}

TransitionField mtf(std::span<const double> series, std::size_t n_bins) {
  if (series.size() < 2) throw ShapeError("mtf needs a series of length >= 2");
  TransitionField f;
  f.quantizer = fit_quantizer(series, n_bins);
  f.bins = f.quantizer.assign(series);
  f.transitions = transition_matrix(f.bins, f.quantizer.effective_bins());
  const std::size_t n = series.size();
  if (n <= kDenseFieldLimit) {
    f.field = DenseMatrix(n, n);
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) f.field(a, b) = f.at(a, b);
    }
  }
  return f;
}

TsGraph build_graph(const TransitionField& field, std::span<const double> features) {
  const std::size_t n = field.length();
  if (features.size() != n) throw ShapeError("feature count does not match field size");
  const bool dense = field.field.rows == n;
  TsGraph g;
  g.node_features.assign(features.begin(), features.end());
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      const double w = dense ? field.field(a, b) : field.at(a, b);
      if (w > 0.0) {
        g.edges.push_back({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)});
        g.edge_weights.push_back(w);
      }
    }
  }
  return g;
}

TsGraph transform(const RssiTrace& trace, const TraceSchema& schema,
                  std::optional<std::size_t> n_bins) {
  validate_trace(trace, schema);
  const auto features = normalize(trace, schema);
  const auto field = mtf(features, n_bins.value_or(trace.length()));
  auto graph = build_graph(field, features);
  graph.link_id = trace.link_id;
  return graph;
}

void write_graphs(std::ostream& out, std::span<const TsGraph> graphs) {
  for (const auto& g : graphs) {
    out << "graph " << g.link_id << ' ' << g.n_nodes() << ' ' << g.edges.size() << '\n';
    for (std::size_t i = 0; i < g.n_nodes(); ++i) {
      if (i) out << ' ';
      out << format_double(g.node_features[i]);
    }
    out << '\n';
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
      out << g.edges[e].src << ' ' << g.edges[e].dst << ' '
          << format_double(g.edge_weights[e], 9) << '\n';
    }
  }
}

namespace {

std::vector<std::string_view> words_of(std::string_view line) {
  std::vector<std::string_view> words;
  for (auto w : split(trim(line), ' ')) {
    if (!w.empty()) words.push_back(w);
  }
  return words;
}

}  // namespace

std::vector<TsGraph> read_graphs(std::istream& in) {
  std::vector<TsGraph> graphs;
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!trim(line).empty()) return true;
    }
    return false;
  };

  while (next_line()) {
    const auto header = words_of(line);
    std::uint64_t n_nodes = 0;
    std::uint64_t n_edges = 0;
    if (header.size() != 4 || header[0] != "graph" || !parse_uint(header[2], n_nodes) ||
        !parse_uint(header[3], n_edges)) {
      throw ParseError(line_no, "expected 'graph <link_id> <n_nodes> <n_edges>'");
    }
    TsGraph g;
    g.link_id = std::string(header[1]);
    if (!next_line()) throw ParseError(line_no, "missing feature line");
    for (auto w : words_of(line)) {
      double v = 0.0;
      if (!parse_double(w, v)) throw ParseError(line_no, "bad feature value");
      g.node_features.push_back(v);
    }
    if (g.node_features.size() != n_nodes) throw ParseError(line_no, "feature count mismatch");
    g.edges.reserve(n_edges);
    g.edge_weights.reserve(n_edges);
    for (std::uint64_t e = 0; e < n_edges; ++e) {
      if (!next_line()) throw ParseError(line_no, "missing edge lines");
      const auto f = words_of(line);
      std::uint64_t src = 0;
      std::uint64_t dst = 0;
      double w = 0.0;
      if (f.size() != 3 || !parse_uint(f[0], src) || !parse_uint(f[1], dst) ||
          !parse_double(f[2], w) || src >= n_nodes || dst >= n_nodes || !(w > 0.0)) {
        throw ParseError(line_no, "expected '<src> <dst> <weight>'");
      }
      g.edges.push_back({static_cast<std::uint32_t>(src), static_cast<std::uint32_t>(dst)});
      g.edge_weights.push_back(w);
    }
    graphs.push_back(std::move(g));
  }
  return graphs;
}

}  // namespace mtfgat
