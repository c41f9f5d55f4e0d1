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
#pragma once

// Brute-force MTF reference used by the tests. Shares only the quantile
// convention with the library (linear interpolation between order
// statistics at position (N - 1) * k / Q, empty bins dropped); everything else is recomputed
// with nested loops.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace mtfgat::oracle {

struct Edge {
  std::size_t src;
  std::size_t dst;
  double weight;
};

struct MtfResult {
  std::vector<double> edges;
  std::vector<std::size_t> bins;
  std::vector<std::vector<double>> w;
  std::vector<std::vector<double>> m;
  std::vector<Edge> graph;  // row-major over m
};

inline MtfResult mtf(const std::vector<double>& series, std::size_t q) {
  MtfResult r;
  const std::size_t n = series.size();
  std::vector<double> sorted = series;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t k = 1; k < q; ++k) {
    const double pos = static_cast<double>(n - 1) * static_cast<double>(k) / static_cast<double>(q);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = lo + 1 < n ? lo + 1 : lo;
    const double edge = sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
    bool duplicate = false;
    for (double e : r.edges) duplicate = duplicate || e >= edge;
    if (!duplicate) r.edges.push_back(edge);
  }
  std::vector<double> kept;
  for (std::size_t k = 0; k < r.edges.size(); ++k) {
    const double lower = kept.empty() ? -INFINITY : kept.back();
    bool occupied = false;
    for (double s : series) occupied = occupied || (s > lower && s <= r.edges[k]);
    if (occupied) kept.push_back(r.edges[k]);
  }
  if (!kept.empty()) {
    bool above = false;
    for (double s : series) above = above || s > kept.back();
    if (!above) kept.pop_back();
  }
  r.edges = kept;
  for (double s : series) {
    std::size_t below = 0;
    for (double e : r.edges) below += e < s;
    r.bins.push_back(below);
  }
  const std::size_t qe = r.edges.size() + 1;
  r.w.assign(qe, std::vector<double>(qe, 0.0));
  for (std::size_t i = 0; i < qe; ++i) {
    std::size_t from = 0;
    for (std::size_t t = 0; t + 1 < n; ++t) from += r.bins[t] == i;
    for (std::size_t j = 0; j < qe; ++j) {
      std::size_t count = 0;
      for (std::size_t t = 0; t + 1 < n; ++t) count += r.bins[t] == i && r.bins[t + 1] == j;
      r.w[i][j] = from == 0 ? (i == j ? 1.0 : 0.0)
                            : static_cast<double>(count) / static_cast<double>(from);
    }
  }
  r.m.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      r.m[a][b] = r.w[r.bins[a]][r.bins[b]];
      if (r.m[a][b] > 0.0) r.graph.push_back({a, b, r.m[a][b]});
    }
  }
  return r;
}

}  // namespace mtfgat::oracle
