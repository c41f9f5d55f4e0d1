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

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mtfgat/trace.hpp"

namespace mtfgat {

/// Quantile bin boundaries of one series. Boundaries sit at the empirical
/// k/Q quantiles (linear interpolation between order statistics); equal
/// boundaries are merged and boundaries that would leave a bin empty are
/// dropped, so heavily tied series get fewer bins than asked and every bin
/// holds at least one point.
struct Quantizer {
  std::vector<double> edges;  // strictly increasing
  std::size_t requested_bins = 1;

  std::size_t effective_bins() const { return edges.size() + 1; }
  /// Number of boundaries strictly below `value`.
  std::size_t bin(double value) const;
  std::vector<std::size_t> assign(std::span<const double> series) const;
};

Quantizer fit_quantizer(std::span<const double> series, std::size_t n_bins);

/// Row-major dense matrix of doubles.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;
};

/// Row-normalized counts of consecutive (bin_t, bin_t+1) pairs. A bin with
/// no outgoing transition (it only occurs at the last step) gets a
/// self-transition of 1 so every row stays stochastic.
DenseMatrix transition_matrix(std::span<const std::size_t> bins, std::size_t n_bins);

/// Series above this length skip the dense N x N field; edges are then
/// read straight from the transition matrix.
inline constexpr std::size_t kDenseFieldLimit = 1024;

/// Markov transition field of a series: field(a, b) = W[bin(a)][bin(b)].
struct TransitionField {
  Quantizer quantizer;
  std::vector<std::size_t> bins;
  DenseMatrix transitions;  // Q_eff x Q_eff
  DenseMatrix field;        // N x N, empty when N > kDenseFieldLimit

  std::size_t length() const { return bins.size(); }
  double at(std::size_t a, std::size_t b) const {
    return transitions(bins[a], bins[b]);
  }
};

/// Throws ShapeError for series shorter than 2 and ConfigError for n_bins == 0.
TransitionField mtf(std::span<const double> series, std::size_t n_bins);

struct GraphEdge {
  std::uint32_t src = 0;
  std::uint32_t dst = 0;
  friend bool operator==(const GraphEdge&, const GraphEdge&) = default;
};

/// Directed weighted graph with one node per sample.
struct TsGraph {
  std::string link_id;
  std::vector<double> node_features;
  std::vector<GraphEdge> edges;
  std::vector<double> edge_weights;

  std::size_t n_nodes() const { return node_features.size(); }
  friend bool operator==(const TsGraph&, const TsGraph&) = default;
};

/// An edge a -> b for every positive field entry, in row-major order,
/// self-loops included.
TsGraph build_graph(const TransitionField& field, std::span<const double> features);

/// normalize -> fit_quantizer -> transition_matrix -> mtf -> build_graph.
/// n_bins defaults to the trace length.
TsGraph transform(const RssiTrace& trace, const TraceSchema& schema,
                  std::optional<std::size_t> n_bins = std::nullopt);

/// Block text format, one block per graph:
///
///   graph <link_id> <n_nodes> <n_edges>
///   <feature_0> ... <feature_{N-1}>
///   <src> <dst> <weight>          (n_edges lines)
///
/// Features use the shortest round-trip form; weights 9 significant digits.
void write_graphs(std::ostream& out, std::span<const TsGraph> graphs);
std::vector<TsGraph> read_graphs(std::istream& in);

}  // namespace mtfgat
