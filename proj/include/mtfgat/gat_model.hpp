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
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mtfgat/mtf_graph.hpp"
#include "mtfgat/tensor.hpp"

namespace mtfgat {

enum class HeadMode { Concat, Average };

std::string_view to_string(HeadMode mode);
HeadMode parse_head_mode(std::string_view name);

struct GatLayerConfig {
  std::size_t in_dim = 1;
  std::size_t out_dim_per_head = 32;
  std::size_t n_heads = 4;
  HeadMode head_mode = HeadMode::Concat;
  double leaky_slope = 0.2;

  std::size_t output_width() const {
    return head_mode == HeadMode::Concat ? out_dim_per_head * n_heads : out_dim_per_head;
  }
  friend bool operator==(const GatLayerConfig&, const GatLayerConfig&) = default;
};

/// Stack of attention blocks. Each block computes
///   h' = ReLU(GAT(h) + Linear(h))
/// and a final linear head maps the last block to one logit per node.
struct ModelConfig {
  std::vector<GatLayerConfig> layers;

  /// Three blocks of 32 filters with 4, 4 and 6 heads. The first two
  /// concatenate (width 128), the last averages (width 32).
  static ModelConfig standard();
  /// Throws ConfigError if a layer's in_dim does not match its predecessor
  /// or any size is zero.
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

struct GatModel {
  ModelConfig config;
  std::uint64_t seed = 0;
  std::vector<NamedTensor> parameters;  // declaration order

  /// Glorot-uniform weights and attention vectors, zero biases.
  static GatModel initialize(const ModelConfig& config, std::uint64_t seed);

  const Tensor& parameter(std::string_view name) const;
  Tensor& parameter(std::string_view name);
  void set_all(double value);
  friend bool operator==(const GatModel&, const GatModel&) = default;
};

/// Exact sum of the element counts of all parameter tensors.
std::size_t count_parameters(const GatModel& model);

/// A TsGraph prepared for attention: a self-loop of weight 1 is added to
/// every node that lacks one, edges are ordered by (dst, src) and weights
/// are stored as logarithms.
struct AttentionGraph {
  std::size_t n_nodes = 0;
  std::vector<Index> src;
  std::vector<Index> dst;
  std::vector<double> log_weights;
  Tensor features;  // n_nodes x 1

  static AttentionGraph from(const TsGraph& graph);
  std::size_t n_edges() const { return src.size(); }
};

/// Exact reduction of an AttentionGraph for inference and training.
///
/// Nodes are grouped by colour refinement until every node of a group has
/// the same features and the same multiset of (source group, edge weight)
/// over its incoming edges. Attention layers cannot tell such nodes apart,
/// so one representative per group is enough; parallel edges that collapse
/// onto the same (source group, weight) pair are merged by adding ln(count)
/// to their logit bias, which leaves every softmax unchanged. MTF graphs of
/// integer-valued RSSI traces shrink by one to two orders of magnitude.
struct CompressedGraph {
  AttentionGraph graph;            // one node per group
  std::vector<Index> node_group;   // original node -> group

  static CompressedGraph from(const AttentionGraph& graph);
  std::size_t n_original_nodes() const { return node_group.size(); }
};

/// Tape handles of one parameter set, same order as GatModel::parameters.
struct ParameterVars {
  std::vector<Var> vars;
  std::map<std::string, std::size_t, std::less<>> index;

  static ParameterVars bind(Tape& tape, const GatModel& model, bool trainable);
  Var operator[](std::string_view name) const;
};

/// One attention layer on its own, without bias, skip or activation.
/// Adds one logit per edge of ln(edge weight), so the softmax over a node's
/// incoming edges is still normalized. Exposed for tests.
Var gat_attention(Var features, const AttentionGraph& graph, const GatLayerConfig& cfg,
                  Var weight, Var att_src, Var att_dst, Var* attention_out = nullptr);

/// Full attention layer: gat_attention followed by the layer bias.
Var gat_layer_forward(Var features, const AttentionGraph& graph, const GatLayerConfig& cfg,
                      const ParameterVars& params, std::size_t layer);

/// Per-node anomaly probabilities, n_nodes x 1, recorded on `params`' tape.
Var model_forward(const AttentionGraph& graph, const GatModel& model, const ParameterVars& params);

/// model_forward on the compressed graph, expanded back to one
/// probability per original node (n_original_nodes x 1).
Var model_forward(const CompressedGraph& graph, const GatModel& model,
                  const ParameterVars& params);

/// Inference without gradients. Both overloads run on the compressed graph.
std::vector<double> predict_proba(const CompressedGraph& graph, const GatModel& model);
std::vector<double> predict_proba(const AttentionGraph& graph, const GatModel& model);
std::vector<std::uint8_t> predict(const CompressedGraph& graph, const GatModel& model,
                                  double threshold = 0.5);
std::vector<std::uint8_t> predict(const AttentionGraph& graph, const GatModel& model,
                                  double threshold = 0.5);
std::vector<std::uint8_t> threshold_labels(std::span<const double> probabilities,
                                           double threshold);

/// Free-form key/value metadata stored with a checkpoint.
using CheckpointMeta = std::map<std::string, std::string>;

/// Writes `<stem>.ckpt` (text manifest: config, seed, metadata, tensor names
/// and shapes in order) and `<stem>.bin` (the tensors' float64 values
/// back to back, little-endian).
void save_checkpoint(const std::string& stem, const GatModel& model, const CheckpointMeta& meta);

struct LoadedCheckpoint {
  GatModel model;
  CheckpointMeta meta;
};
LoadedCheckpoint load_checkpoint(const std::string& stem);

}  // namespace mtfgat
