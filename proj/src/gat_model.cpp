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

#include "mtfgat/gat_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mtfgat/error.hpp"
#include "mtfgat/random.hpp"
#include "mtfgat/text.hpp"

namespace mtfgat {

std::string_view to_string(HeadMode mode) {
  return mode == HeadMode::Concat ? "concat" : "average";
}

HeadMode parse_head_mode(std::string_view name) {
  if (name == "concat") return HeadMode::Concat;
  if (name == "average") return HeadMode::Average;
  throw ConfigError("unknown head mode '" + std::string(name) + "'");
}

ModelConfig ModelConfig::standard() {
  ModelConfig cfg;
  cfg.layers = {
      {1, 32, 4, HeadMode::Concat, 0.2},
      {128, 32, 4, HeadMode::Concat, 0.2},
      {128, 32, 6, HeadMode::Average, 0.2},
  };
  return cfg;
}

void ModelConfig::validate() const {
  if (layers.empty()) throw ConfigError("model needs at least one layer");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    if (l.in_dim == 0 || l.out_dim_per_head == 0 || l.n_heads == 0) {
      throw ConfigError("layer " + std::to_string(k + 1) + " has a zero dimension");
    }
    if (k > 0 && l.in_dim != layers[k - 1].output_width()) {
      throw ConfigError("layer " + std::to_string(k + 1) + " in_dim does not match layer " +
                        std::to_string(k) + " output width");
    }
  }
}

namespace {

std::string layer_name(const char* prefix, std::size_t layer, const char* what) {
  return std::string(prefix) + std::to_string(layer + 1) + "." + what;
}

Tensor glorot(std::size_t rows, std::size_t cols, std::size_t fan_in, std::size_t fan_out,
              Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(rows, cols);
  for (auto& v : t.data) v = rng.uniform_real(-limit, limit);
  return t;
}

}  // namespace

GatModel GatModel::initialize(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  GatModel model;
  model.config = config;
  model.seed = seed;
  Rng rng(seed);
  auto add = [&model](std::string name, Tensor t) {
    model.parameters.push_back({std::move(name), std::move(t)});
  };
  for (std::size_t k = 0; k < config.layers.size(); ++k) {
    const auto& l = config.layers[k];
    const std::size_t hd = l.n_heads * l.out_dim_per_head;
    const std::size_t width = l.output_width();
    add(layer_name("gat", k, "weight"), glorot(l.in_dim, hd, l.in_dim, hd, rng));
    add(layer_name("gat", k, "att_src"),
        glorot(l.n_heads, l.out_dim_per_head, l.out_dim_per_head, 1, rng));
    add(layer_name("gat", k, "att_dst"),
        glorot(l.n_heads, l.out_dim_per_head, l.out_dim_per_head, 1, rng));
    add(layer_name("gat", k, "bias"), Tensor(1, width));
    add(layer_name("skip", k, "weight"), glorot(l.in_dim, width, l.in_dim, width, rng));
    add(layer_name("skip", k, "bias"), Tensor(1, width));
  }
  const std::size_t last = config.layers.back().output_width();
  add("head.weight", glorot(last, 1, last, 1, rng));
  add("head.bias", Tensor(1, 1));
  return model;
}

const Tensor& GatModel::parameter(std::string_view name) const {
  for (const auto& p : parameters) {
    if (p.name == name) return p.tensor;
  }
  throw Error("no parameter named '" + std::string(name) + "'");
}

Tensor& GatModel::parameter(std::string_view name) {
  return const_cast<Tensor&>(std::as_const(*this).parameter(name));
}

void GatModel::set_all(double value) {
  for (auto& p : parameters) std::fill(p.tensor.data.begin(), p.tensor.data.end(), value);
}

std::size_t count_parameters(const GatModel& model) {
  std::size_t total = 0;
  for (const auto& p : model.parameters) total += p.tensor.size();
  return total;
}

AttentionGraph AttentionGraph::from(const TsGraph& graph) {
  const std::size_t n = graph.n_nodes();
  if (graph.edges.size() != graph.edge_weights.size()) {
    throw ShapeError("graph has mismatched edge and weight counts");
  }
  struct Item {
    Index src;
    Index dst;
    double weight;
  };
  std::vector<Item> items;
  items.reserve(graph.edges.size() + n);
  std::vector<bool> has_self(n, false);
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    const auto [s, d] = graph.edges[e];
    if (s >= n || d >= n) throw ShapeError("edge index out of range");
    if (!(graph.edge_weights[e] > 0.0)) throw ShapeError("edge weights must be positive");
    if (s == d) has_self[s] = true;
    items.push_back({s, d, graph.edge_weights[e]});
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!has_self[i]) items.push_back({static_cast<Index>(i), static_cast<Index>(i), 1.0});
  }
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    return a.dst != b.dst ? a.dst < b.dst : a.src < b.src;
  });

  AttentionGraph g;
  g.n_nodes = n;
  g.src.reserve(items.size());
  g.dst.reserve(items.size());
  g.log_weights.reserve(items.size());
  for (const auto& it : items) {
    g.src.push_back(it.src);
    g.dst.push_back(it.dst);
    g.log_weights.push_back(std::log(it.weight));
  }
  g.features = Tensor(n, 1, graph.node_features);
  return g;
}

CompressedGraph CompressedGraph::from(const AttentionGraph& graph) {
  const std::size_t n = graph.n_nodes;
  const std::size_t width = graph.features.cols();
  std::vector<Index> colour(n, 0);
  std::size_t n_colours = 0;
  {
    std::map<std::vector<double>, Index> seen;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> row(graph.features.data.begin() + static_cast<std::ptrdiff_t>(i * width),
                              graph.features.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * width));
      auto [it, inserted] = seen.emplace(std::move(row), static_cast<Index>(seen.size()));
      colour[i] = it->second;
    }
    n_colours = seen.size();
  }

  // Edges are grouped by destination, so each node's incoming edges form
  // one contiguous run.
  std::vector<std::size_t> begin(n + 1, 0);
  for (auto d : graph.dst) ++begin[d + 1];
  for (std::size_t i = 0; i < n; ++i) begin[i + 1] += begin[i];

  using Incoming = std::vector<std::pair<Index, double>>;
  auto incoming = [&](std::size_t node) {
    Incoming in;
    in.reserve(begin[node + 1] - begin[node]);
    for (std::size_t e = begin[node]; e < begin[node + 1]; ++e) {
      in.emplace_back(colour[graph.src[e]], graph.log_weights[e]);
    }
    std::sort(in.begin(), in.end());
    return in;
  };

  while (true) {
    std::map<std::pair<Index, Incoming>, Index> seen;
    std::vector<Index> next(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto [it, inserted] =
          seen.emplace(std::make_pair(colour[i], incoming(i)), static_cast<Index>(seen.size()));
      next[i] = it->second;
    }
    colour = std::move(next);
    if (seen.size() == n_colours) break;
    n_colours = seen.size();
  }

  CompressedGraph out;
  out.node_group = colour;
  auto& q = out.graph;
  q.n_nodes = n_colours;
  q.features = Tensor(n_colours, width);
  std::vector<bool> placed(n_colours, false);
  for (std::size_t i = 0; i < n; ++i) {
    const Index c = colour[i];
    if (placed[c]) continue;
    placed[c] = true;
    std::copy_n(&graph.features.data[i * width], width, &q.features.data[c * width]);
    // Parallel (source group, weight) edges collapse into one edge whose
    // bias gains ln(multiplicity).
    const auto in = incoming(i);
    for (std::size_t k = 0; k < in.size();) {
      std::size_t run = k;
      while (run < in.size() && in[run] == in[k]) ++run;
      q.src.push_back(in[k].first);
      q.dst.push_back(c);
      q.log_weights.push_back(in[k].second + std::log(static_cast<double>(run - k)));
      k = run;
    }
  }
  // Restore the (dst, src) ordering used everywhere else.
  std::vector<std::size_t> order(q.src.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&q](std::size_t a, std::size_t b) {
    if (q.dst[a] != q.dst[b]) return q.dst[a] < q.dst[b];
    if (q.src[a] != q.src[b]) return q.src[a] < q.src[b];
    return q.log_weights[a] < q.log_weights[b];
  });
  AttentionGraph sorted;
  sorted.n_nodes = q.n_nodes;
  sorted.features = std::move(q.features);
  for (auto e : order) {
    sorted.src.push_back(q.src[e]);
    sorted.dst.push_back(q.dst[e]);
    sorted.log_weights.push_back(q.log_weights[e]);
  }
  out.graph = std::move(sorted);
  return out;
}

ParameterVars ParameterVars::bind(Tape& tape, const GatModel& model, bool trainable) {
  ParameterVars p;
  p.vars.reserve(model.parameters.size());
  for (std::size_t i = 0; i < model.parameters.size(); ++i) {
    const auto& t = model.parameters[i].tensor;
    p.vars.push_back(trainable ? tape.parameter(t) : tape.constant(t));
    p.index.emplace(model.parameters[i].name, i);
  }
  return p;
}

Var ParameterVars::operator[](std::string_view name) const {
  const auto it = index.find(name);
  if (it == index.end()) throw Error("no parameter named '" + std::string(name) + "'");
  return vars[it->second];
}

Var gat_attention(Var features, const AttentionGraph& graph, const GatLayerConfig& cfg,
                  Var weight, Var att_src, Var att_dst, Var* attention_out) {
  if (features.cols() != cfg.in_dim || features.rows() != graph.n_nodes) {
    throw ShapeError("gat layer: features are " + std::to_string(features.rows()) + " x " +
                     std::to_string(features.cols()) + ", expected " +
                     std::to_string(graph.n_nodes) + " x " + std::to_string(cfg.in_dim));
  }
  Tape& tape = *features.tape();
  const std::size_t heads = cfg.n_heads;
  const std::size_t e_count = graph.n_edges();

  const Var z = matmul(features, weight);
  const Var score_src = head_dot(z, att_src);
  const Var score_dst = head_dot(z, att_dst);
  Var logits = add(gather_rows(score_src, graph.src), gather_rows(score_dst, graph.dst));
  logits = leaky_relu(logits, cfg.leaky_slope);

  Tensor bias(e_count, heads);
  for (std::size_t e = 0; e < e_count; ++e) {
    std::fill_n(&bias.data[e * heads], heads, graph.log_weights[e]);
  }
  logits = add(logits, tape.constant(std::move(bias)));

  const Var alpha = segment_softmax(logits, graph.dst, graph.n_nodes);
  if (attention_out != nullptr) *attention_out = alpha;
  Var out = edge_weighted_sum(z, alpha, graph.src, graph.dst, graph.n_nodes);
  if (cfg.head_mode == HeadMode::Average) out = head_mean(out, heads);
  return out;
}

Var gat_layer_forward(Var features, const AttentionGraph& graph, const GatLayerConfig& cfg,
                      const ParameterVars& params, std::size_t layer) {
  const Var out = gat_attention(features, graph, cfg, params[layer_name("gat", layer, "weight")],
                                params[layer_name("gat", layer, "att_src")],
                                params[layer_name("gat", layer, "att_dst")]);
  return add_row(out, params[layer_name("gat", layer, "bias")]);
}

Var model_forward(const AttentionGraph& graph, const GatModel& model,
                  const ParameterVars& params) {
  if (params.vars.empty()) throw Error("model_forward: no parameters bound");
  Tape& tape = *params.vars.front().tape();
  Var h = tape.constant(graph.features);
  for (std::size_t k = 0; k < model.config.layers.size(); ++k) {
    const Var attended = gat_layer_forward(h, graph, model.config.layers[k], params, k);
    const Var skip = add_row(matmul(h, params[layer_name("skip", k, "weight")]),
                             params[layer_name("skip", k, "bias")]);
    h = relu(add(attended, skip));
  }
  const Var logits = add_row(matmul(h, params["head.weight"]), params["head.bias"]);
  return sigmoid(logits);
}

Var model_forward(const CompressedGraph& graph, const GatModel& model,
                  const ParameterVars& params) {
  return gather_rows(model_forward(graph.graph, model, params), graph.node_group);
}

std::vector<double> predict_proba(const CompressedGraph& graph, const GatModel& model) {
  Tape tape;
  const auto params = ParameterVars::bind(tape, model, false);
  return model_forward(graph, model, params).value().data;
}

std::vector<double> predict_proba(const AttentionGraph& graph, const GatModel& model) {
  return predict_proba(CompressedGraph::from(graph), model);
}

std::vector<std::uint8_t> threshold_labels(std::span<const double> probabilities,
                                           double threshold) {
  std::vector<std::uint8_t> labels(probabilities.size());
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    labels[i] = probabilities[i] >= threshold ? 1 : 0;
  }
  return labels;
}

std::vector<std::uint8_t> predict(const CompressedGraph& graph, const GatModel& model,
                                  double threshold) {
  return threshold_labels(predict_proba(graph, model), threshold);
}

std::vector<std::uint8_t> predict(const AttentionGraph& graph, const GatModel& model,
                                  double threshold) {
  return threshold_labels(predict_proba(graph, model), threshold);
}

void save_checkpoint(const std::string& stem, const GatModel& model, const CheckpointMeta& meta) {
  std::ofstream manifest(stem + ".ckpt", std::ios::binary);
  if (!manifest) throw Error("cannot write " + stem + ".ckpt");
  manifest << "mtfgat-checkpoint 1\n";
  manifest << "seed " << model.seed << '\n';
  for (const auto& l : model.config.layers) {
    manifest << "layer in=" << l.in_dim << " out_per_head=" << l.out_dim_per_head
             << " heads=" << l.n_heads << " mode=" << to_string(l.head_mode)
             << " slope=" << format_double(l.leaky_slope) << '\n';
  }
  for (const auto& [key, value] : meta) manifest << "meta " << key << ' ' << value << '\n';
  for (const auto& p : model.parameters) {
    manifest << "tensor " << p.name << ' ' << p.tensor.rows() << ' ' << p.tensor.cols() << '\n';
  }

  std::ofstream raw(stem + ".bin", std::ios::binary);
  if (!raw) throw Error("cannot write " + stem + ".bin");
  for (const auto& p : model.parameters) {
    for (double v : p.tensor.data) {
      auto bits = std::bit_cast<std::uint64_t>(v);
      char bytes[8];
      for (int b = 0; b < 8; ++b) {
        bytes[b] = static_cast<char>(bits & 0xff);
        bits >>= 8;
      }
      raw.write(bytes, 8);
    }
  }
}

LoadedCheckpoint load_checkpoint(const std::string& stem) {
  std::ifstream manifest(stem + ".ckpt");
  if (!manifest) throw Error("cannot open " + stem + ".ckpt");
  LoadedCheckpoint out;
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(manifest, line) || line != "mtfgat-checkpoint 1") {
    throw ParseError(1, "not a checkpoint manifest");
  }
  std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> shapes;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::istringstream words(line);
    std::string tag;
    words >> tag;
    if (tag == "seed") {
      words >> out.model.seed;
    } else if (tag == "layer") {
      GatLayerConfig l;
      std::string field;
      while (words >> field) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) throw ParseError(line_no, "bad layer field");
        const std::string key = field.substr(0, eq);
        const std::string value = field.substr(eq + 1);
        std::uint64_t n = 0;
        if (key == "mode") {
          l.head_mode = parse_head_mode(value);
        } else if (key == "slope") {
          if (!parse_double(value, l.leaky_slope)) throw ParseError(line_no, "bad slope");
        } else if (parse_uint(value, n)) {
          if (key == "in") l.in_dim = n;
          else if (key == "out_per_head") l.out_dim_per_head = n;
          else if (key == "heads") l.n_heads = n;
          else throw ParseError(line_no, "unknown layer field " + key);
        } else {
          throw ParseError(line_no, "bad layer field " + key);
        }
      }
      out.model.config.layers.push_back(l);
    } else if (tag == "meta") {
      std::string key;
      words >> key;
      std::string value;
      std::getline(words, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      out.meta[key] = value;
    } else if (tag == "tensor") {
      std::string name;
      std::size_t rows = 0;
      std::size_t cols = 0;
      if (!(words >> name >> rows >> cols)) throw ParseError(line_no, "bad tensor line");
      shapes.push_back({name, {rows, cols}});
    } else {
      throw ParseError(line_no, "unknown manifest entry '" + tag + "'");
    }
  }
  out.model.config.validate();

  std::ifstream raw(stem + ".bin", std::ios::binary);
  if (!raw) throw Error("cannot open " + stem + ".bin");
  for (const auto& [name, shape] : shapes) {
    Tensor t(shape.first, shape.second);
    for (auto& v : t.data) {
      unsigned char bytes[8];
      if (!raw.read(reinterpret_cast<char*>(bytes), 8)) {
        throw Error(stem + ".bin is shorter than its manifest declares");
      }
      std::uint64_t bits = 0;
      for (int b = 7; b >= 0; --b) bits = (bits << 8) | bytes[b];
      v = std::bit_cast<double>(bits);
    }
    out.model.parameters.push_back({name, std::move(t)});
  }
  if (raw.peek() != std::char_traits<char>::eof()) {
    throw Error(stem + ".bin is longer than its manifest declares");
  }
  const auto expected = GatModel::initialize(out.model.config, 0);
  if (expected.parameters.size() != out.model.parameters.size()) {
    throw Error("checkpoint tensors do not match its layer config");
  }
  for (std::size_t i = 0; i < expected.parameters.size(); ++i) {
    if (expected.parameters[i].name != out.model.parameters[i].name ||
        expected.parameters[i].tensor.shape != out.model.parameters[i].tensor.shape) {
      throw Error("checkpoint tensor " + out.model.parameters[i].name +
                  " does not match its layer config");
    }
  }
  return out;
}

}  // namespace mtfgat
