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
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mtfgat {

/// Dense row-major float64 tensor. Every op in this engine works on rank-2
/// tensors; vectors are N x 1 and scalars 1 x 1.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  bool requires_grad = false;

  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
      : shape{rows, cols}, data(rows * cols, fill) {}
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
  std::size_t size() const { return data.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

using Index = std::uint32_t;

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid as long as
/// the tape is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  /// Gradient after Tape::backward; empty if none reached this value.
  std::span<const double> grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records primitive ops in execution order and replays them in exactly
/// reverse order to accumulate gradients. One tape belongs to one thread.
class Tape {
 public:
  using Backprop = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// A leaf that receives a gradient.
  Var parameter(Tensor value);
  /// A leaf without gradient.
  Var constant(Tensor value);

  /// Throws ShapeError unless loss is 1 x 1 and was recorded on this tape.
  void backward(Var loss);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  std::span<const double> grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].value.requires_grad; }
  std::string_view op_name(std::size_t id) const { return nodes_[id].op; }
  std::size_t size() const { return nodes_.size(); }

  /// Node ids whose backprop ran during the last backward(), in call order.
  const std::vector<std::size_t>& last_backward_order() const { return backward_order_; }

  /// Appends an op result. Throws NumericError if `value` holds NaN or Inf.
  /// The result requires a gradient iff any input does.
  Var record(std::string_view op, Tensor value, std::initializer_list<Var> inputs,
             Backprop backprop);

  /// Gradient buffer of a node, zero-initialized on first use.
  std::vector<double>& grad_buffer(std::size_t id);

 private:
  struct Node {
    Tensor value;
    std::vector<double> grad;
    std::string op;
    Backprop backprop;
  };
  std::vector<Node> nodes_;
  std::vector<std::size_t> backward_order_;
};

// Differentiable primitives. Shapes are checked; mismatches throw ShapeError.

/// [m x k] . [k x n] -> [m x n]
Var matmul(Var a, Var b);
Var add(Var a, Var b);
/// Elementwise product.
Var mul(Var a, Var b);
/// x [n x c] plus a broadcast row [1 x c].
Var add_row(Var x, Var row);
Var scale(Var x, double factor);
/// factor * x + offset
Var affine(Var x, double factor, double offset);
Var relu(Var x);
Var leaky_relu(Var x, double slope);
Var sigmoid(Var x);
/// log(max(x, floor)); the gradient is zero where the floor is active.
Var clamped_log(Var x, double floor);
/// Sum of all entries -> 1 x 1.
Var sum(Var x);

/// out[e, :] = x[rows[e], :]
Var gather_rows(Var x, std::span<const Index> rows);
/// out[rows[e], :] += x[e, :], accumulated in edge order.
Var scatter_add_rows(Var x, std::span<const Index> rows, std::size_t n_rows);

/// Softmax of every column of logits [E x H] within groups of rows sharing
/// a segment id. Each group's max is subtracted first, so large logits are
/// safe. Empty input gives empty output.
Var segment_softmax(Var logits, std::span<const Index> segments, std::size_t n_segments);

/// Per-head dot products. z is [N x H*D], attn is [H x D]; out[i, h] is the
/// dot of head block h of row i with attn row h.
Var head_dot(Var z, Var attn);

/// Attention-weighted message passing. z is [N x H*D], alpha is [E x H];
/// out[dst[e], block h] += alpha[e, h] * z[src[e], block h]. Sparse edge
/// lists accumulate sequentially in edge order; when the edges cover at
/// least a quarter of all node pairs, each head is evaluated as a dense
/// attention-matrix product instead. Both paths are deterministic.
Var edge_weighted_sum(Var z, Var alpha, std::span<const Index> src, std::span<const Index> dst,
                      std::size_t n_out);

/// Mean over H equal-width column blocks: [N x H*D] -> [N x D].
Var head_mean(Var x, std::size_t heads);

}  // namespace mtfgat
