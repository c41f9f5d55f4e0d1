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

#include "mtfgat/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include <Eigen/Core>

#include "mtfgat/error.hpp"

namespace mtfgat {

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : shape{rows, cols}, data(std::move(values)) {
  if (data.size() != rows * cols) throw ShapeError("tensor data does not match shape");
}

const Tensor& Var::value() const { return tape_->value(id_); }

std::span<const double> Var::grad() const { return tape_->grad(id_); }

namespace {

void require_finite(const Tensor& value, std::string_view op) {
  for (double v : value.data) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + " produced a non-finite value");
  }
}

}  // namespace

Var Tape::parameter(Tensor value) {
  require_finite(value, "parameter");
  value.requires_grad = true;
  nodes_.push_back(Node{std::move(value), {}, "parameter", {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  require_finite(value, "constant");
  value.requires_grad = false;
  nodes_.push_back(Node{std::move(value), {}, "constant", {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(std::string_view op, Tensor value, std::initializer_list<Var> inputs,
                 Backprop backprop) {
  bool needs_grad = false;
  for (const auto& in : inputs) {
    if (in.tape() != this) throw ShapeError(std::string(op) + ": input from another tape");
    needs_grad = needs_grad || requires_grad(in.id());
  }
  require_finite(value, op);
  value.requires_grad = needs_grad;
  nodes_.push_back(
      Node{std::move(value), {}, std::string(op), needs_grad ? std::move(backprop) : Backprop{}});
  return Var(this, nodes_.size() - 1);
}

std::vector<double>& Tape::grad_buffer(std::size_t id) {
  auto& node = nodes_[id];
  if (node.grad.empty()) node.grad.assign(node.value.size(), 0.0);
  return node.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw ShapeError("backward: loss from another tape");
  if (value(loss.id()).size() != 1) throw ShapeError("backward needs a scalar loss");
  for (auto& node : nodes_) node.grad.clear();
  backward_order_.clear();
  grad_buffer(loss.id())[0] = 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    auto& node = nodes_[id];
    if (node.grad.empty() || !node.backprop) continue;
    backward_order_.push_back(id);
    node.backprop(*this, id);
  }
}

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMajor>;
using Strided = Eigen::OuterStride<>;
using BlockMap = Eigen::Map<RowMajor, 0, Strided>;
using ConstBlockMap = Eigen::Map<const RowMajor, 0, Strided>;

void require(bool ok, const char* op, const char* what) {
  if (!ok) throw ShapeError(std::string(op) + ": " + what);
}

template <typename F, typename G>
Var unary(const char* op, Var x, F forward, G derivative) {
  const Tensor& xv = x.value();
  Tensor out(xv.rows(), xv.cols());
  for (std::size_t i = 0; i < xv.size(); ++i) out.data[i] = forward(xv.data[i]);
  const std::size_t xi = x.id();
  return x.tape()->record(op, std::move(out), {x}, [xi, derivative](Tape& t, std::size_t self) {
    const auto gy = t.grad(self);
    const auto& xv = t.value(xi).data;
    const auto& yv = t.value(self).data;
    auto& gx = t.grad_buffer(xi);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * derivative(xv[i], yv[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(av.cols() == bv.rows(), "matmul", "inner dimensions differ");
  const auto m = static_cast<Eigen::Index>(av.rows());
  const auto k = static_cast<Eigen::Index>(av.cols());
  const auto n = static_cast<Eigen::Index>(bv.cols());
  Tensor out(av.rows(), bv.cols());
  ConstMatrixMap A(av.data.data(), m, k);
  ConstMatrixMap B(bv.data.data(), k, n);
  MatrixMap(out.data.data(), m, n).noalias() = A * B;
  const std::size_t ai = a.id();
  const std::size_t bi = b.id();
  return a.tape()->record("matmul", std::move(out), {a, b},
                          [ai, bi, m, k, n](Tape& t, std::size_t self) {
    ConstMatrixMap dC(t.grad(self).data(), m, n);
    if (t.requires_grad(ai)) {
      ConstMatrixMap B(t.value(bi).data.data(), k, n);
      MatrixMap(t.grad_buffer(ai).data(), m, k).noalias() += dC * B.transpose();
    }
    if (t.requires_grad(bi)) {
      ConstMatrixMap A(t.value(ai).data.data(), m, k);
      MatrixMap(t.grad_buffer(bi).data(), k, n).noalias() += A.transpose() * dC;
    }
  });
}

Var add(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(av.shape == bv.shape, "add", "shapes differ");
  Tensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out.data[i] = av.data[i] + bv.data[i];
  const std::size_t ai = a.id();
  const std::size_t bi = b.id();
  return a.tape()->record("add", std::move(out), {a, b}, [ai, bi](Tape& t, std::size_t self) {
    const auto g = t.grad(self);
    for (auto id : {ai, bi}) {
      if (!t.requires_grad(id)) continue;
      auto& gx = t.grad_buffer(id);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
    }
  });
}

Var mul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(av.shape == bv.shape, "mul", "shapes differ");
  Tensor out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out.data[i] = av.data[i] * bv.data[i];
  const std::size_t ai = a.id();
  const std::size_t bi = b.id();
  return a.tape()->record("mul", std::move(out), {a, b}, [ai, bi](Tape& t, std::size_t self) {
    const auto g = t.grad(self);
    const auto& av = t.value(ai).data;
    const auto& bv = t.value(bi).data;
    if (t.requires_grad(ai)) {
      auto& ga = t.grad_buffer(ai);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(bi)) {
      auto& gb = t.grad_buffer(bi);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var add_row(Var x, Var row) {
  const Tensor& xv = x.value();
  const Tensor& rv = row.value();
  require(rv.rows() == 1 && rv.cols() == xv.cols(), "add_row", "row must be 1 x cols");
  const std::size_t n = xv.rows();
  const std::size_t c = xv.cols();
  Tensor out(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] = xv.data[i * c + j] + rv.data[j];
  }
  const std::size_t xi = x.id();
  const std::size_t ri = row.id();
  return x.tape()->record("add_row", std::move(out), {x, row},
                          [xi, ri, n, c](Tape& t, std::size_t self) {
    const auto g = t.grad(self);
    if (t.requires_grad(xi)) {
      auto& gx = t.grad_buffer(xi);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
    }
    if (t.requires_grad(ri)) {
      auto& gr = t.grad_buffer(ri);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < c; ++j) gr[j] += g[i * c + j];
      }
    }
  });
}

Var scale(Var x, double factor) { return affine(x, factor, 0.0); }

Var affine(Var x, double factor, double offset) {
  return unary(
      "affine", x, [factor, offset](double v) { return factor * v + offset; },
      [factor](double, double) { return factor; });
}

Var relu(Var x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(Var x, double slope) {
  return unary(
      "leaky_relu", x, [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

Var sigmoid(Var x) {
  return unary(
      "sigmoid", x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var clamped_log(Var x, double floor) {
  return unary(
      "clamped_log", x, [floor](double v) { return std::log(std::max(v, floor)); },
      [floor](double v, double) { return v > floor ? 1.0 / v : 0.0; });
}

Var sum(Var x) {
  const Tensor& xv = x.value();
  double total = 0.0;
  for (double v : xv.data) total += v;
  const std::size_t xi = x.id();
  return x.tape()->record("sum", Tensor(1, 1, total), {x}, [xi](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    auto& gx = t.grad_buffer(xi);
    for (auto& v : gx) v += g;
  });
}

Var gather_rows(Var x, std::span<const Index> rows) {
  const Tensor& xv = x.value();
  const std::size_t c = xv.cols();
  Tensor out(rows.size(), c);
  for (std::size_t e = 0; e < rows.size(); ++e) {
    require(rows[e] < xv.rows(), "gather_rows", "row index out of range");
    std::copy_n(&xv.data[rows[e] * c], c, &out.data[e * c]);
  }
  const std::size_t xi = x.id();
  std::vector<Index> idx(rows.begin(), rows.end());
  return x.tape()->record("gather_rows", std::move(out), {x},
                          [xi, c, idx = std::move(idx)](Tape& t, std::size_t self) {
    const auto g = t.grad(self);
    auto& gx = t.grad_buffer(xi);
    for (std::size_t e = 0; e < idx.size(); ++e) {
      for (std::size_t j = 0; j < c; ++j) gx[idx[e] * c + j] += g[e * c + j];
    }
  });
}

Var scatter_add_rows(Var x, std::span<const Index> rows, std::size_t n_rows) {
  const Tensor& xv = x.value();
  require(rows.size() == xv.rows(), "scatter_add_rows", "one target row per input row");
  const std::size_t c = xv.cols();
  Tensor out(n_rows, c);
  for (std::size_t e = 0; e < rows.size(); ++e) {
    require(rows[e] < n_rows, "scatter_add_rows", "row index out of range");
    for (std::size_t j = 0; j < c; ++j) out.data[rows[e] * c + j] += xv.data[e * c + j];
  }
  const std::size_t xi = x.id();
  std::vector<Index> idx(rows.begin(), rows.end());
  return x.tape()->record("scatter_add_rows", std::move(out), {x},
                          [xi, c, idx = std::move(idx)](Tape& t, std::size_t self) {
    const auto g = t.grad(self);
    auto& gx = t.grad_buffer(xi);
    for (std::size_t e = 0; e < idx.size(); ++e) {
      for (std::size_t j = 0; j < c; ++j) gx[e * c + j] += g[idx[e] * c + j];
    }
  });
}

Var segment_softmax(Var logits, std::span<const Index> segments, std::size_t n_segments) {
  const Tensor& lv = logits.value();
  require(segments.size() == lv.rows(), "segment_softmax", "one segment id per row");
  const std::size_t e_count = lv.rows();
  const std::size_t h = lv.cols();
  Tensor out(e_count, h);
  std::vector<double> peak(n_segments * h, -std::numeric_limits<double>::infinity());
  std::vector<double> total(n_segments * h, 0.0);
  for (std::size_t e = 0; e < e_count; ++e) {
    require(segments[e] < n_segments, "segment_softmax", "segment id out of range");
    for (std::size_t k = 0; k < h; ++k) {
      auto& m = peak[segments[e] * h + k];
      m = std::max(m, lv.data[e * h + k]);
    }
  }
  for (std::size_t e = 0; e < e_count; ++e) {
    for (std::size_t k = 0; k < h; ++k) {
      const std::size_t s = segments[e] * h + k;
      const double v = std::exp(lv.data[e * h + k] - peak[s]);
      out.data[e * h + k] = v;
      total[s] += v;
    }
  }
  for (std::size_t e = 0; e < e_count; ++e) {
    for (std::size_t k = 0; k < h; ++k) out.data[e * h + k] /= total[segments[e] * h + k];
  }
  const std::size_t li = logits.id();
  std::vector<Index> seg(segments.begin(), segments.end());
  return logits.tape()->record(
      "segment_softmax", std::move(out), {logits},
      [li, h, n_segments, seg = std::move(seg)](Tape& t, std::size_t self) {
        const auto g = t.grad(self);
        const auto& y = t.value(self).data;
        // dx = y * (dy - sum_segment(y * dy))
        std::vector<double> dot(n_segments * h, 0.0);
        for (std::size_t e = 0; e < seg.size(); ++e) {
          for (std::size_t k = 0; k < h; ++k) dot[seg[e] * h + k] += y[e * h + k] * g[e * h + k];
        }
        auto& gx = t.grad_buffer(li);
        for (std::size_t e = 0; e < seg.size(); ++e) {
          for (std::size_t k = 0; k < h; ++k) {
            gx[e * h + k] += y[e * h + k] * (g[e * h + k] - dot[seg[e] * h + k]);
          }
        }
      });
}

Var head_dot(Var z, Var attn) {
  const Tensor& zv = z.value();
  const Tensor& av = attn.value();
  const std::size_t h = av.rows();
  const std::size_t d = av.cols();
  require(zv.cols() == h * d, "head_dot", "z must have heads * dim columns");
  const std::size_t n = zv.rows();
  Tensor out(n, h);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < h; ++k) {
      double acc = 0.0;
      const double* zrow = &zv.data[i * h * d + k * d];
      const double* arow = &av.data[k * d];
      for (std::size_t j = 0; j < d; ++j) acc += zrow[j] * arow[j];
      out.data[i * h + k] = acc;
    }
  }
  const std::size_t zi = z.id();
  const std::size_t ai = attn.id();
  return z.tape()->record("head_dot", std::move(out), {z, attn},
                          [zi, ai, n, h, d](Tape& t, std::size_t self) {
    const auto g = t.grad(self);
    const auto& zv = t.value(zi).data;
    const auto& av = t.value(ai).data;
    if (t.requires_grad(zi)) {
      auto& gz = t.grad_buffer(zi);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < h; ++k) {
          const double s = g[i * h + k];
          for (std::size_t j = 0; j < d; ++j) gz[i * h * d + k * d + j] += s * av[k * d + j];
        }
      }
    }
    if (t.requires_grad(ai)) {
      auto& ga = t.grad_buffer(ai);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < h; ++k) {
          const double s = g[i * h + k];
          for (std::size_t j = 0; j < d; ++j) ga[k * d + j] += s * zv[i * h * d + k * d + j];
        }
      }
    }
  });
}

namespace {

// Dense per-head attention matrices pay off once the edge list covers a
// sizeable share of all node pairs; MTF graphs over tied RSSI values are
// close to complete.
bool use_dense_attention(std::size_t n_edges, std::size_t n_in, std::size_t n_out) {
  return n_in <= 2048 && n_out <= 2048 && 4 * n_edges >= n_in * n_out;
}

// attention(src, dst) = alpha[e, head], summed over duplicate edges.
RowMajor attention_matrix(const std::vector<double>& alpha, std::size_t heads, std::size_t head,
                          std::span<const Index> src, std::span<const Index> dst,
                          std::size_t n_in, std::size_t n_out) {
  RowMajor a = RowMajor::Zero(static_cast<Eigen::Index>(n_in), static_cast<Eigen::Index>(n_out));
  for (std::size_t e = 0; e < src.size(); ++e) a(src[e], dst[e]) += alpha[e * heads + head];
  return a;
}

}  // namespace

Var edge_weighted_sum(Var z, Var alpha, std::span<const Index> src, std::span<const Index> dst,
                      std::size_t n_out) {
  const Tensor& zv = z.value();
  const Tensor& al = alpha.value();
  const std::size_t e_count = al.rows();
  const std::size_t h = al.cols();
  require(src.size() == e_count && dst.size() == e_count, "edge_weighted_sum",
          "one src and dst per alpha row");
  require(h > 0 && zv.cols() % h == 0, "edge_weighted_sum", "z columns not divisible by heads");
  const std::size_t n_in = zv.rows();
  const std::size_t d = zv.cols() / h;
  const std::size_t w = h * d;
  for (std::size_t e = 0; e < e_count; ++e) {
    require(src[e] < n_in && dst[e] < n_out, "edge_weighted_sum", "index out of range");
  }
  const bool dense = use_dense_attention(e_count, n_in, n_out);
  const auto rows_in = static_cast<Eigen::Index>(n_in);
  const auto rows_out = static_cast<Eigen::Index>(n_out);
  const auto cols = static_cast<Eigen::Index>(d);
  const Strided stride(static_cast<Eigen::Index>(w));

  Tensor out(n_out, w);
  if (dense) {
    for (std::size_t k = 0; k < h; ++k) {
      const RowMajor a = attention_matrix(al.data, h, k, src, dst, n_in, n_out);
      ConstBlockMap zk(zv.data.data() + k * d, rows_in, cols, stride);
      BlockMap(out.data.data() + k * d, rows_out, cols, stride).noalias() = a.transpose() * zk;
    }
  } else {
    for (std::size_t e = 0; e < e_count; ++e) {
      const double* zrow = &zv.data[src[e] * w];
      double* orow = &out.data[dst[e] * w];
      for (std::size_t k = 0; k < h; ++k) {
        const double a = al.data[e * h + k];
        for (std::size_t j = 0; j < d; ++j) orow[k * d + j] += a * zrow[k * d + j];
      }
    }
  }

  const std::size_t zi = z.id();
  const std::size_t ai = alpha.id();
  std::vector<Index> s(src.begin(), src.end());
  std::vector<Index> t_(dst.begin(), dst.end());
  return z.tape()->record(
      "edge_weighted_sum", std::move(out), {z, alpha},
      [zi, ai, h, d, w, n_in, n_out, dense, s = std::move(s), dd = std::move(t_)](
          Tape& t, std::size_t self) {
        const auto g = t.grad(self);
        const auto& zv = t.value(zi).data;
        const auto& al = t.value(ai).data;
        const bool need_z = t.requires_grad(zi);
        const bool need_a = t.requires_grad(ai);
        std::vector<double>* gz = need_z ? &t.grad_buffer(zi) : nullptr;
        std::vector<double>* ga = need_a ? &t.grad_buffer(ai) : nullptr;
        if (dense) {
          const auto rows_in = static_cast<Eigen::Index>(n_in);
          const auto rows_out = static_cast<Eigen::Index>(n_out);
          const auto cols = static_cast<Eigen::Index>(d);
          const Strided stride(static_cast<Eigen::Index>(w));
          for (std::size_t k = 0; k < h; ++k) {
            ConstBlockMap gk(g.data() + k * d, rows_out, cols, stride);
            ConstBlockMap zk(zv.data() + k * d, rows_in, cols, stride);
            if (need_z) {
              const RowMajor a = attention_matrix(al, h, k, s, dd, n_in, n_out);
              BlockMap(gz->data() + k * d, rows_in, cols, stride).noalias() += a * gk;
            }
            if (need_a) {
              // d alpha[e] = <z[src], g[dst]>
              const RowMajor pair = zk * gk.transpose();
              for (std::size_t e = 0; e < s.size(); ++e) (*ga)[e * h + k] += pair(s[e], dd[e]);
            }
          }
          return;
        }
        for (std::size_t e = 0; e < s.size(); ++e) {
          const double* grow = &g[dd[e] * w];
          const double* zrow = &zv[s[e] * w];
          for (std::size_t k = 0; k < h; ++k) {
            if (need_a) {
              double acc = 0.0;
              for (std::size_t j = 0; j < d; ++j) acc += zrow[k * d + j] * grow[k * d + j];
              (*ga)[e * h + k] += acc;
            }
            if (need_z) {
              const double a = al[e * h + k];
              double* gzrow = &(*gz)[s[e] * w + k * d];
              for (std::size_t j = 0; j < d; ++j) gzrow[j] += a * grow[k * d + j];
            }
          }
        }
      });
}

Var head_mean(Var x, std::size_t heads) {
  const Tensor& xv = x.value();
  require(heads > 0 && xv.cols() % heads == 0, "head_mean", "columns not divisible by heads");
  const std::size_t n = xv.rows();
  const std::size_t d = xv.cols() / heads;
  const double inv = 1.0 / static_cast<double>(heads);
  Tensor out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < heads; ++k) {
      for (std::size_t j = 0; j < d; ++j) {
        out.data[i * d + j] += xv.data[i * heads * d + k * d + j];
      }
    }
    for (std::size_t j = 0; j < d; ++j) out.data[i * d + j] *= inv;
  }
  const std::size_t xi = x.id();
  return x.tape()->record("head_mean", std::move(out), {x},
                          [xi, n, d, heads, inv](Tape& t, std::size_t self) {
    const auto g = t.grad(self);
    auto& gx = t.grad_buffer(xi);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < heads; ++k) {
        for (std::size_t j = 0; j < d; ++j) gx[i * heads * d + k * d + j] += inv * g[i * d + j];
      }
    }
  });
}

}  // namespace mtfgat
