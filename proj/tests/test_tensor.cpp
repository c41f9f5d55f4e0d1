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
#include <numeric>

#include "op_checks.hpp"
#include "mtfgat/error.hpp"
#include "mtfgat/tensor.hpp"

using namespace mtfgat;
using namespace mtfgat::testing;

namespace {

constexpr int kTrials = 20;
constexpr double kTolerance = 1e-4;

void run_trials(const char* name, const std::function<GradCheck(Rng&, int)>& trial) {
  Rng rng(derive_seed(7, name));
  for (int t = 0; t < kTrials; ++t) {
    const auto r = trial(rng, t);
    INFO(name << " trial " << t);
    CHECK(r.coordinates > 0);
    CHECK(r.max_error < kTolerance);
  }
}

}  // namespace

TEST_SUITE("tensor") {
  TEST_CASE("matmul worked values") {
    Tape tape;
    auto a = tape.constant(Tensor(2, 2, {1, 2, 3, 4}));
    auto c = matmul(a, tape.constant(Tensor(2, 1, {1, 1})));
    CHECK(c.value().data == std::vector<double>{3, 7});
    auto eye = tape.constant(Tensor(2, 2, {1, 0, 0, 1}));
    const Tensor product = matmul(a, eye).value();
    CHECK(product == a.value());
    CHECK_THROWS_AS(matmul(a, tape.constant(Tensor(3, 1))), ShapeError);
  }

  TEST_CASE("matmul: gradient of sum(A.B) is ones.B^T") {
    Rng rng(1);
    Tape tape;
    auto a = tape.parameter(random_tensor(rng, 3, 4));
    const auto bt = random_tensor(rng, 4, 2);
    auto b = tape.constant(bt);
    tape.backward(sum(matmul(a, b)));
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t k = 0; k < 4; ++k) {
        CHECK(a.grad()[i * 4 + k] == doctest::Approx(bt(k, 0) + bt(k, 1)).epsilon(1e-14));
      }
    }
  }

  TEST_CASE("backward: analytic sums") {
    Tape tape;
    auto x = tape.parameter(Tensor(2, 1, {1, 2}));
    tape.backward(sum(x));
    CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) == std::vector<double>{1, 1});
    Tape t2;
    auto y = t2.parameter(Tensor(2, 1, {1, 2}));
    t2.backward(sum(mul(y, y)));
    CHECK(std::vector<double>(y.grad().begin(), y.grad().end()) == std::vector<double>{2, 4});
  }

  TEST_CASE("backward rejects non-scalar losses and foreign vars") {
    Tape tape;
    auto x = tape.parameter(Tensor(2, 1, {1, 2}));
    CHECK_THROWS_AS(tape.backward(x), ShapeError);
    Tape other;
    auto y = other.parameter(Tensor(1, 1, {1}));
    CHECK_THROWS_AS(tape.backward(y), ShapeError);
  }

  TEST_CASE("backward visits ops in exact reverse recording order") {
    Rng rng(2);
    Tape tape;
    auto x = tape.parameter(random_tensor(rng, 3, 3));
    auto y = relu(matmul(x, x));
    auto z = sigmoid(add(y, scale(x, 2.0)));
    auto loss = sum(mul(z, y));
    tape.backward(loss);
    const auto& order = tape.last_backward_order();
    REQUIRE(!order.empty());
    CHECK(std::is_sorted(order.rbegin(), order.rend()));
    CHECK(order.front() == loss.id());
  }

  TEST_CASE("non-finite results raise NumericError") {
    Tape tape;
    auto x = tape.parameter(Tensor(1, 1, {1e300}));
    CHECK_THROWS_AS(scale(x, 1e300), NumericError);
    CHECK_THROWS_AS(tape.constant(Tensor(1, 1, {std::nan("")})), NumericError);
  }

  TEST_CASE("requires_grad propagates only from parameters") {
    Tape tape;
    auto c = tape.constant(Tensor(1, 1, {2}));
    auto p = tape.parameter(Tensor(1, 1, {3}));
    CHECK_FALSE(scale(c, 2).value().requires_grad);
    CHECK(mul(c, p).value().requires_grad);
  }

  TEST_CASE("segment_softmax worked values") {
    Tape tape;
    auto one = segment_softmax(tape.constant(Tensor(1, 1, {4.2})), std::vector<Index>{0}, 1);
    CHECK(one.value().data[0] == 1.0);
    auto pair = segment_softmax(tape.constant(Tensor(2, 1, {0, 0})), std::vector<Index>{0, 0}, 1);
    CHECK(pair.value().data == std::vector<double>{0.5, 0.5});
    auto three =
        segment_softmax(tape.constant(Tensor(3, 1, {1, 2, 3})), std::vector<Index>{0, 0, 0}, 1);
    const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
    for (int i = 0; i < 3; ++i) {
      CHECK(three.value().data[i] == doctest::Approx(std::exp(i + 1.0) / z).epsilon(1e-14));
    }
    auto empty = segment_softmax(tape.constant(Tensor(0, 2)), std::vector<Index>{}, 0);
    CHECK(empty.value().size() == 0);
  }

  TEST_CASE("segment_softmax: sums, shift invariance and extreme logits") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t n = 1 + rng.uniform_int(0, 6);
      const auto seg = random_segments(rng, n, rng.uniform_int(0, 15));
      Tensor logits = random_tensor(rng, seg.size(), 3, -5, 5);
      if (trial % 5 == 0) {
        for (auto& v : logits.data) v = rng.uniform01() < 0.5 ? -1e4 : 1e4;
      }
      Tape tape;
      const auto out = segment_softmax(tape.constant(logits), seg, n).value();
      for (std::size_t h = 0; h < 3; ++h) {
        std::vector<double> total(n, 0.0);
        for (std::size_t e = 0; e < seg.size(); ++e) {
          CHECK(std::isfinite(out(e, h)));
          total[seg[e]] += out(e, h);
        }
        for (double t : total) CHECK(std::abs(t - 1.0) <= 1e-9);
      }
      Tensor shifted = logits;
      std::vector<double> shift(n);
      for (auto& s : shift) s = rng.uniform_real(-50, 50);
      for (std::size_t e = 0; e < seg.size(); ++e) {
        for (std::size_t h = 0; h < 3; ++h) shifted(e, h) += shift[seg[e]];
      }
      const auto moved = segment_softmax(tape.constant(shifted), seg, n).value();
      for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(std::abs(moved.data[i] - out.data[i]) <= 1e-9);
      }
    }
  }

  TEST_CASE("gather and scatter worked values") {
    Tape tape;
    auto x = tape.constant(Tensor(3, 1, {10, 20, 30}));
    auto g = gather_rows(x, std::vector<Index>{2, 0, 2});
    CHECK(g.value().data == std::vector<double>{30, 10, 30});
    auto s = scatter_add_rows(g, std::vector<Index>{1, 1, 0}, 2);
    CHECK(s.value().data == std::vector<double>{30, 40});
    CHECK_THROWS_AS(gather_rows(x, std::vector<Index>{3}), ShapeError);
  }

  TEST_CASE("head_dot and head_mean worked values") {
    Tape tape;
    auto z = tape.constant(Tensor(1, 4, {1, 2, 3, 4}));
    auto a = tape.constant(Tensor(2, 2, {1, 1, 0, 2}));
    CHECK(head_dot(z, a).value().data == std::vector<double>{3, 8});
    CHECK(head_mean(z, 2).value().data == std::vector<double>{2, 3});
  }

  TEST_CASE("edge_weighted_sum: sparse and dense paths agree with a direct loop") {
    Rng rng(5);
    for (std::size_t n_edges : {3u, 40u}) {  // 3 edges on 6 nodes is sparse, 40 is dense
      const std::size_t n = 6, heads = 2, d = 3;
      const auto z = random_tensor(rng, n, heads * d);
      const auto alpha = random_tensor(rng, n_edges, heads);
      const auto src = random_index(rng, n_edges, n);
      auto dst = random_index(rng, n_edges, n);
      std::sort(dst.begin(), dst.end());
      Tape tape;
      const auto out =
          edge_weighted_sum(tape.constant(z), tape.constant(alpha), src, dst, n).value();
      Tensor ref(n, heads * d);
      for (std::size_t e = 0; e < n_edges; ++e) {
        for (std::size_t h = 0; h < heads; ++h) {
          for (std::size_t k = 0; k < d; ++k) {
            ref(dst[e], h * d + k) += alpha(e, h) * z(src[e], h * d + k);
          }
        }
      }
      for (std::size_t i = 0; i < ref.size(); ++i) {
        CHECK(out.data[i] == doctest::Approx(ref.data[i]).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("finite differences: every primitive") {
    for (const auto& check : primitive_checks()) run_trials(check.name.c_str(), check.trial);
  }

  TEST_CASE("clamped_log has zero gradient where the floor is active") {
    Tape tape;
    auto x = tape.parameter(Tensor(2, 1, {1e-20, 2.0}));
    tape.backward(sum(clamped_log(x, 1e-12)));
    CHECK(x.grad()[0] == 0.0);
    CHECK(x.grad()[1] == 0.5);
  }
}
