// Copyright 2026 The MaIL Lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "doctest.h"
#include "mail/grad_check.h"
#include "mail/ops.h"
#include "mail/tensor.h"
#include "test_util.h"

using namespace mail;
using mail::testing::bitwise_equal;
using mail::testing::max_abs_diff;
using mail::testing::random_tensor;

TEST_CASE("tensor construction checks the element count") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
  const Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.at({1, 2}) == 6.0);
  CHECK(t.numel() == 6);
}

TEST_CASE("linear") {
  SUBCASE("identity") {
    const Tensor y = linear(Tensor({2}, {1, 0}), Tensor({2, 2}, {1, 0, 0, 1}), Tensor({2}, {0, 0}));
    CHECK(y.data()[0] == 1.0);
    CHECK(y.data()[1] == 0.0);
  }
  SUBCASE("sum plus bias") {
    const Tensor y = linear(Tensor({2}, {1, 2}), Tensor({2, 1}, {1, 1}), Tensor({1}, {1}));
    CHECK(y.shape() == Shape{1});
    CHECK(y.item() == 4.0);
  }
  SUBCASE("random product against a triple loop") {
    Rng rng(11);
    const Tensor x = random_tensor({3, 4}, rng);
    const Tensor w = random_tensor({4, 2}, rng);
    const Tensor y = linear(x, w);
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 2; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < 4; ++k) s += x.at({i, k}) * w.at({k, j});
        CHECK(std::abs(y.at({i, j}) - s) <= 1e-12);
      }
    }
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(linear(Tensor::zeros({2, 3}), Tensor::zeros({4, 2})), DimensionError);
    CHECK_THROWS_AS(linear(Tensor::zeros({2, 4}), Tensor::zeros({4, 2}), Tensor::zeros({3})),
                    DimensionError);
  }
}

TEST_CASE("softplus") {
  CHECK(softplus(Tensor::scalar(0.0)).item() == doctest::Approx(std::numbers::ln2).epsilon(1e-15));
  CHECK(std::abs(softplus(Tensor::scalar(50.0)).item() - 50.0) <= 1e-12);
  // ln(1 + e^x) = e^x - e^{2x}/2 + ... for very negative x
  const double e = std::exp(-50.0);
  const double series = e - e * e / 2.0;
  CHECK(std::abs(softplus(Tensor::scalar(-50.0)).item() - series) / series <= 1e-6);
  // strictly positive even deep in the tail
  CHECK(softplus(Tensor::scalar(-700.0)).item() > 0.0);
  CHECK(std::isfinite(softplus(Tensor::scalar(1000.0)).item()));
}

TEST_CASE("silu") {
  CHECK(silu(Tensor::scalar(0.0)).item() == 0.0);
  CHECK(std::abs(silu(Tensor::scalar(50.0)).item() - 50.0) <= 1e-12);
  CHECK(silu(Tensor::scalar(1.0)).item() == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-14));
  CHECK(silu(Tensor::scalar(1.0)).item() == doctest::Approx(0.731059).epsilon(1e-6));
}

TEST_CASE("layer_norm") {
  const Tensor ones = Tensor::ones({4});
  const Tensor zeros = Tensor::zeros({4});
  SUBCASE("constant input normalizes to zero") {
    const Tensor y = layer_norm(Tensor::full({4}, 3.5), ones, zeros);
    for (double v : y.data()) CHECK(v == 0.0);
  }
  SUBCASE("already normalized") {
    const Tensor y = layer_norm(Tensor({2}, {-1, 1}), Tensor::ones({2}), Tensor::zeros({2}), 1e-15);
    CHECK(std::abs(y.data()[0] + 1.0) <= 1e-12);
    CHECK(std::abs(y.data()[1] - 1.0) <= 1e-12);
  }
  SUBCASE("random vector has zero mean and unit (eps-corrected) variance") {
    Rng rng(2);
    const std::size_t n = 37;
    const Tensor x = random_tensor({n}, rng, 3.0);
    const double eps = 1e-5;
    const Tensor y = layer_norm(x, Tensor::ones({n}), Tensor::zeros({n}), eps);
    double mx = 0.0;
    for (double v : x.data()) mx += v;
    mx /= n;
    double vx = 0.0;
    for (double v : x.data()) vx += (v - mx) * (v - mx);
    vx /= n;
    double my = 0.0;
    for (double v : y.data()) my += v;
    my /= n;
    double vy = 0.0;
    for (double v : y.data()) vy += (v - my) * (v - my);
    vy /= n;
    CHECK(std::abs(my) <= 1e-6);
    CHECK(std::abs(vy - vx / (vx + eps)) <= 1e-6);
  }
}

TEST_CASE("causal_depthwise_conv") {
  Rng rng(9);
  SUBCASE("width one, unit kernel is the identity") {
    const Tensor x = random_tensor({5, 3}, rng);
    const Tensor y = causal_depthwise_conv(x, Tensor::ones({1, 3}), Tensor::zeros({3}));
    CHECK(bitwise_equal(x, y));
  }
  SUBCASE("impulse response is the reversed kernel") {
    const std::size_t w = 3, d = 2, l = 6;
    std::vector<double> xv(l * d, 0.0);
    xv[0] = 1.0;
    xv[1] = 1.0;
    const Tensor k = random_tensor({w, d}, rng);
    const Tensor y = causal_depthwise_conv(Tensor({l, d}, xv), k, Tensor::zeros({d}));
    for (std::size_t t = 0; t < l; ++t) {
      for (std::size_t c = 0; c < d; ++c) {
        const double expect = t < w ? k.at({w - 1 - t, c}) : 0.0;
        CHECK(y.at({t, c}) == expect);
      }
    }
  }
  SUBCASE("perturbing position l leaves earlier outputs bitwise unchanged") {
    const std::size_t l = 9, d = 4;
    const Tensor x = random_tensor({2, l, d}, rng);
    const Tensor k = random_tensor({4, d}, rng);
    const Tensor b = random_tensor({d}, rng);
    const Tensor y = causal_depthwise_conv(x, k, b);
    for (std::size_t pos = 0; pos < l; ++pos) {
      Tensor xp = x.clone();
      for (std::size_t bi = 0; bi < 2; ++bi) xp.mutable_data()[(bi * l + pos) * d + 1] += 0.5;
      const Tensor yp = causal_depthwise_conv(xp, k, b);
      for (std::size_t bi = 0; bi < 2; ++bi) {
        for (std::size_t t = 0; t < pos; ++t) {
          for (std::size_t c = 0; c < d; ++c) CHECK(yp.at({bi, t, c}) == y.at({bi, t, c}));
        }
        CHECK(yp.at({bi, pos, 1}) != y.at({bi, pos, 1}));
      }
    }
  }
}

TEST_CASE("backward basics") {
  SUBCASE("sum") {
    const Tensor x = Tensor::parameter({3}, {1, 1, 1});
    GradientTape tape;
    const Gradients g = backward(tape, sum(x));
    const Tensor dx = g.of(x);
    for (double v : dx.data()) CHECK(v == 1.0);
  }
  SUBCASE("quadratic") {
    const Tensor x = Tensor::parameter({2}, {1, 2});
    GradientTape tape;
    const Gradients g = tape.backward(sum(mul(x, x)));
    CHECK(g.of(x).data()[0] == 2.0);
    CHECK(g.of(x).data()[1] == 4.0);
  }
  SUBCASE("non-scalar loss is rejected") {
    const Tensor x = Tensor::parameter({2}, {1, 2});
    GradientTape tape;
    CHECK_THROWS_AS(tape.backward(mul(x, x)), TapeError);
  }
  SUBCASE("second backward on one tape is rejected") {
    const Tensor x = Tensor::parameter({2}, {1, 2});
    GradientTape tape;
    const Tensor loss = sum(x);
    tape.backward(loss);
    CHECK_THROWS_AS(tape.backward(loss), TapeError);
  }
  SUBCASE("untracked loss is rejected") {
    GradientTape tape;
    CHECK_THROWS_AS(tape.backward(sum(Tensor::ones({2}))), TapeError);
  }
  SUBCASE("without a tape nothing is recorded") {
    const Tensor x = Tensor::parameter({2}, {1, 2});
    const Tensor y = mul(x, x);
    CHECK(GradientTape::active() == nullptr);
    CHECK_FALSE(y.requires_grad());
  }
}

TEST_CASE("shared-input gradients accumulate additively") {
  const Tensor x = Tensor::parameter({4}, {1, -2, 3, 5});
  auto f = [](const Tensor& v) { return sum(mul(v, v)); };
  auto g = [](const Tensor& v) { return sum(scale(v, 3.0)); };
  Gradients both, only_f, only_g;
  {
    GradientTape tape;
    both = tape.backward(add(f(x), g(x)));
  }
  {
    GradientTape tape;
    only_f = tape.backward(f(x));
  }
  {
    GradientTape tape;
    only_g = tape.backward(g(x));
  }
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(both.of(x).data()[i] == only_f.of(x).data()[i] + only_g.of(x).data()[i]);
  }
}

TEST_CASE("grad_check reference functions") {
  Rng rng(4);
  const Tensor p = random_tensor({6}, rng);
  CHECK(grad_check([](const Tensor& x) { return sum(x); }, p) <= 1e-8);
  CHECK(grad_check([](const Tensor& x) { return sum(softplus(x)); }, p) <= 1e-5);
  CHECK_THROWS_AS(grad_check([](const Tensor& x) { return sum(scale(x, 1e308 * 1e10)); }, p),
                  ContractError);
}

namespace {

// Every primitive is scalarized with fixed random weights so no coordinate of
// the gradient is structurally tiny.
struct Case {
  std::string name;
  Shape shape;
  std::function<Tensor(const Tensor&)> f;
};

Tensor weighted(const Tensor& y, std::uint64_t seed) {
  Rng rng(seed);
  return sum(mul(y, random_tensor(y.shape(), rng)));
}

}  // namespace

TEST_CASE("every differentiable primitive passes the finite-difference check") {
  Rng rng(77);
  const Tensor w = random_tensor({4, 3}, rng);
  const Tensor bias = random_tensor({3}, rng);
  const Tensor other = random_tensor({2, 4}, rng);
  const Tensor row = random_tensor({4}, rng);
  const Tensor gamma = random_tensor({4}, rng);
  const Tensor beta = random_tensor({4}, rng);
  const Tensor taps = random_tensor({3, 4}, rng);
  const Tensor taps_bias = random_tensor({4}, rng);
  const Tensor mat = random_tensor({2, 4, 3}, rng);

  const std::vector<Case> cases = {
      {"add", {2, 4}, [&](const Tensor& x) { return weighted(add(x, other), 1); }},
      {"add suffix", {2, 4}, [&](const Tensor& x) { return weighted(add(other, mul(x, x)), 2); }},
      {"sub", {2, 4}, [&](const Tensor& x) { return weighted(sub(other, x), 3); }},
      {"mul", {2, 4}, [&](const Tensor& x) { return weighted(mul(x, other), 4); }},
      {"mul broadcast", {4}, [&](const Tensor& x) { return weighted(mul(other, x), 5); }},
      {"scale", {2, 4}, [&](const Tensor& x) { return weighted(scale(x, -1.7), 6); }},
      {"exp", {2, 4}, [&](const Tensor& x) { return weighted(exp(x), 7); }},
      {"softplus", {2, 4}, [&](const Tensor& x) { return weighted(softplus(scale(x, 3.0)), 8); }},
      {"sigmoid", {2, 4}, [&](const Tensor& x) { return weighted(sigmoid(x), 9); }},
      {"silu", {2, 4}, [&](const Tensor& x) { return weighted(silu(x), 10); }},
      {"mean", {2, 4}, [&](const Tensor& x) { return mean(mul(x, other)); }},
      {"linear input", {2, 4}, [&](const Tensor& x) { return weighted(linear(x, w, bias), 11); }},
      {"linear weight", {4, 3}, [&](const Tensor& x) { return weighted(linear(other, x, bias), 12); }},
      {"linear bias", {3}, [&](const Tensor& x) { return weighted(linear(other, w, x), 13); }},
      {"matmul left", {2, 3, 4}, [&](const Tensor& x) { return weighted(matmul(x, mat), 14); }},
      {"matmul right", {2, 4, 3},
       [&](const Tensor& x) { return weighted(matmul(reshape(other, {2, 1, 4}), x), 15); }},
      {"permute", {2, 3, 4}, [&](const Tensor& x) { return weighted(permute(x, {2, 0, 1}), 16); }},
      {"transpose", {2, 3, 4}, [&](const Tensor& x) { return weighted(transpose_last2(x), 17); }},
      {"reshape", {2, 4}, [&](const Tensor& x) { return weighted(reshape(x, {4, 2}), 18); }},
      {"concat", {2, 4},
       [&](const Tensor& x) { return weighted(concat({x, other, mul(x, x)}, 1), 19); }},
      {"slice", {3, 4}, [&](const Tensor& x) { return weighted(slice(x, 0, 1, 2), 20); }},
      {"expand_last", {3, 1}, [&](const Tensor& x) { return weighted(expand_last(x, 4), 21); }},
      {"broadcast_leading", {4},
       [&](const Tensor& x) { return weighted(broadcast_leading(x, {2, 3}), 22); }},
      {"softmax", {2, 5}, [&](const Tensor& x) { return weighted(softmax_last(x), 23); }},
      {"causal softmax", {2, 4, 4},
       [&](const Tensor& x) { return weighted(softmax_last(x, true), 24); }},
      {"layer_norm input", {3, 4},
       [&](const Tensor& x) { return weighted(layer_norm(x, gamma, beta), 25); }},
      {"layer_norm gamma", {4},
       [&](const Tensor& x) { return weighted(layer_norm(other, x, beta), 26); }},
      {"layer_norm beta", {4},
       [&](const Tensor& x) { return weighted(layer_norm(other, gamma, x), 27); }},
      {"conv input", {2, 5, 4},
       [&](const Tensor& x) { return weighted(causal_depthwise_conv(x, taps, taps_bias), 28); }},
      {"conv taps", {3, 4},
       [&](const Tensor& x) {
         return weighted(causal_depthwise_conv(reshape(concat({other, other}, 0), {4, 4}), x, taps_bias), 29);
       }},
      {"conv bias", {4},
       [&](const Tensor& x) { return weighted(causal_depthwise_conv(reshape(other, {2, 4}), taps, x), 30); }},
      {"batch_squared_error", {2, 4},
       [&](const Tensor& x) { return batch_squared_error(x, other); }},
  };
  (void)row;
  for (const Case& c : cases) {
    for (int point = 0; point < 10; ++point) {
      const Tensor p = random_tensor(c.shape, rng);
      const double err = grad_check(c.f, p, 1e-5);
      INFO(c.name << " at point " << point);
      CHECK(err <= 1e-4);
    }
  }
}

TEST_CASE("softmax rows sum to one, causal rows mask the future") {
  Rng rng(8);
  const Tensor p = softmax_last(random_tensor({3, 5, 5}, rng, 4.0), true);
  for (std::size_t b = 0; b < 3; ++b) {
    for (std::size_t i = 0; i < 5; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < 5; ++j) {
        s += p.at({b, i, j});
        if (j > i) CHECK(p.at({b, i, j}) == 0.0);
      }
      CHECK(std::abs(s - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("forward ops are deterministic") {
  Rng rng(1);
  const Tensor x = random_tensor({4, 7, 6}, rng);
  const Tensor w = random_tensor({6, 6}, rng);
  auto run = [&] {
    return layer_norm(silu(linear(x, w)), Tensor::ones({6}), Tensor::zeros({6}));
  };
  CHECK(bitwise_equal(run(), run()));
}

TEST_CASE("concat and slice round trip") {
  Rng rng(12);
  const Tensor a = random_tensor({2, 3, 4}, rng);
  const Tensor b = random_tensor({2, 5, 4}, rng);
  const Tensor c = concat({a, b}, 1);
  CHECK(c.shape() == Shape{2, 8, 4});
  CHECK(bitwise_equal(slice(c, 1, 0, 3), a));
  CHECK(bitwise_equal(slice(c, 1, 3, 5), b));
  CHECK_THROWS_AS(concat({a, Tensor::zeros({2, 3, 5})}, 1), DimensionError);
  CHECK_THROWS_AS(slice(a, 1, 2, 2), DimensionError);
}
