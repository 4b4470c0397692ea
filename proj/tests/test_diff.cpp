// Copyright Contributors to the svs project
// SPDX-License-Identifier: Apache-2.0
#include "svs/diff.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "doctest.h"

using namespace svs::diff;

namespace {

Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.values) v = u(rng);
  return t;
}

}  // namespace

TEST_CASE("softmax of a constant row is uniform") {
  Tape t;
  for (int n : {1, 3, 8}) {
    Var x = t.constant(Tensor::full({1, n}, 0.37));
    Var y = t.softmax(x, 1);
    for (double v : t.value(y).values)
      CHECK(v == doctest::Approx(1.0 / n).epsilon(1e-12));
  }
}

TEST_CASE("softmax rows sum to one for random input") {
  Tape t;
  std::mt19937_64 rng(1);
  Var x = t.constant(random_tensor({5, 7}, rng, -4.0, 4.0));
  Var y = t.softmax(x, 1);
  const Tensor& v = t.value(y);
  for (int i = 0; i < 5; ++i) {
    double s = 0.0;
    for (int j = 0; j < 7; ++j) s += v.at(i, j);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("smooth_l1 piecewise values") {
  const double beta = 0.7;
  Tape t;
  Var x = t.constant(Tensor({3}, {0.0, 2.0 * beta, -2.0 * beta}));
  Var y = t.smooth_l1(x, beta);
  CHECK(t.value(y).at(0) == doctest::Approx(0.0));
  CHECK(t.value(y).at(1) == doctest::Approx(1.5 * beta).epsilon(1e-12));
  CHECK(t.value(y).at(2) == doctest::Approx(1.5 * beta).epsilon(1e-12));
}

TEST_CASE("matmul with the identity is a no-op") {
  Tape t;
  std::mt19937_64 rng(2);
  const Tensor a = random_tensor({4, 4}, rng);
  Tensor eye = Tensor::zeros({4, 4});
  for (int i = 0; i < 4; ++i) eye.at(i, i) = 1.0;
  Var y = t.matmul(t.constant(eye), t.constant(a));
  for (size_t i = 0; i < a.values.size(); ++i)
    CHECK(t.value(y).values[i] == doctest::Approx(a.values[i]));
}

TEST_CASE("sum of squares has the analytic gradient 2x") {
  std::mt19937_64 rng(3);
  const Tensor x = random_tensor({10}, rng);
  auto f = [](Tape& t, Var v) { return t.sum(t.mul(v, v)); };
  CHECK(grad_check(f, x, 1e-6) < 1e-8);

  Tape t;
  Var v = t.input(x, true);
  Var y = t.sum(t.mul(v, v));
  t.backward(y);
  const Tensor& g = t.grad(v);
  for (size_t i = 0; i < x.values.size(); ++i)
    CHECK(g.values[i] == doctest::Approx(2.0 * x.values[i]).epsilon(1e-12));
}

TEST_CASE("two-layer softplus mlp passes grad_check") {
  std::mt19937_64 rng(4);
  const int in = 5, hidden = 7;
  const Tensor w1 = random_tensor({in, hidden}, rng);
  const Tensor w2 = random_tensor({hidden, 1}, rng);
  const Tensor b1 = random_tensor({1, hidden}, rng);
  const Tensor x0 = random_tensor({3, in}, rng);

  // Check gradients with respect to every parameter block.
  auto fw1 = [&](Tape& t, Var w) {
    Var x = t.constant(x0);
    Var h = t.softplus(
        t.add(t.matmul(x, w), t.broadcast(t.constant(b1), {3, hidden})));
    return t.sum(t.matmul(h, t.constant(w2)));
  };
  CHECK(grad_check(fw1, w1, 1e-6) < 1e-5);

  auto fx = [&](Tape& t, Var x) {
    Var h = t.softplus(t.add(t.matmul(x, t.constant(w1)),
                             t.broadcast(t.constant(b1), {3, hidden})));
    return t.sum(t.matmul(h, t.constant(w2)));
  };
  CHECK(grad_check(fx, x0, 1e-6) < 1e-5);
}

TEST_CASE("every op matches central finite differences on random shapes") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> dim(1, 6);

  for (int trial = 0; trial < 3; ++trial) {
    const int r = dim(rng), c = dim(rng);

    struct Case {
      std::string name;
      std::function<Var(Tape&, Var)> fn;
      Tensor at;
    };
    const Tensor other = random_tensor({r, c}, rng);
    const Tensor m2 = random_tensor({c, r}, rng);
    std::vector<Case> cases;
    cases.push_back({"add", [&](Tape& t, Var x) {
                       return t.sum(t.add(x, t.constant(other)));
                     }, random_tensor({r, c}, rng)});
    cases.push_back({"sub", [&](Tape& t, Var x) {
                       return t.sum(t.sub(t.constant(other), x));
                     }, random_tensor({r, c}, rng)});
    cases.push_back({"mul", [&](Tape& t, Var x) {
                       return t.sum(t.mul(x, t.constant(other)));
                     }, random_tensor({r, c}, rng)});
    cases.push_back({"scale", [&](Tape& t, Var x) {
                       return t.sum(t.scale(x, -2.5));
                     }, random_tensor({r, c}, rng)});
    cases.push_back({"add_const", [&](Tape& t, Var x) {
                       return t.sum(t.mul(t.add_const(x, 0.3), x));
                     }, random_tensor({r, c}, rng)});
    cases.push_back({"matmul", [&](Tape& t, Var x) {
                       return t.sum(t.matmul(x, t.constant(m2)));
                     }, random_tensor({r, c}, rng)});
    cases.push_back({"mean", [&](Tape& t, Var x) {
                       return t.mean(t.mul(x, x));
                     }, random_tensor({r, c}, rng)});
    cases.push_back({"exp", [&](Tape& t, Var x) {
                       return t.sum(t.exp(x));
                     }, random_tensor({r, c}, rng)});
    cases.push_back({"log", [&](Tape& t, Var x) {
                       return t.sum(t.log(x));
                     }, random_tensor({r, c}, rng, 0.2, 2.0)});
    cases.push_back({"relu", [&](Tape& t, Var x) {
                       return t.sum(t.relu(x));
                     }, random_tensor({r, c}, rng, 0.05, 1.0)});
    cases.push_back({"softplus", [&](Tape& t, Var x) {
                       return t.sum(t.softplus(x));
                     }, random_tensor({r, c}, rng, -3.0, 3.0)});
    cases.push_back({"sigmoid", [&](Tape& t, Var x) {
                       return t.sum(t.sigmoid(x));
                     }, random_tensor({r, c}, rng, -3.0, 3.0)});
    cases.push_back({"reciprocal", [&](Tape& t, Var x) {
                       return t.sum(t.reciprocal(x));
                     }, random_tensor({r, c}, rng, 0.4, 2.0)});
    cases.push_back({"clamp_min", [&](Tape& t, Var x) {
                       return t.sum(t.mul(t.clamp_min(x, 0.2), x));
                     }, random_tensor({r, c}, rng, 0.3, 1.0)});
    cases.push_back({"smooth_l1", [&](Tape& t, Var x) {
                       return t.sum(t.smooth_l1(x, 0.5));
                     }, random_tensor({r, c}, rng, 0.6, 2.0)});
    cases.push_back({"softmax_rows", [&](Tape& t, Var x) {
                       return t.sum(t.mul(t.softmax(x, 1), t.constant(other)));
                     }, random_tensor({r, c}, rng)});
    cases.push_back({"softmax_cols", [&](Tape& t, Var x) {
                       return t.sum(t.mul(t.softmax(x, 0), t.constant(other)));
                     }, random_tensor({r, c}, rng)});
    cases.push_back({"broadcast_col", [&](Tape& t, Var x) {
                       return t.sum(t.mul(t.broadcast(x, {r, c}), t.constant(other)));
                     }, random_tensor({r, 1}, rng)});
    cases.push_back({"broadcast_row", [&](Tape& t, Var x) {
                       return t.sum(t.mul(t.broadcast(x, {r, c}), t.constant(other)));
                     }, random_tensor({1, c}, rng)});
    cases.push_back({"broadcast_scalar", [&](Tape& t, Var x) {
                       return t.sum(t.mul(t.broadcast(x, {r, c}), t.constant(other)));
                     }, random_tensor({1}, rng)});
    cases.push_back({"reshape", [&](Tape& t, Var x) {
                       return t.sum(t.mul(t.reshape(x, {c, r}), t.constant(m2)));
                     }, random_tensor({r, c}, rng)});
    cases.push_back({"slice", [&](Tape& t, Var x) {
                       Var s = t.slice(x, 0, r * c > 1 ? r * c - 1 : 1);
                       return t.sum(t.mul(s, s));
                     }, random_tensor({r, c}, rng)});
    cases.push_back({"repeat_rows", [&](Tape& t, Var x) {
                       Var y = t.repeat_rows(x, 3);
                       return t.sum(t.mul(y, y));
                     }, random_tensor({r, c}, rng)});
    cases.push_back({"group_sum_rows", [&](Tape& t, Var x) {
                       Var y = t.group_sum_rows(t.repeat_rows(x, 2), 2);
                       return t.sum(t.mul(y, t.constant(other)));
                     }, random_tensor({r, c}, rng)});
    cases.push_back({"cumsum_exclusive", [&](Tape& t, Var x) {
                       return t.sum(t.mul(t.cumsum_exclusive(x), t.constant(other)));
                     }, random_tensor({r, c}, rng)});

    for (const auto& cse : cases) {
      const double err = grad_check(cse.fn, cse.at, 1e-6);
      INFO("op = " << cse.name << " shape " << r << "x" << c);
      CHECK(err < 1e-5);
    }
  }
}

TEST_CASE("gradient of a broadcast sum has the pre-broadcast shape") {
  Tape t;
  Var x = t.input(Tensor::full({3, 1}, 0.5), true);
  Var y = t.sum(t.broadcast(x, {3, 4}));
  t.backward(y);
  const Tensor& g = t.grad(x);
  REQUIRE(g.shape == std::vector<int>{3, 1});
  for (double v : g.values) CHECK(v == doctest::Approx(4.0));
}

TEST_CASE("stop_gradient blocks flow while passing values") {
  Tape t;
  Var x = t.input(Tensor({2}, {1.0, 2.0}), true);
  Var held = t.stop_gradient(x);
  CHECK(t.value(held).at(1) == doctest::Approx(2.0));
  Var y = t.sum(t.add(t.mul(x, x), t.mul(held, held)));
  t.backward(y);
  const Tensor& g = t.grad(x);
  // Only the direct x*x path contributes: d/dx = 2x, not 4x.
  CHECK(g.at(0) == doctest::Approx(2.0));
  CHECK(g.at(1) == doctest::Approx(4.0));
}

TEST_CASE("non-trainable inputs receive zero gradient") {
  Tape t;
  Var x = t.input(Tensor({2}, {1.0, 2.0}), false);
  Var y = t.sum(t.mul(x, x));
  t.backward(y);
  for (double v : t.grad(x).values) CHECK(v == 0.0);
}

TEST_CASE("cumsum_exclusive forward semantics") {
  Tape t;
  Var x = t.constant(Tensor({2, 3}, {1.0, 2.0, 3.0, 10.0, 20.0, 30.0}));
  Var y = t.cumsum_exclusive(x);
  const Tensor& v = t.value(y);
  CHECK(v.at(0, 0) == doctest::Approx(0.0));
  CHECK(v.at(0, 1) == doctest::Approx(1.0));
  CHECK(v.at(0, 2) == doctest::Approx(3.0));
  CHECK(v.at(1, 2) == doctest::Approx(30.0));
}

TEST_CASE("shape mismatches report both shapes") {
  Tape t;
  Var a = t.constant(Tensor::zeros({2, 3}));
  Var b = t.constant(Tensor::zeros({3, 3}));
  try {
    t.add(a, b);
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2,3]") != std::string::npos);
    CHECK(msg.find("[3,3]") != std::string::npos);
  }
}

TEST_CASE("grad_check rejects non-scalar outputs and bad eps") {
  const Tensor x = Tensor::full({3}, 0.5);
  auto passthrough = [](Tape&, Var v) { return v; };
  CHECK_THROWS_AS(grad_check(passthrough, x, 1e-6), std::invalid_argument);
  auto f = [](Tape& t, Var v) { return t.sum(v); };
  CHECK_THROWS_AS(grad_check(f, x, 1e-3), std::invalid_argument);
  CHECK_THROWS_AS(grad_check(f, x, 1e-8), std::invalid_argument);
}

TEST_CASE("backward requires a scalar output") {
  Tape t;
  Var x = t.input(Tensor::zeros({2, 2}), true);
  CHECK_THROWS_AS(t.backward(x), std::invalid_argument);
}

TEST_CASE("gradients accumulate across reuse of the same var") {
  Tape t;
  Var x = t.input(Tensor({1}, {3.0}), true);
  Var y = t.add(t.mul(x, x), t.scale(x, 5.0));  // x^2 + 5x
  t.backward(t.sum(y));
  CHECK(t.grad(x).at(0) == doctest::Approx(2.0 * 3.0 + 5.0));
}
