// Copyright Contributors to the svs project
// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <random>

#include "svs/diff.hpp"
#include "svs/image.hpp"

namespace {

svs::diff::Tensor random_tensor(std::vector<int> shape, unsigned seed) {
  svs::diff::Tensor t = svs::diff::Tensor::zeros(std::move(shape));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& v : t.values) v = u(rng);
  return t;
}

void bench_matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto a = random_tensor({n, n}, 1);
  const auto b = random_tensor({n, n}, 2);
  for (auto _ : state) {
    svs::diff::Tape t;
    auto y = t.matmul(t.constant(a), t.constant(b));
    benchmark::DoNotOptimize(t.value(y).values.data());
  }
  state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(bench_matmul)->Arg(64)->Arg(128);

void bench_mlp_backward(benchmark::State& state) {
  const int rows = static_cast<int>(state.range(0));
  const auto x = random_tensor({rows, 76}, 3);
  const auto w1 = random_tensor({76, 32}, 4);
  const auto w2 = random_tensor({32, 1}, 5);
  for (auto _ : state) {
    svs::diff::Tape t;
    auto vx = t.constant(x);
    auto vw1 = t.input(w1, true);
    auto vw2 = t.input(w2, true);
    auto h = t.softplus(t.matmul(vx, vw1));
    auto y = t.sum(t.matmul(h, vw2));
    t.backward(y);
    benchmark::DoNotOptimize(t.grad(vw1).values.data());
  }
  state.SetItemsProcessed(state.iterations() * rows);
}
BENCHMARK(bench_mlp_backward)->Arg(512)->Arg(4096);

void bench_box_filter(benchmark::State& state) {
  svs::Grid g(384, 256, 1);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : g.data) v = u(rng);
  for (auto _ : state) {
    svs::Grid out = svs::box_filter(g, 3);
    benchmark::DoNotOptimize(out.data.data());
  }
  state.SetItemsProcessed(state.iterations() * g.width * g.height);
}
BENCHMARK(bench_box_filter);

}  // namespace

BENCHMARK_MAIN();
