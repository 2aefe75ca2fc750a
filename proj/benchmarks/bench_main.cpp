// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "pdo/diffusion.hpp"
#include "pdo/simulators.hpp"
#include "pdo/unet.hpp"

namespace {

void BM_SweSolve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const pdo::Grid g = pdo::swe_orig_grid(n, n);
  pdo::Rng rng(1);
  const auto ic = pdo::swe_orig_initial(pdo::SweOrigIcParams::sample(rng), g);
  pdo::SweConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(pdo::swe_solve(cfg, ic, g));
}
BENCHMARK(BM_SweSolve)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_DarcySolve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const pdo::Grid g = pdo::unit_square_grid(n);
  pdo::DarcyConfig cfg;
  const pdo::Field a = pdo::darcy_sample_coefficient(7, cfg, g);
  for (auto _ : state) benchmark::DoNotOptimize(pdo::darcy_solve(a, cfg, g));
}
BENCHMARK(BM_DarcySolve)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_ReactorSolve(benchmark::State& state) {
  pdo::ReactorConfig cfg;
  const pdo::Grid g = pdo::reactor_grid();
  for (auto _ : state) benchmark::DoNotOptimize(pdo::reactor_solve(cfg, g));
}
BENCHMARK(BM_ReactorSolve)->Unit(benchmark::kMillisecond);

void BM_UNetForward(benchmark::State& state) {
  pdo::NetConfig cfg;
  cfg.base_width = static_cast<int>(state.range(0));
  const int batch = static_cast<int>(state.range(1));
  pdo::UNet<float> net(cfg, 3);
  pdo::Tensor x(batch, cfg.channels_in(), 64, 64);
  pdo::Rng rng(2);
  pdo::fill_normal(x, rng);
  std::vector<float> nc(batch, 0.1f);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x, nc));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_UNetForward)->Args({16, 1})->Args({32, 1})->Args({32, 8})->Unit(benchmark::kMillisecond);

void BM_UNetTrainStep(benchmark::State& state) {
  pdo::NetConfig cfg;
  cfg.base_width = static_cast<int>(state.range(0));
  const int batch = 8;
  pdo::UNet<float> net(cfg, 3);
  pdo::Tensor x(batch, cfg.channels_in(), 64, 64);
  pdo::Rng rng(2);
  pdo::fill_normal(x, rng);
  std::vector<float> nc(batch, 0.1f);
  pdo::Tensor g(batch, cfg.channels, 64, 64, 1.0f);
  for (auto _ : state) {
    pdo::UNetCache<float> cache;
    benchmark::DoNotOptimize(net.forward(x, nc, cache));
    net.backward(cache, g);
  }
}
BENCHMARK(BM_UNetTrainStep)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_HeunAnalytic(benchmark::State& state) {
  pdo::EdmConfig edm;
  pdo::SamplerConfig sc;
  sc.n_steps = static_cast<int>(state.range(0));
  const pdo::DenoiserFn d = [](const pdo::Tensor& x, double sigma) {
    pdo::Tensor out = x;
    const double s2 = sigma * sigma;
    for (auto& v : out.data()) v = static_cast<float>(0.25 * v / (0.25 + s2));
    return out;
  };
  pdo::Tensor cond(1, 2, 64, 64);
  const auto mask = pdo::unconditional_mask({2, 64, 64});
  pdo::Rng rng(4);
  for (auto _ : state) benchmark::DoNotOptimize(pdo::heun_sample(d, cond, mask, sc, edm, rng));
}
BENCHMARK(BM_HeunAnalytic)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
