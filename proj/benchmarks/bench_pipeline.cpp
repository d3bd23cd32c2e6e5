#include <random>

#include <benchmark/benchmark.h>

#include "scbf/controller.hpp"
#include "scbf/kernel.hpp"
#include "scbf/relaxation.hpp"
#include "scbf/synthesis.hpp"
#include "scbf/validation.hpp"

using namespace scbf;

static void BM_ErfWindow(benchmark::State& state) {
  double y = -3.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(erf_window(y, -0.5, 0.5));
    y = y > 3.0 ? -3.0 : y + 1e-3;
  }
}
BENCHMARK(BM_ErfWindow);

static void BM_KernelRow(benchmark::State& state) {
  const auto spec = load_benchmark("linear-convex");
  const std::vector<int> g{static_cast<int>(state.range(0)), static_cast<int>(state.range(0))};
  const auto p = build_partition(spec, g);
  std::vector<double> x{0.1, -0.2}, u{0.3, 0.3};
  for (auto _ : state) benchmark::DoNotOptimize(kernel_row(spec, p, x, u));
}
BENCHMARK(BM_KernelRow)->Arg(10)->Arg(20);

static void BM_BoundRow(benchmark::State& state) {
  const auto spec = load_benchmark("linear-convex");
  const std::vector<int> g{static_cast<int>(state.range(0)), static_cast<int>(state.range(0))};
  const auto p = build_partition(spec, g);
  int i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(bound_row(spec, p, i, BoundMode::kAffine));
    i = (i + 1) % p.size();
  }
}
BENCHMARK(BM_BoundRow)->Arg(10)->Arg(20);

static void BM_GreedyInner(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> w(n), lo(n), hi(n);
  for (int j = 0; j < n; ++j) {
    w[j] = unit(rng);
    lo[j] = 0.5 * unit(rng) / n;
    hi[j] = lo[j] + unit(rng);
  }
  for (auto _ : state) benchmark::DoNotOptimize(greedy_inner(w, lo, hi));
}
BENCHMARK(BM_GreedyInner)->Arg(8)->Arg(64)->Arg(512);

static void BM_Synthesize(benchmark::State& state) {
  const auto spec = load_benchmark(state.range(0) == 0 ? "linear-convex" : "temperature-3room");
  const auto p = build_partition(spec, spec.default_grid);
  SynthesisOptions opt;
  for (auto _ : state) {
    const auto bm = bound_all(spec, p);
    benchmark::DoNotOptimize(synthesize(spec, p, bm, opt));
  }
}
BENCHMARK(BM_Synthesize)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

static void BM_Simulate(benchmark::State& state) {
  const auto spec = load_benchmark("linear-convex");
  const auto p = build_partition(spec, spec.default_grid);
  Controller ctl;
  ctl.controls.assign(p.size(), {-1.0, -1.0});
  ctl.fallback = {0.0, 0.0};
  McOptions opt;
  for (auto _ : state) benchmark::DoNotOptimize(simulate(spec, p, ctl, opt));
}
BENCHMARK(BM_Simulate)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
