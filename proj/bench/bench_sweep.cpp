// Serial reference sweep against the OpenMP sweep, per scheme.

#include "mtfb/sim.hpp"

#include <benchmark/benchmark.h>

#include <vector>

namespace {

const mtfb::SnrModel kModel(10.0);
const std::vector<int> kUsers{50, 100};

mtfb::SchemeSpec scheme(int id) {
  switch (id) {
  case 0:
    return mtfb::SchemeSpec::full_feedback(5);
  case 1:
    return mtfb::SchemeSpec::multi_threshold(4, 5, mtfb::AllocationRule::Fast);
  default:
    return mtfb::SchemeSpec::single_threshold_outage(5, 0.1);
  }
}

mtfb::SweepOptions options(const benchmark::State& state) {
  mtfb::SweepOptions o;
  o.trials = 2000;
  o.sampling = state.range(1) == 0 ? mtfb::SamplingPath::Direct : mtfb::SamplingPath::ZeroForcing;
  o.threads = static_cast<int>(state.range(2));
  return o;
}

void BM_SerialSweep(benchmark::State& state) {
  const auto spec = scheme(static_cast<int>(state.range(0)));
  const auto o = options(state);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mtfb::reference::run_sweep(spec, kModel, 4, kUsers, o));
  }
  state.SetItemsProcessed(state.iterations() * o.trials * static_cast<long>(kUsers.size()));
}

void BM_ParallelSweep(benchmark::State& state) {
  const auto spec = scheme(static_cast<int>(state.range(0)));
  const auto o = options(state);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mtfb::run_sweep(spec, kModel, 4, kUsers, o));
  }
  state.SetItemsProcessed(state.iterations() * o.trials * static_cast<long>(kUsers.size()));
}

// Args: scheme (0 = A, 1 = C, 2 = D), sampling (0 = direct, 1 = ZF), workers.
BENCHMARK(BM_SerialSweep)
    ->ArgsProduct({{0, 1, 2}, {0, 1}, {1}})
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ParallelSweep)
    ->ArgsProduct({{0, 1, 2}, {0, 1}, {0, 1, 2, 4}})
    ->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
