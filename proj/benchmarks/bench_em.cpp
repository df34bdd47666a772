#include <benchmark/benchmark.h>

#include <memory>

#include "jmls/em_estimator.hpp"

namespace {

using namespace jmls;

struct Workload {
  JmlsModel model;
  Dataset data;
};

const Workload& workload(std::size_t m) {
  static std::vector<std::unique_ptr<Workload>> cache(8);
  if (!cache[m]) {
    auto w = std::make_unique<Workload>();
    w->model = random_model(2, 1, 1, m, 42);
    w->data = simulate(w->model, InputSpec{}, 1000, 7);
    cache[m] = std::move(w);
  }
  return *cache[m];
}

EStepOptions budgets(std::size_t b, unsigned threads = 1) {
  EStepOptions o;
  o.filter_budget = o.bif_budget = o.smoother_budget = b;
  o.threads = threads;
  return o;
}

void BM_Filter(benchmark::State& state) {
  const Workload& w = workload(static_cast<std::size_t>(state.range(0)));
  const FilterOptions opts{static_cast<std::size_t>(state.range(1)), {}};
  for (auto _ : state) benchmark::DoNotOptimize(run_filter(w.model, w.data, opts).log_likelihood);
}
BENCHMARK(BM_Filter)->Args({2, 3})->Args({3, 3})->Args({3, 6})->Unit(benchmark::kMillisecond);

void BM_EStep(benchmark::State& state) {
  const Workload& w = workload(static_cast<std::size_t>(state.range(0)));
  const EStepOptions opts = budgets(3, static_cast<unsigned>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(e_step(w.model, w.data, opts).stats.c_m);
}
BENCHMARK(BM_EStep)->Args({3, 1})->Args({3, 4})->Unit(benchmark::kMillisecond);

void BM_MStep(benchmark::State& state) {
  const Workload& w = workload(3);
  const EStepResult e = e_step(w.model, w.data, budgets(3));
  for (auto _ : state) benchmark::DoNotOptimize(mstep(e.stats, e.smoothed_prior, w.model).model.T);
}
BENCHMARK(BM_MStep)->Unit(benchmark::kMicrosecond);

}  // namespace
