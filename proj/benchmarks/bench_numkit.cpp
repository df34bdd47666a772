#include <benchmark/benchmark.h>

#include <cmath>

#include "jmls/numkit.hpp"

namespace {

jmls::Matrix filled(jmls::Index rows, jmls::Index cols) {
  jmls::Matrix m(rows, cols);
  for (jmls::Index j = 0; j < cols; ++j)
    for (jmls::Index i = 0; i < rows; ++i) m(i, j) = std::sin(1.0 + static_cast<double>(i * cols + j));
  return m;
}

void BM_QlessQr(benchmark::State& state) {
  const jmls::Index n = state.range(0);
  const jmls::Matrix s = filled(2 * n, n);
  for (auto _ : state) benchmark::DoNotOptimize(jmls::qless_qr(s));
}
BENCHMARK(BM_QlessQr)->Arg(2)->Arg(4)->Arg(8)->Arg(16);

void BM_QrAccumulator(benchmark::State& state) {
  const jmls::Index n = state.range(0);
  const jmls::Matrix block = filled(n, n);
  for (auto _ : state) {
    jmls::QrAccumulator acc(n);
    for (int k = 0; k < 1000; ++k) acc.add(0.5, block);
    benchmark::DoNotOptimize(acc.finish());
  }
}
BENCHMARK(BM_QrAccumulator)->Arg(4)->Arg(8);

}  // namespace
