// Serial reference kernels against the OpenMP ones on m = 32, n = 3
// Jacobian ensembles of the size the experiments use.

#include <benchmark/benchmark.h>

#include "kalab/concentration.hpp"
#include "kalab/kernels.hpp"
#include "kalab/model.hpp"
#include "kalab/targets.hpp"

using namespace kalab;

namespace {

std::vector<Matrix> ensemble(std::size_t examples) {
  RngStream rng(7);
  const MlpModel model = kaiming_init(3, 32, rng);
  std::vector<Matrix> out;
  for (std::size_t e = 0; e < examples; ++e) {
    const double x[3] = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    out.push_back(model.inner_jacobian(x));
  }
  return out;
}

const std::vector<Matrix>& jacobians() {
  static const auto js = ensemble(1000);
  return js;
}

const std::vector<Matrix>& rotations() {
  static const auto rs = [] {
    RngStream rng(11);
    return make_rotations(32, 40, rng);
  }();
  return rs;
}

void BM_MinorsSerial(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(serial::minor_ensemble(jacobians(), k));
}

void BM_MinorsOmp(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(omp::minor_ensemble(jacobians(), k));
}

void BM_RotationsSerial(benchmark::State& state) {
  const std::span<const Matrix> js(jacobians().data(), 100);
  for (auto _ : state) benchmark::DoNotOptimize(serial::rotation_maxima(js, rotations(), 3));
}

void BM_RotationsOmp(benchmark::State& state) {
  const std::span<const Matrix> js(jacobians().data(), 100);
  for (auto _ : state) benchmark::DoNotOptimize(omp::rotation_maxima(js, rotations(), 3));
}

}  // namespace

BENCHMARK(BM_MinorsSerial)->DenseRange(1, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MinorsOmp)->DenseRange(1, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RotationsSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RotationsOmp)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
