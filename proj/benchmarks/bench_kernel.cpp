#include <benchmark/benchmark.h>

#include "supkde/kernel.hpp"

using namespace supkde;

static void BM_PolynomialBuild(benchmark::State& state) {
  const int order = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(Kernel::polynomial(order));
  }
}
BENCHMARK(BM_PolynomialBuild)->Arg(1)->Arg(5)->Arg(9);

static void BM_KernelEval(benchmark::State& state) {
  const auto k = Kernel::polynomial(static_cast<int>(state.range(0)));
  double t = -0.5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(k(t));
    t += 1e-4;
    if (t > 0.5) t = -0.5;
  }
}
BENCHMARK(BM_KernelEval)->Arg(1)->Arg(5);

static void BM_ConvolutionProfileBuild(benchmark::State& state) {
  const auto k = Kernel::polynomial(1);
  const int nodes = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(ConvolutionProfile(k, 0.5, 0.25, nodes));
  }
}
BENCHMARK(BM_ConvolutionProfileBuild)->Arg(257)->Arg(1025)->Arg(4097);

static void BM_ConvolutionEval(benchmark::State& state) {
  const auto k = Kernel::polynomial(1);
  const ConvolutionProfile prof(k, 0.5, 0.25, 2049);
  double z = -0.374;
  for (auto _ : state) {
    benchmark::DoNotOptimize(prof(z));
    z += 1e-4;
    if (z > 0.374) z = -0.374;
  }
}
BENCHMARK(BM_ConvolutionEval);
