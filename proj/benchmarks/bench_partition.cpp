#include <benchmark/benchmark.h>

#include "supkde/partition.hpp"

using namespace supkde;

static void BM_EnumerateAll(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(enumerate_all(d));
  }
}
BENCHMARK(BM_EnumerateAll)->Arg(4)->Arg(6)->Arg(8)->Arg(10);

static void BM_Diamond(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const auto family = enumerate_all(d);
  const auto& ps = family.members();
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& p = ps[i % ps.size()];
    const auto& q = ps[(i * 7 + 3) % ps.size()];
    benchmark::DoNotOptimize(diamond(p, q));
    ++i;
  }
}
BENCHMARK(BM_Diamond)->Arg(4)->Arg(6)->Arg(8);

static void BM_Refines(benchmark::State& state) {
  const auto family = enumerate_all(6);
  const auto& ps = family.members();
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& p = ps[i % ps.size()];
    const auto& q = ps[(i * 5 + 1) % ps.size()];
    benchmark::DoNotOptimize(refines(p, q));
    ++i;
  }
}
BENCHMARK(BM_Refines);
