#include <benchmark/benchmark.h>

#include "supkde/estimator.hpp"
#include "supkde/rng.hpp"

using namespace supkde;

namespace {

Dataset make_data(std::size_t n, int d) {
  Rng rng(7);
  std::vector<double> data(n * static_cast<std::size_t>(d));
  for (auto& v : data) v = rng.normal();
  return Dataset(n, d, std::move(data));
}

std::shared_ptr<const EvaluationGrid> make_grid(const Dataset& data,
                                                double res) {
  return std::make_shared<const EvaluationGrid>(
      EvaluationGrid::cover(data, 1.0, res));
}

}  // namespace

static void BM_FitMarginalScatter(benchmark::State& state) {
  const auto data = make_data(static_cast<std::size_t>(state.range(0)), 2);
  const auto grid = make_grid(data, 0.05);
  const auto k = Kernel::polynomial(1);
  const std::vector<double> h{0.5, 0.25};
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_marginal(data, k, {0, 1}, h, grid));
  }
}
BENCHMARK(BM_FitMarginalScatter)->Arg(100)->Arg(1000);

static void BM_FitMarginalBruteforce(benchmark::State& state) {
  const auto data = make_data(static_cast<std::size_t>(state.range(0)), 2);
  const auto grid = make_grid(data, 0.05);
  const auto k = Kernel::polynomial(1);
  const std::vector<double> h{0.5, 0.25};
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        fit_marginal_bruteforce(data, k, {0, 1}, h, grid));
  }
}
BENCHMARK(BM_FitMarginalBruteforce)->Arg(100);

static void BM_SupNormDiff(benchmark::State& state) {
  const auto data = make_data(500, 2);
  const auto grid = make_grid(data, 0.05);
  const auto k = Kernel::polynomial(1);
  const auto joint =
      fit_marginal(data, k, {0, 1}, std::vector<double>{0.5, 0.5}, grid);
  const auto m0 =
      fit_marginal(data, k, {0}, std::vector<double>{0.5}, grid);
  const auto m1 =
      fit_marginal(data, k, {1}, std::vector<double>{0.5}, grid);
  const FittedEstimator a(grid, {joint});
  const FittedEstimator b(grid, {m0, m1});
  for (auto _ : state) {
    benchmark::DoNotOptimize(sup_norm_diff(a, b));
  }
}
BENCHMARK(BM_SupNormDiff);

static void BM_EmpiricalFn(benchmark::State& state) {
  const auto data = make_data(500, 2);
  const auto grid = make_grid(data, 0.1);
  const auto k = Kernel::polynomial(1);
  std::vector<BandwidthVector> hs;
  for (int k1 = 0; k1 <= 3; ++k1) {
    for (int k2 = 0; k2 <= 3; ++k2) {
      hs.push_back(BandwidthVector(
          {std::ldexp(1.0, -k1), std::ldexp(1.0, -k2)}));
    }
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(empirical_f_n(data, k, hs, grid));
  }
}
BENCHMARK(BM_EmpiricalFn);
