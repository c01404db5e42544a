#include <benchmark/benchmark.h>

#include "supkde/rng.hpp"
#include "supkde/selection.hpp"
#include "supkde/synthetic.hpp"

using namespace supkde;

static void BM_SelectToy(benchmark::State& state) {
  const auto f = SyntheticDensity::product_gaussian({1.0, 1.0});
  Rng rng(3);
  const auto data = f.sample_dataset(static_cast<std::size_t>(state.range(0)),
                                     rng);
  const auto kernel = Kernel::polynomial(1);
  constants::Context ctx;
  ctx.d = 2;
  ctx.mode = constants::Mode::calibrated;
  ctx.kappa = 0.5;
  SelectionOptions opt;
  opt.grid_resolution = 0.1;
  opt.profile_nodes = 257;
  opt.threads = 1;
  const auto family = enumerate_all(2);
  for (auto _ : state) {
    SelectionEngine engine(data, kernel, ctx, family, opt);
    benchmark::DoNotOptimize(engine.run());
  }
}
BENCHMARK(BM_SelectToy)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);
