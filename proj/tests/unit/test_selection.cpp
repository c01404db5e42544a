#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "doctest.h"
#include "supkde/constants.hpp"
#include "supkde/errors.hpp"
#include "supkde/selection.hpp"
#include "supkde/rng.hpp"

using namespace supkde;
namespace C = supkde::constants;

namespace {

Dataset gaussian_dataset(std::size_t n, int d, Rng& rng) {
  std::vector<double> data(n * static_cast<std::size_t>(d));
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = 0.4 * rng.normal();
  return Dataset(n, d, std::move(data));
}

C::Context calibrated_ctx(int d, double kappa, double floor = 1.0) {
  C::Context ctx;
  ctx.d = d;
  ctx.q = 1.0;
  ctx.mode = C::Mode::calibrated;
  ctx.kappa = kappa;
  ctx.candidate_floor = floor;
  return ctx;
}

// Reference pipeline: no caching, brute-force fits, materialized sup
// norms, plain double loops. Everything the engine does, re-done the slow
// way with the same scalar formulas.
SelectionResult reference_select(const Dataset& data, const Kernel& kernel,
                                 const C::Context& ctx,
                                 const PartitionFamily& family,
                                 double grid_resolution, int profile_nodes) {
  const double a_star = C::lambda_and_threshold(ctx, 1.0).a_star;
  const auto cands =
      build_candidates(data.size(), data.dim(), a_star, family);
  double max_h = 0.0;
  for (const auto& b : cands.bandwidths) {
    max_h = std::max(max_h, b.max_component());
  }
  const auto grid = std::make_shared<const EvaluationGrid>(
      EvaluationGrid::cover(data, max_h, grid_resolution));

  // f_n by brute force over subsets x restrictions x nodes.
  double f_n = 0.0;
  const int d = data.dim();
  for (std::uint32_t mask = 1; mask < (1u << d); ++mask) {
    std::vector<int> block;
    for (int j = 0; j < d; ++j) {
      if (mask & (1u << j)) block.push_back(j);
    }
    std::set<std::vector<double>> rs;
    for (const auto& h : cands.bandwidths) rs.insert(h.restrict_to(block));
    for (const auto& hb : rs) {
      f_n = std::max(
          f_n,
          fit_abs_marginal_bruteforce(data, kernel, block, hb, grid)
              ->max_value());
    }
  }
  const double f_bar = std::max(1.0, 2.0 * f_n);
  const double lambda = C::lambda_and_threshold(ctx, f_bar).lambda;

  const std::size_t m = cands.count();
  auto plain_of = [&](std::size_t c) {
    const auto& h = cands.bandwidth(c);
    const auto& p = cands.partition(c);
    std::vector<BlockTablePtr> tables;
    for (const auto& block : p.blocks()) {
      tables.push_back(fit_marginal_bruteforce(data, kernel, block,
                                               h.restrict_to(block), grid));
    }
    return FittedEstimator(grid, std::move(tables));
  };
  auto pair_of = [&](std::size_t i, std::size_t j) {
    const auto& hi = cands.bandwidth(i);
    const auto& hj = cands.bandwidth(j);
    const Partition meet = diamond(cands.partition(i), cands.partition(j));
    std::vector<BlockTablePtr> tables;
    for (const auto& block : meet.blocks()) {
      std::vector<std::shared_ptr<const ConvolutionProfile>> profiles;
      for (int ax : block) {
        const double a = hi.h[static_cast<std::size_t>(ax)];
        const double b = hj.h[static_cast<std::size_t>(ax)];
        profiles.push_back(std::make_shared<const ConvolutionProfile>(
            kernel, std::min(a, b), std::max(a, b), profile_nodes));
      }
      tables.push_back(
          fit_pair_marginal_bruteforce(data, block, profiles, grid));
    }
    return FittedEstimator(grid, std::move(tables));
  };

  std::vector<double> a_hat_all(m);
  for (std::size_t c = 0; c < m; ++c) {
    a_hat_all[c] =
        A_hat(f_bar, cands.bandwidth(c), cands.partition(c), data.size());
  }

  SelectionResult res;
  res.table.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    double dh = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const auto pair_est = pair_of(i, j);
      const auto mat_pair = pair_est.materialize();
      const auto mat_j = plain_of(j).materialize();
      double sup = 0.0;
      for (std::size_t t = 0; t < mat_pair.size(); ++t) {
        sup = std::max(sup, std::abs(mat_pair[t] - mat_j[t]));
      }
      dh = std::max(dh, std::max(0.0, sup - lambda * a_hat_all[j]));
    }
    auto& e = res.table[i];
    e.h_index = cands.h_index(i);
    e.p_index = cands.p_index(i);
    e.delta_hat = dh;
    e.a_hat = a_hat_all[i];
    e.penalty = lambda * a_hat_all[i];
    e.total = dh + e.penalty;
    e.volume = cands.bandwidth(i).min_block_volume(cands.partition(i));
  }
  res.selected = argmin_candidate(res.table, cands);
  res.lambda = lambda;
  res.f_n = f_n;
  res.f_bar_n = f_bar;
  res.a_star = a_star;
  res.mode = ctx.mode;
  res.h_hat = cands.bandwidth(res.selected).h;
  res.p_hat = cands.partition(res.selected).to_json();
  return res;
}

}  // namespace

TEST_SUITE("selection") {

TEST_CASE("candidate grid arithmetic at n = 20") {
  // n = 20, a* = 1, d = 1: admissible iff 20 * 2^-k >= ln 20, so k <= 2.
  const auto cands =
      build_candidates(20, 1, 1.0, PartitionFamily(1, {}));
  REQUIRE(cands.bandwidths.size() == 3);
  CHECK(cands.bandwidths[0].h == std::vector<double>{1.0});
  CHECK(cands.bandwidths[1].h == std::vector<double>{0.5});
  CHECK(cands.bandwidths[2].h == std::vector<double>{0.25});
}

TEST_CASE("candidate grid matches an exhaustive filter at d = 2") {
  const std::size_t n = 200;
  const double a_star = 1.0;
  const auto cands =
      build_candidates(n, 2, a_star, PartitionFamily(2, {}));
  std::set<std::vector<double>> got;
  for (const auto& h : cands.bandwidths) got.insert(h.h);
  std::set<std::vector<double>> expect;
  for (int k1 = 0; k1 <= 20; ++k1) {
    for (int k2 = 0; k2 <= 20; ++k2) {
      const double v = std::ldexp(1.0, -k1) * std::ldexp(1.0, -k2);
      if (static_cast<double>(n) * v >= std::log(static_cast<double>(n))) {
        expect.insert({std::ldexp(1.0, -k1), std::ldexp(1.0, -k2)});
      }
    }
  }
  CHECK(got == expect);
}

TEST_CASE("halving a_star can only shrink the candidate set") {
  const auto family = PartitionFamily(2, {});
  const auto big = build_candidates(500, 2, 1.0, family);
  const auto small = build_candidates(500, 2, 0.5, family);
  CHECK(small.bandwidths.size() <= big.bandwidths.size());
  std::set<std::vector<double>> bigset;
  for (const auto& h : big.bandwidths) bigset.insert(h.h);
  for (const auto& h : small.bandwidths) CHECK(bigset.count(h.h) == 1);
}

TEST_CASE("empty candidate set reports the calibrated-mode advice") {
  CHECK_THROWS_AS(build_candidates(10, 1, 1e-20, PartitionFamily(1, {})),
                  EmptyCandidateError);
}

TEST_CASE("argmin tie-break ladder") {
  const CandidateSet cands{
      {BandwidthVector({1.0, 0.5}), BandwidthVector({0.5, 1.0})},
      PartitionFamily(2, {Partition::singletons(2)}),  // + trivial
      1.0};
  const std::size_t m = cands.count();
  REQUIRE(m == 4);
  std::vector<CriterionEntry> table(m);
  for (std::size_t i = 0; i < m; ++i) {
    table[i].h_index = cands.h_index(i);
    table[i].p_index = cands.p_index(i);
    table[i].total = 1.0;
    table[i].volume =
        cands.bandwidth(i).min_block_volume(cands.partition(i));
  }
  // All totals tie: largest V(h,P) wins. Volumes: trivial blocks give 0.5,
  // singleton partitions give min(1.0, 0.5) = 0.5 -- all equal here, so
  // fewest blocks (the trivial partition) wins next, then lexicographically
  // larger h.
  const std::size_t best = argmin_candidate(table, cands);
  CHECK(cands.partition(best) == Partition::trivial(2));
  CHECK(cands.bandwidth(best).h == std::vector<double>{1.0, 0.5});

  // Strictly smaller total dominates everything else.
  table[2].total = 0.5;
  CHECK(argmin_candidate(table, cands) == 2);

  // With equal totals, a larger volume wins over block count.
  table[2].total = 1.0;
  table[3].volume = 0.9;
  CHECK(argmin_candidate(table, cands) == 3);
}

TEST_CASE("huge lambda zeroes every delta_hat") {
  Rng rng(1001);
  const auto data = gaussian_dataset(40, 1, rng);
  const auto kernel = Kernel::polynomial(1);
  SelectionOptions opt;
  opt.grid_resolution = 0.05;
  opt.profile_nodes = 257;
  SelectionEngine engine(data, kernel, calibrated_ctx(1, 1e12),
                         PartitionFamily(1, {}), opt);
  const auto& res = engine.run();
  for (const auto& e : res.table) {
    CHECK(e.delta_hat == 0.0);
    CHECK(e.penalty > 0.0);
  }
  // Criterion table is complete: |H| x |P| entries, argmin consistent.
  CHECK(res.table.size() == engine.candidates().count());
  double best = res.table[res.selected].total;
  for (const auto& e : res.table) CHECK(best <= e.total);
}

TEST_CASE("toy pipeline equals the uncached reference implementation") {
  Rng rng(2024);
  const auto data = gaussian_dataset(20, 1, rng);
  const auto kernel = Kernel::polynomial(1);
  const auto ctx = calibrated_ctx(1, 0.5);
  const PartitionFamily family(1, {});

  SelectionOptions opt;
  opt.grid_resolution = 0.1;
  opt.profile_nodes = 129;
  SelectionEngine engine(data, kernel, ctx, family, opt);
  const auto& fast = engine.run();
  const auto ref =
      reference_select(data, kernel, ctx, family, 0.1, 129);

  REQUIRE(fast.table.size() == ref.table.size());
  CHECK(fast.f_n == ref.f_n);
  CHECK(fast.f_bar_n == ref.f_bar_n);
  CHECK(fast.lambda == ref.lambda);
  for (std::size_t i = 0; i < ref.table.size(); ++i) {
    CAPTURE(i);
    CHECK(fast.table[i].delta_hat == ref.table[i].delta_hat);
    CHECK(fast.table[i].a_hat == ref.table[i].a_hat);
    CHECK(fast.table[i].penalty == ref.table[i].penalty);
    CHECK(fast.table[i].total == ref.table[i].total);
  }
  CHECK(fast.selected == ref.selected);
  CHECK(fast.h_hat == ref.h_hat);
}

TEST_CASE("toy 2-d pipeline with partitions equals the reference") {
  Rng rng(77);
  const auto data = gaussian_dataset(30, 2, rng);
  const auto kernel = Kernel::polynomial(1);
  const auto ctx = calibrated_ctx(2, 0.5, 0.25);
  const auto family = enumerate_all(2);

  SelectionOptions opt;
  opt.grid_resolution = 0.2;
  opt.profile_nodes = 129;
  SelectionEngine engine(data, kernel, ctx, family, opt);
  const auto& fast = engine.run();
  const auto ref = reference_select(data, kernel, ctx, family, 0.2, 129);

  REQUIRE(fast.table.size() == ref.table.size());
  for (std::size_t i = 0; i < ref.table.size(); ++i) {
    CAPTURE(i);
    CHECK(fast.table[i].delta_hat == ref.table[i].delta_hat);
    CHECK(fast.table[i].total == ref.table[i].total);
  }
  CHECK(fast.selected == ref.selected);
}

TEST_CASE("selection is deterministic across thread counts") {
  Rng rng(31);
  const auto data = gaussian_dataset(50, 2, rng);
  const auto kernel = Kernel::polynomial(1);
  const auto ctx = calibrated_ctx(2, 0.5, 0.5);
  const auto family = enumerate_all(2);
  SelectionOptions opt;
  opt.grid_resolution = 0.2;
  opt.profile_nodes = 129;

  nlohmann::json dumps[3];
  int ti = 0;
  for (int threads : {1, 2, 8}) {
    SelectionOptions o = opt;
    o.threads = threads;
    SelectionEngine engine(data, kernel, ctx, family, o);
    const auto& res = engine.run();
    dumps[ti++] = res.to_json(engine.candidates(), *engine.grid());
  }
  CHECK(dumps[0].dump() == dumps[1].dump());
  CHECK(dumps[0].dump() == dumps[2].dump());
}

TEST_CASE("eta budget only restricts the inner sup") {
  Rng rng(99);
  const auto data = gaussian_dataset(30, 1, rng);
  const auto kernel = Kernel::polynomial(1);
  const auto ctx = calibrated_ctx(1, 0.5);
  SelectionOptions full_opt;
  full_opt.grid_resolution = 0.1;
  full_opt.profile_nodes = 129;
  SelectionOptions budget_opt = full_opt;
  budget_opt.eta_budget = 2;

  SelectionEngine full(data, kernel, ctx, PartitionFamily(1, {}), full_opt);
  SelectionEngine budget(data, kernel, ctx, PartitionFamily(1, {}),
                         budget_opt);
  const auto& rf = full.run();
  const auto& rb = budget.run();
  REQUIRE(rf.table.size() == rb.table.size());
  for (std::size_t i = 0; i < rf.table.size(); ++i) {
    // Suprema over a subset can only be smaller.
    CHECK(rb.table[i].delta_hat <= rf.table[i].delta_hat);
    CHECK(rb.table[i].penalty == rf.table[i].penalty);
  }
}

TEST_CASE("family growth lowers the criterion on the pinned fixture") {
  // Not a theorem in general (the inner sup also grows), but holds on
  // independent-components data where structure genuinely helps; pinned
  // seed makes this a regression check.
  Rng rng(314);
  std::vector<double> data(2 * 60);
  for (auto& v : data) v = 0.4 * rng.normal();
  const Dataset d(60, 2, std::move(data));
  const auto kernel = Kernel::polynomial(1);
  const auto ctx = calibrated_ctx(2, 0.5, 0.5);
  SelectionOptions opt;
  opt.grid_resolution = 0.1;
  opt.profile_nodes = 129;

  SelectionEngine small(d, kernel, ctx, PartitionFamily(2, {}), opt);
  SelectionEngine large(d, kernel, ctx, enumerate_all(2), opt);
  const double min_small = small.run().table[small.run().selected].total;
  const double min_large = large.run().table[large.run().selected].total;
  CHECK(min_large <= min_small);
}

TEST_CASE("result json carries the audit fields") {
  Rng rng(5);
  const auto data = gaussian_dataset(25, 1, rng);
  const auto kernel = Kernel::polynomial(1);
  SelectionOptions opt;
  opt.grid_resolution = 0.1;
  opt.profile_nodes = 129;
  SelectionEngine engine(data, kernel, calibrated_ctx(1, 0.5),
                         PartitionFamily(1, {}), opt);
  const auto& res = engine.run();
  const auto j = res.to_json(engine.candidates(), *engine.grid());
  CHECK(j.contains("criterion_table"));
  CHECK(j.at("criterion_table").size() == res.table.size());
  CHECK(j.at("mode") == "calibrated");
  CHECK(j.contains("tie_break"));
  CHECK(j.at("selected").contains("partition"));
}

}  // TEST_SUITE
