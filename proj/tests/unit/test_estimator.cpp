#include <cmath>
#include <memory>
#include <set>
#include <vector>

#include "doctest.h"
#include "supkde/errors.hpp"
#include "supkde/estimator.hpp"
#include "supkde/rng.hpp"

using namespace supkde;

namespace {

Dataset uniform_dataset(std::size_t n, int d, Rng& rng, double lo = 0.0,
                        double hi = 1.0) {
  std::vector<double> data(n * static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      data[static_cast<std::size_t>(j) * n + i] = rng.uniform(lo, hi);
    }
  }
  return Dataset(n, d, std::move(data));
}

std::shared_ptr<const EvaluationGrid> box_grid(
    std::vector<double> lo, std::vector<double> hi,
    std::vector<std::size_t> nodes) {
  return std::make_shared<const EvaluationGrid>(std::move(lo), std::move(hi),
                                                std::move(nodes));
}

bool tables_identical(const BlockTable& a, const BlockTable& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("estimator") {

TEST_CASE("bandwidth vector basics") {
  CHECK_THROWS_AS(BandwidthVector({0.5, 0.0}), ArgumentError);
  CHECK_THROWS_AS(BandwidthVector({1.5}), ArgumentError);
  const BandwidthVector h({0.5, 0.25});
  CHECK(h.volume() == 0.125);
  CHECK(h.block_volume({0, 1}) == 0.125);
  CHECK(h.min_block_volume(Partition::trivial(2)) == 0.125);
  CHECK(h.min_block_volume(Partition::singletons(2)) == 0.25);
}

TEST_CASE("marginal at a duplicated point hits the plug-in value") {
  // Both observations at zero: the average equals the single-point value
  // (1 / 0.5) * K(0) = 3.0 at the origin for the order-1 kernel.
  const Dataset data(2, 1, {0.0, 0.0});
  const auto k = Kernel::polynomial(1);
  const auto grid = box_grid({-1.0}, {1.0}, {9});  // nodes at -1,-0.75,...,1
  const std::vector<double> h{0.5};
  const auto table = fit_marginal(data, k, {0}, h, grid);
  CHECK((*table)[4] == doctest::Approx(3.0).epsilon(1e-14));  // node 0.0
  // Nodes farther than h/2 from every sample are exactly zero.
  CHECK((*table)[0] == 0.0);
  CHECK((*table)[8] == 0.0);
}

TEST_CASE("fast marginal equals the brute-force oracle exactly") {
  Rng rng(42);
  const auto data = uniform_dataset(100, 1, rng);
  const auto k = Kernel::polynomial(1);
  const auto grid = box_grid({-0.6}, {1.6}, {31});
  for (double hv : {1.0, 0.5, 0.125}) {
    const std::vector<double> h{hv};
    const auto fast = fit_marginal(data, k, {0}, h, grid);
    const auto brute = fit_marginal_bruteforce(data, k, {0}, h, grid);
    CHECK(tables_identical(*fast, *brute));
  }
}

TEST_CASE("fast 2-d marginal equals brute force exactly") {
  Rng rng(43);
  const auto data = uniform_dataset(60, 2, rng);
  const auto k = Kernel::polynomial(3);
  const auto grid = box_grid({-0.6, -0.6}, {1.6, 1.6}, {21, 19});
  const std::vector<double> h{0.5, 0.25};
  const auto fast = fit_marginal(data, k, {0, 1}, h, grid);
  const auto brute = fit_marginal_bruteforce(data, k, {0, 1}, h, grid);
  CHECK(tables_identical(*fast, *brute));

  const auto fast_abs = fit_abs_marginal(data, k, {0, 1}, h, grid);
  const auto brute_abs = fit_abs_marginal_bruteforce(data, k, {0, 1}, h, grid);
  CHECK(tables_identical(*fast_abs, *brute_abs));
}

TEST_CASE("fast pair marginal equals brute force exactly") {
  Rng rng(44);
  const auto data = uniform_dataset(50, 2, rng);
  ConvolutionCache cache(Kernel::polynomial(1), 257);
  const auto grid = box_grid({-1.2, -1.2}, {2.2, 2.2}, {23, 23});
  const std::vector<std::shared_ptr<const ConvolutionProfile>> profiles{
      cache.get(0.5, 0.25), cache.get(1.0, 0.5)};
  const auto fast = fit_pair_marginal(data, {0, 1}, profiles, grid);
  const auto brute = fit_pair_marginal_bruteforce(data, {0, 1}, profiles, grid);
  CHECK(tables_identical(*fast, *brute));
}

TEST_CASE("pair marginal at a duplicated sample reads the profile") {
  const Dataset data(2, 1, {0.0, 0.0});
  ConvolutionCache cache(Kernel::polynomial(1), 257);
  const auto profile = cache.get(0.5, 0.5);
  const auto grid = box_grid({-1.0}, {1.0}, {17});
  const auto table = fit_pair_marginal(data, {0}, {profile}, grid);
  CHECK((*table)[8] == (*profile)(0.0));  // node at zero, X - x = 0
}

TEST_CASE("pair estimator symmetric in (h, eta)") {
  Rng rng(45);
  const auto data = uniform_dataset(40, 1, rng);
  const auto k = Kernel::polynomial(1);
  const auto grid = box_grid({-1.0}, {2.0}, {41});
  // Independently built profiles in both orders agree to quadrature
  // tolerance, so the fitted tables do as well.
  const auto p_he =
      std::make_shared<const ConvolutionProfile>(k, 0.5, 0.25, 513);
  const auto p_eh =
      std::make_shared<const ConvolutionProfile>(k, 0.25, 0.5, 513);
  const auto t1 = fit_pair_marginal(data, {0}, {p_he}, grid);
  const auto t2 = fit_pair_marginal(data, {0}, {p_eh}, grid);
  for (std::size_t i = 0; i < t1->size(); ++i) {
    CHECK((*t1)[i] == doctest::Approx((*t2)[i]).epsilon(1e-10));
  }
}

TEST_CASE("grid coverage is enforced") {
  Rng rng(46);
  const auto data = uniform_dataset(20, 1, rng);
  const auto k = Kernel::polynomial(1);
  const auto tight = box_grid({0.0}, {1.0}, {11});  // no room for support
  const std::vector<double> h{0.5};
  CHECK_THROWS_AS(fit_marginal(data, k, {0}, h, tight), ArgumentError);
}

TEST_CASE("product consistency and sup-norm diff against materialization") {
  Rng rng(47);
  const auto data = uniform_dataset(30, 2, rng);
  const auto k = Kernel::polynomial(1);
  const auto grid = box_grid({-0.7, -0.7}, {1.7, 1.7}, {11, 11});
  const std::vector<double> h{0.5, 0.5};

  const auto t01 = fit_marginal(data, k, {0, 1}, h, grid);
  const auto t0 = fit_marginal(data, k, {0}, std::vector<double>{0.5}, grid);
  const auto t1 = fit_marginal(data, k, {1}, std::vector<double>{0.5}, grid);

  const FittedEstimator joint(grid, {t01});
  const FittedEstimator product(grid, {t0, t1});

  // Product consistency: the estimator value at each node equals the
  // product of its block values.
  for (std::size_t a = 0; a < 11; ++a) {
    for (std::size_t b = 0; b < 11; ++b) {
      const std::size_t idx[2] = {a, b};
      CHECK(product.value(std::span<const std::size_t>(idx, 2)) ==
            (*t0)[a] * (*t1)[b]);
    }
  }

  // Lazy sup-norm diff equals the brute-force max over the materialized
  // tensors, exactly.
  const auto ja = joint.materialize();
  const auto jb = product.materialize();
  double expect = 0.0;
  for (std::size_t i = 0; i < ja.size(); ++i) {
    expect = std::max(expect, std::abs(ja[i] - jb[i]));
  }
  CHECK(sup_norm_diff(joint, product) == expect);
  CHECK(sup_norm_diff(joint, joint) == 0.0);

  const auto diff2 = sup_norm_diff2(joint, joint, product);
  CHECK(diff2.vs_first == 0.0);
  CHECK(diff2.vs_second == expect);
}

TEST_CASE("sup-norm diff of a constant shift is the constant") {
  const auto grid = box_grid({0.0}, {1.0}, {11});
  auto a = std::make_shared<BlockTable>(std::vector<int>{0}, grid);
  auto b = std::make_shared<BlockTable>(std::vector<int>{0}, grid);
  for (std::size_t i = 0; i < a->size(); ++i) {
    (*a)[i] = static_cast<double>(i);
    (*b)[i] = static_cast<double>(i) + 0.75;
  }
  const FittedEstimator ea(grid, {BlockTablePtr(a)});
  const FittedEstimator eb(grid, {BlockTablePtr(b)});
  CHECK(sup_norm_diff(ea, eb) == 0.75);
}

TEST_CASE("sup-norm diff rejects mismatched grids") {
  const auto g1 = box_grid({0.0}, {1.0}, {11});
  const auto g2 = box_grid({0.0}, {1.0}, {12});
  auto a = std::make_shared<BlockTable>(std::vector<int>{0}, g1);
  auto b = std::make_shared<BlockTable>(std::vector<int>{0}, g2);
  const FittedEstimator ea(g1, {BlockTablePtr(a)});
  const FittedEstimator eb(g2, {BlockTablePtr(b)});
  CHECK_THROWS_AS(sup_norm_diff(ea, eb), ArgumentError);
}

TEST_CASE("riemann mass of a fitted marginal is close to one") {
  Rng rng(48);
  const auto data = uniform_dataset(400, 1, rng);
  const auto k = Kernel::polynomial(1);
  const auto grid = box_grid({-0.7}, {1.7}, {241});
  const auto t =
      fit_marginal(data, k, {0}, std::vector<double>{0.25}, grid);
  CHECK(t->riemann_mass() > 0.98);
  CHECK(t->riemann_mass() < 1.02);
}

TEST_CASE("translation equivariance on dyadic data") {
  // Dyadic samples, dyadic shift: every float operation is exact, so the
  // shifted fit is bit-identical.
  const double shift = 0.5;
  std::vector<double> base{0.0, 0.125, 0.25, 0.375, 0.5, 0.625};
  std::vector<double> moved(base);
  for (auto& v : moved) v += shift;
  const Dataset d1(base.size(), 1, base);
  const Dataset d2(moved.size(), 1, moved);
  const auto k = Kernel::polynomial(1);
  const auto g1 = box_grid({-1.0}, {2.0}, {97});
  const auto g2 = box_grid({-0.5}, {2.5}, {97});
  const std::vector<double> h{0.5};
  const auto t1 = fit_marginal(d1, k, {0}, h, g1);
  const auto t2 = fit_marginal(d2, k, {0}, h, g2);
  CHECK(tables_identical(*t1, *t2));
}

TEST_CASE("empirical f_n matches the triple-loop oracle") {
  Rng rng(49);
  std::vector<double> data(100);
  for (auto& v : data) v = rng.normal();
  const Dataset d(50, 2, std::move(data));
  const auto k = Kernel::polynomial(1);
  const auto grid = std::make_shared<const EvaluationGrid>(
      EvaluationGrid::cover(d, 1.0, 0.125));
  const std::vector<BandwidthVector> hs{BandwidthVector({1.0, 1.0}),
                                        BandwidthVector({0.5, 1.0}),
                                        BandwidthVector({0.5, 0.25})};
  const auto fast = empirical_f_n(d, k, hs, grid);

  // Oracle: brute-force over every subset, restriction and node.
  double f_n = 0.0;
  const std::vector<std::vector<int>> subsets{{0}, {1}, {0, 1}};
  for (const auto& block : subsets) {
    std::set<std::vector<double>> rs;
    for (const auto& h : hs) rs.insert(h.restrict_to(block));
    for (const auto& hb : rs) {
      const auto t = fit_abs_marginal_bruteforce(d, k, block, hb, grid);
      f_n = std::max(f_n, t->max_value());
    }
  }
  CHECK(fast.f_n == f_n);
  CHECK(fast.f_bar_n == std::max(1.0, 2.0 * f_n));
  CHECK(fast.f_bar_n >= 1.0);

  // Nonnegative kernel: |K| = K, so f_n dominates every plain marginal.
  const auto plain =
      fit_marginal(d, k, {0, 1}, std::vector<double>{0.5, 0.25}, grid);
  CHECK(fast.f_n >= plain->max_value());
}

TEST_CASE("A_hat arithmetic") {
  const BandwidthVector h({0.5, 0.25});
  CHECK(A_hat(1.0, h, Partition::trivial(2), 1000) ==
        doctest::Approx(std::sqrt(std::log(1000.0) / 125.0)).epsilon(1e-14));
  // Splitting into singletons raises the min block volume, so A^ drops.
  CHECK(A_hat(1.0, h, Partition::singletons(2), 1000) <
        A_hat(1.0, h, Partition::trivial(2), 1000));
  CHECK_THROWS_AS(A_hat(0.5, h, Partition::trivial(2), 1000), ArgumentError);
  CHECK_THROWS_AS(A_hat(1.0, h, Partition::trivial(2), 2), ArgumentError);
}

TEST_CASE("tabulate and sup error") {
  const auto grid = box_grid({0.0, 0.0}, {1.0, 1.0}, {5, 5});
  const auto truth = tabulate_on_grid(*grid, [](std::span<const double> x) {
    return x[0] + 10.0 * x[1];
  });
  CHECK(truth.size() == 25);
  CHECK(truth[0] == 0.0);
  CHECK(truth[1] == 2.5);        // row-major: last axis fastest
  CHECK(truth[5] == 0.25);
  CHECK(truth[24] == 11.0);

  auto zero = std::make_shared<BlockTable>(std::vector<int>{0}, grid);
  auto one = std::make_shared<BlockTable>(std::vector<int>{1}, grid);
  for (std::size_t i = 0; i < 5; ++i) {
    (*zero)[i] = 1.0;
    (*one)[i] = 0.0;
  }
  const FittedEstimator est(grid, {BlockTablePtr(zero), BlockTablePtr(one)});
  CHECK(sup_norm_error(est, truth) == 11.0);
}

TEST_CASE("table cache returns the first entry") {
  TableCache cache;
  const auto grid = box_grid({0.0}, {1.0}, {3});
  int builds = 0;
  const TableCache::Key key{{0}, {0.5}, {}};
  auto build = [&]() {
    ++builds;
    return std::make_shared<const BlockTable>(std::vector<int>{0}, grid);
  };
  const auto a = cache.get_or_build(key, build);
  const auto b = cache.get_or_build(key, build);
  CHECK(a.get() == b.get());
  CHECK(builds == 1);
  CHECK(cache.size() == 1);
}

}  // TEST_SUITE
