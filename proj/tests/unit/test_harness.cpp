#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "supkde/errors.hpp"
#include "supkde/harness.hpp"

using namespace supkde;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

PipelineConfig toy_config(int d, double kappa, double grid_res,
                          PartitionFamily family) {
  PipelineConfig cfg{Kernel::polynomial(1), constants::Context{}, family,
                     SelectionOptions{}};
  cfg.ctx.d = d;
  cfg.ctx.q = 1.0;
  cfg.ctx.mode = constants::Mode::calibrated;
  cfg.ctx.kappa = kappa;
  cfg.ctx.candidate_floor = 1.0;
  cfg.selection.grid_resolution = grid_res;
  cfg.selection.profile_nodes = 129;
  return cfg;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("upsilon plug-in values") {
  SmoothnessSpec spec{{1.0, 1.0}, {kInf, kInf}, {1.0, 1.0},
                      Partition::singletons(2)};
  CHECK(upsilon(spec) == doctest::Approx(1.0).epsilon(1e-14));
  spec.partition = Partition::trivial(2);
  CHECK(upsilon(spec) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(rate_exponent(1.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(rate_exponent(0.5) == doctest::Approx(0.25).epsilon(1e-14));

  // Finite p pulls the index down.
  SmoothnessSpec finite{{2.0}, {2.0}, {1.0}, Partition::trivial(1)};
  CHECK(upsilon(finite) == doctest::Approx((1.0 - 0.25) / 0.5).epsilon(1e-14));
  SmoothnessSpec bad{{-1.0}, {kInf}, {1.0}, Partition::trivial(1)};
  CHECK_THROWS_AS(upsilon(bad), ArgumentError);
}

TEST_CASE("second-order bias scaling of the order-1 kernel") {
  const auto f = SyntheticDensity::product_gaussian({1.0});
  const auto k = Kernel::polynomial(1);
  BiasOptions opt;
  opt.probe_nodes = 161;
  opt.tol = 1e-9;
  opt.box = {{-4.0}, {4.0}};
  const double b_02 = true_bias(f, k, {0}, std::vector<double>{0.2}, opt);
  const double b_01 = true_bias(f, k, {0}, std::vector<double>{0.1}, opt);
  const double b_005 = true_bias(f, k, {0}, std::vector<double>{0.05}, opt);
  // b_h / h^2 stabilizes as h -> 0 for a second-order kernel.
  const double r1 = b_02 / 0.04, r2 = b_01 / 0.01, r3 = b_005 / 0.0025;
  CHECK(std::abs(r2 - r3) / r3 < 0.10);
  CHECK(std::abs(r1 - r3) / r3 < 0.25);
  // Against the analytic leading constant |f''(0)|/2 * int t^2 K:
  // 0.3989 * 0.05 / 2 = 0.009974 per h^2.
  CHECK(r3 == doctest::Approx(0.00997).epsilon(0.05));
}

TEST_CASE("higher-order kernel shrinks the bias") {
  const auto f = SyntheticDensity::product_gaussian({1.0});
  BiasOptions opt;
  opt.probe_nodes = 81;
  opt.tol = 1e-9;
  opt.box = {{-4.0}, {4.0}};
  const std::vector<double> h{0.25};
  const double b1 = true_bias(f, Kernel::polynomial(1), {0}, h, opt);
  const double b3 = true_bias(f, Kernel::polynomial(3), {0}, h, opt);
  CHECK(b3 < b1);
}

TEST_CASE("bias vanishes where the marginal is flat") {
  // A very wide gaussian is locally constant at the scale of a tiny
  // bandwidth; the integrand nearly cancels.
  const auto f = SyntheticDensity::product_gaussian({50.0});
  const auto k = Kernel::polynomial(1);
  BiasOptions opt;
  opt.probe_nodes = 21;
  opt.tol = 1e-10;
  opt.box = {{-1.0}, {1.0}};
  const double b = true_bias(f, k, {0}, std::vector<double>{0.1}, opt);
  CHECK(b <= 1e-7);
}

TEST_CASE("oracle risk minimizes over the factorizing candidates") {
  const auto f = SyntheticDensity::product_gaussian({1.0, 1.0});
  const auto k = Kernel::polynomial(1);
  auto cands = build_candidates(200, 2, 0.4, enumerate_all(2));
  REQUIRE(cands.bandwidths.size() >= 3);
  BiasOptions opt;
  opt.probe_nodes = 41;
  opt.tol = 1e-7;
  opt.box = {{-3.0}, {3.0}};  // per-block box reused for 1-d blocks
  // For product densities every partition factorizes, so P(f) is the full
  // family; check the exhaustive infimum property.
  BiasOptions opt2 = opt;
  opt2.box.reset();  // use the density's own box per block
  const auto res = oracle_risk(f, k, cands, 200, opt2);
  const double log_n = std::log(200.0);
  double expect = std::numeric_limits<double>::infinity();
  std::size_t expect_h = 0, expect_p = 0;
  for (std::size_t hi = 0; hi < cands.bandwidths.size(); ++hi) {
    for (std::size_t pi = 0; pi < cands.family.size(); ++pi) {
      const auto& h = cands.bandwidths[hi];
      const auto& p = cands.family.members()[pi];
      double B = 0.0;
      for (const auto& pprime : cands.family.members()) {
        const auto meet = diamond(p, pprime);
        for (const auto& block : meet.blocks()) {
          B = std::max(B, true_bias(f, k, block, h.restrict_to(block), opt2));
        }
      }
      const double total =
          B + std::sqrt(log_n / (200.0 * h.min_block_volume(p)));
      if (total < expect) {
        expect = total;
        expect_h = hi;
        expect_p = pi;
      }
    }
  }
  CHECK(res.value == doctest::Approx(expect).epsilon(1e-12));
  CHECK(res.h_index == expect_h);
  CHECK(res.p_index == expect_p);
  CHECK(res.value <= res.bias_part + res.stoch_part + 1e-15);
}

TEST_CASE("oracle risk respects the factorization structure") {
  // Correlated gaussian: only the trivial partition factorizes.
  SyntheticDensity::GaussianBlockSpec spec;
  spec.axes = {0, 1};
  spec.cov = {1.0, 0.5, 0.5, 1.0};
  const auto f = SyntheticDensity::custom_product(2, {spec});
  const auto cands = build_candidates(100, 2, 0.1, enumerate_all(2));
  BiasOptions opt;
  opt.probe_nodes = 21;
  opt.tol = 1e-6;
  const auto res = oracle_risk(f, Kernel::polynomial(1), cands, 100, opt);
  CHECK(cands.family.members()[res.p_index] == Partition::trivial(2));
}

TEST_CASE("ols on an exact power law recovers the slope") {
  RateFit fit;
  for (std::size_t n : {250, 500, 1000, 2000, 4000}) {
    RiskEstimate r;
    const double nn = static_cast<double>(n);
    r.risk = 3.0 * std::pow(nn / std::log(nn), -1.0 / 3.0);
    fit.points.push_back(RatePoint{n, r});
  }
  fit_log_rate(fit);
  CHECK(fit.slope == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
  for (double r : fit.residuals) CHECK(std::abs(r) <= 1e-12);
}

TEST_CASE("replicates are deterministic and thread-invariant") {
  const auto f = SyntheticDensity::product_gaussian({1.0});
  const auto cfg = toy_config(1, 0.5, 0.1, PartitionFamily(1, {}));
  const auto a = run_replicates(f, cfg, 40, 4, 1234, 1);
  const auto b = run_replicates(f, cfg, 40, 4, 1234, 3);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].sup_error_selected == b[i].sup_error_selected);
    CHECK(a[i].sup_error_best == b[i].sup_error_best);
    CHECK(a[i].criterion == b[i].criterion);
    CHECK(a[i].h_hat == b[i].h_hat);
    CHECK(a[i].p_hat == b[i].p_hat);
    CHECK(a[i].ratio >= 1.0 - 1e-15);  // selected error >= best error
  }
}

TEST_CASE("risk aggregation and the q exponent") {
  std::vector<ReplicateRecord> recs(4);
  recs[0].sup_error_selected = 1.0;
  recs[1].sup_error_selected = 2.0;
  recs[2].sup_error_selected = 3.0;
  recs[3].sup_error_selected = 4.0;
  const auto q1 = aggregate_risk(recs, 1.0);
  CHECK(q1.risk == doctest::Approx(2.5).epsilon(1e-14));
  const auto q2 = aggregate_risk(recs, 2.0);
  CHECK(q2.risk == doctest::Approx(std::sqrt(7.5)).epsilon(1e-14));
  CHECK(q2.risk > q1.risk);
  CHECK_THROWS_AS(aggregate_risk(recs, 0.5), ArgumentError);
}

TEST_CASE("mc risk falls with n on a toy fixture") {
  const auto f = SyntheticDensity::product_gaussian({1.0});
  const auto cfg = toy_config(1, 0.5, 0.05, PartitionFamily(1, {}));
  const auto small = mc_risk(f, cfg, 60, 8, 1.0, 42);
  const auto large = mc_risk(f, cfg, 600, 8, 1.0, 42);
  CHECK(large.risk < small.risk);
  CHECK_THROWS_AS(mc_risk(f, cfg, 60, 4, 1.0, 42), ArgumentError);
}

TEST_CASE("structure recovery is deterministic at one replicate") {
  SyntheticDensity::GaussianBlockSpec spec;
  spec.axes = {0, 1};
  spec.cov = {1.0, 0.8, 0.8, 1.0};
  const auto f = SyntheticDensity::custom_product(2, {spec});
  const auto cfg = toy_config(2, 0.5, 0.2, enumerate_all(2));
  const auto hist1 = structure_recovery(f, cfg, 80, 1, 7);
  const auto hist2 = structure_recovery(f, cfg, 80, 1, 7);
  REQUIRE(hist1.size() == 1);
  CHECK(hist1 == hist2);
}

TEST_CASE("rate experiment input validation") {
  const auto f = SyntheticDensity::product_gaussian({1.0});
  const auto cfg = toy_config(1, 0.5, 0.1, PartitionFamily(1, {}));
  SmoothnessSpec spec{{2.0}, {kInf}, {1.0}, Partition::trivial(1)};
  CHECK_THROWS_AS(
      rate_experiment(f, spec, cfg, {100, 200, 300}, 8, 1.0, 1),
      ArgumentError);  // too few points
  CHECK_THROWS_AS(
      rate_experiment(f, spec, cfg, {100, 150, 200, 300}, 8, 1.0, 1),
      ArgumentError);  // less than a decade
}

}  // TEST_SUITE
