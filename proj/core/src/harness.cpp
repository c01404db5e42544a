#include "supkde/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "supkde/errors.hpp"
#include "supkde/parallel.hpp"
#include "supkde/quadrature.hpp"

namespace supkde {

double upsilon(const SmoothnessSpec& spec) {
  const auto d = static_cast<std::size_t>(spec.partition.dim());
  if (spec.beta.size() != d || spec.p.size() != d) {
    throw ArgumentError("upsilon: beta/p must have one entry per axis");
  }
  for (double b : spec.beta) {
    if (!(b > 0.0)) throw ArgumentError("upsilon: beta must be positive");
  }
  double u = std::numeric_limits<double>::infinity();
  for (const auto& block : spec.partition.blocks()) {
    double sum_inv_bp = 0.0;
    double sum_inv_b = 0.0;
    for (int j : block) {
      const auto ju = static_cast<std::size_t>(j);
      sum_inv_b += 1.0 / spec.beta[ju];
      if (std::isfinite(spec.p[ju])) {
        if (!(spec.p[ju] >= 1.0)) {
          throw ArgumentError("upsilon: p must be >= 1 (or infinity)");
        }
        sum_inv_bp += 1.0 / (spec.beta[ju] * spec.p[ju]);
      }
    }
    u = std::min(u, (1.0 - sum_inv_bp) / sum_inv_b);
  }
  return u;
}

namespace {

// Shared probe-grid walk: visits every node of the dense block grid and
// reports the max of `eval` there.
template <class Eval>
double probe_grid_max(std::span<const double> lo, std::span<const double> hi,
                      std::size_t nodes, Eval&& eval) {
  const std::size_t m = lo.size();
  std::vector<std::size_t> idx(m, 0);
  std::vector<double> x(m);
  for (std::size_t k = 0; k < m; ++k) x[k] = lo[k];
  double best = 0.0;
  while (true) {
    best = std::max(best, std::abs(eval(std::span<const double>(x))));
    std::size_t k = m;
    bool done = true;
    while (k-- > 0) {
      if (++idx[k] < nodes) {
        x[k] = lo[k] + (hi[k] - lo[k]) * static_cast<double>(idx[k]) /
                           static_cast<double>(nodes - 1);
        done = false;
        break;
      }
      idx[k] = 0;
      x[k] = lo[k];
    }
    if (done) break;
  }
  return best;
}

void resolve_probe_box(const SyntheticDensity& f,
                       const std::vector<int>& block,
                       const BiasOptions& options, std::vector<double>& lo,
                       std::vector<double>& hi) {
  if (options.box) {
    lo = options.box->first;
    hi = options.box->second;
    if (lo.size() != block.size() || hi.size() != block.size()) {
      throw ArgumentError("bias: probe box size mismatch");
    }
    return;
  }
  lo.clear();
  hi.clear();
  for (int j : block) {
    lo.push_back(f.box_lo()[static_cast<std::size_t>(j)]);
    hi.push_back(f.box_hi()[static_cast<std::size_t>(j)]);
  }
}

}  // namespace

double true_bias(const SyntheticDensity& f, const Kernel& k,
                 const std::vector<int>& block,
                 std::span<const double> h_block, const BiasOptions& options) {
  if (block.empty() || h_block.size() != block.size()) {
    throw ArgumentError("true_bias: block/bandwidth mismatch");
  }
  const std::size_t m = block.size();
  std::vector<double> lo, hi;
  resolve_probe_box(f, block, options, lo, hi);

  double inv_volume = 1.0;
  for (double h : h_block) inv_volume /= h;

  std::vector<double> tlo(m), thi(m);
  return probe_grid_max(
      lo, hi, options.probe_nodes, [&](std::span<const double> x) {
        const double fx = f.marginal(block, x);
        for (std::size_t l = 0; l < m; ++l) {
          tlo[l] = x[l] - 0.5 * h_block[l];
          thi[l] = x[l] + 0.5 * h_block[l];
        }
        return integrate_box(
            [&](std::span<const double> t) {
              double w = inv_volume;
              for (std::size_t l = 0; l < m; ++l) {
                w *= k((t[l] - x[l]) / h_block[l]);
              }
              return w * (f.marginal(block, t) - fx);
            },
            tlo, thi, options.tol);
      });
}

double smoothed_marginal(const SyntheticDensity& f, const Kernel& k,
                         const std::vector<int>& block,
                         std::span<const double> eta_block,
                         std::span<const double> x, double tol) {
  const std::size_t m = block.size();
  double inv_volume = 1.0;
  for (double e : eta_block) inv_volume /= e;
  std::vector<double> tlo(m), thi(m);
  for (std::size_t l = 0; l < m; ++l) {
    tlo[l] = x[l] - 0.5 * eta_block[l];
    thi[l] = x[l] + 0.5 * eta_block[l];
  }
  return integrate_box(
      [&](std::span<const double> t) {
        double w = inv_volume;
        for (std::size_t l = 0; l < m; ++l) {
          w *= k((t[l] - x[l]) / eta_block[l]);
        }
        return w * f.marginal(block, t);
      },
      tlo, thi, tol);
}

double pair_smoothed_marginal(
    const SyntheticDensity& f,
    const std::vector<std::shared_ptr<const ConvolutionProfile>>& profiles,
    const std::vector<int>& block, std::span<const double> x, double tol) {
  const std::size_t m = block.size();
  if (profiles.size() != m) {
    throw ArgumentError("pair_smoothed_marginal: one profile per axis");
  }
  std::vector<double> tlo(m), thi(m);
  for (std::size_t l = 0; l < m; ++l) {
    const double s = profiles[l]->support_half_width();
    tlo[l] = x[l] - s;
    thi[l] = x[l] + s;
  }
  return integrate_box(
      [&](std::span<const double> t) {
        double w = 1.0;
        for (std::size_t l = 0; l < m; ++l) {
          w *= (*profiles[l])(t[l] - x[l]);
        }
        return w * f.marginal(block, t);
      },
      tlo, thi, tol);
}

OracleRiskResult oracle_risk(const SyntheticDensity& f, const Kernel& k,
                             const CandidateSet& cands, std::size_t n,
                             const BiasOptions& options) {
  if (n < 3) throw ArgumentError("oracle_risk: need n >= 3");
  // P(f) within the family: every member coarser than (refined by) the
  // true partition, via the exact block-merge closure.
  std::vector<std::size_t> factorizing;
  for (std::size_t pi = 0; pi < cands.family.size(); ++pi) {
    if (refines(f.true_partition(), cands.family.members()[pi])) {
      factorizing.push_back(pi);
    }
  }
  if (factorizing.empty()) {
    throw ArgumentError("oracle_risk: no factorizing partition in family");
  }

  const double log_n = std::log(static_cast<double>(n));
  std::map<std::pair<std::vector<int>, std::vector<double>>, double> bias;
  auto bias_of = [&](const std::vector<int>& block,
                     const std::vector<double>& hb) {
    const auto key = std::make_pair(block, hb);
    auto it = bias.find(key);
    if (it != bias.end()) return it->second;
    const double b = true_bias(f, k, block, hb, options);
    bias.emplace(key, b);
    return b;
  };

  OracleRiskResult best;
  best.value = std::numeric_limits<double>::infinity();
  for (std::size_t hi = 0; hi < cands.bandwidths.size(); ++hi) {
    const auto& h = cands.bandwidths[hi];
    for (const std::size_t pi : factorizing) {
      const auto& p = cands.family.members()[pi];
      double B = 0.0;
      for (const auto& pprime : cands.family.members()) {
        const Partition meet = diamond(p, pprime);
        for (const auto& block : meet.blocks()) {
          B = std::max(B, bias_of(block, h.restrict_to(block)));
        }
      }
      const double stoch =
          std::sqrt(log_n / (static_cast<double>(n) *
                             h.min_block_volume(p)));
      const double total = B + stoch;
      if (total < best.value) {
        best.value = total;
        best.h_index = hi;
        best.p_index = pi;
        best.bias_part = B;
        best.stoch_part = stoch;
      }
    }
  }
  return best;
}

std::vector<ReplicateRecord> run_replicates(const SyntheticDensity& f,
                                            const PipelineConfig& config,
                                            std::size_t n, int reps,
                                            std::uint64_t seed, int threads) {
  if (reps < 1) throw ArgumentError("run_replicates: need reps >= 1");
  std::vector<ReplicateRecord> records(static_cast<std::size_t>(reps));
  // Replicates are the parallelism unit; selections inside run
  // single-threaded so results never depend on the thread count.
  PipelineConfig inner = config;
  inner.selection.threads = 1;
  parallel_for(static_cast<std::size_t>(reps), threads, [&](std::size_t r) {
    Rng rng = Rng::for_replicate(seed, r);
    const Dataset data = f.sample_dataset(n, rng);
    SelectionEngine engine(data, inner.kernel, inner.ctx, inner.family,
                           inner.selection);
    const SelectionResult& sel = engine.run();
    const auto truth = tabulate_on_grid(
        *engine.grid(), [&](std::span<const double> x) { return f(x); });
    const auto errors = engine.candidate_sup_errors(truth);
    double best = std::numeric_limits<double>::infinity();
    for (double e : errors) best = std::min(best, e);
    auto& rec = records[r];
    rec.replicate = r;
    rec.sup_error_selected = errors[sel.selected];
    rec.sup_error_best = best;
    rec.ratio = best > 0.0 ? rec.sup_error_selected / best
                           : std::numeric_limits<double>::infinity();
    rec.criterion = sel.table[sel.selected].total;
    rec.h_hat = sel.h_hat;
    rec.p_hat = sel.p_hat.dump();
  });
  return records;
}

RiskEstimate aggregate_risk(std::span<const ReplicateRecord> records,
                            double q) {
  if (records.empty()) throw ArgumentError("aggregate_risk: no records");
  if (!(q >= 1.0)) throw ArgumentError("aggregate_risk: need q >= 1");
  const auto reps = static_cast<double>(records.size());
  double mean_pow = 0.0;
  for (const auto& r : records) {
    mean_pow += std::pow(r.sup_error_selected, q);
  }
  mean_pow /= reps;
  double var = 0.0;
  for (const auto& r : records) {
    const double d = std::pow(r.sup_error_selected, q) - mean_pow;
    var += d * d;
  }
  var /= std::max(1.0, reps - 1.0);
  const double se_mean = std::sqrt(var / reps);
  RiskEstimate out;
  out.q = q;
  out.reps = static_cast<int>(records.size());
  out.risk = std::pow(mean_pow, 1.0 / q);
  // Delta method on m -> m^(1/q).
  out.stderr_ = (q == 1.0)
                    ? se_mean
                    : std::pow(mean_pow, 1.0 / q - 1.0) * se_mean / q;
  return out;
}

RiskEstimate mc_risk(const SyntheticDensity& f, const PipelineConfig& config,
                     std::size_t n, int reps, double q, std::uint64_t seed,
                     int threads) {
  if (reps < 8) throw ArgumentError("mc_risk: need reps >= 8");
  const auto records = run_replicates(f, config, n, reps, seed, threads);
  return aggregate_risk(records, q);
}

RateFit rate_experiment(const SyntheticDensity& f, const SmoothnessSpec& spec,
                        const PipelineConfig& config,
                        const std::vector<std::size_t>& n_list, int reps,
                        double q, std::uint64_t seed, int threads) {
  if (n_list.size() < 4) {
    throw ArgumentError("rate_experiment: need at least 4 sample sizes");
  }
  const auto [mn, mx] = std::minmax_element(n_list.begin(), n_list.end());
  if (static_cast<double>(*mx) < 10.0 * static_cast<double>(*mn)) {
    throw ArgumentError("rate_experiment: n-list must span >= one decade");
  }
  const double u = upsilon(spec);
  if (!(u > 0.0)) {
    throw ArgumentError("rate_experiment: upsilon must be positive");
  }
  RateFit fit;
  fit.theoretical_slope = -rate_exponent(u);
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    const std::uint64_t derived =
        Rng::splitmix64(seed ^ (0xA0761D6478BD642FULL * (i + 1)));
    const auto records =
        run_replicates(f, config, n_list[i], reps, derived, threads);
    fit.points.push_back(RatePoint{n_list[i], aggregate_risk(records, q)});
  }
  fit_log_rate(fit);
  return fit;
}

void fit_log_rate(RateFit& fit) {
  if (fit.points.size() < 2) {
    throw ArgumentError("fit_log_rate: need at least 2 points");
  }
  const auto m = static_cast<double>(fit.points.size());
  double sx = 0.0, sy = 0.0;
  std::vector<double> xs, ys;
  for (const auto& pt : fit.points) {
    const double nn = static_cast<double>(pt.n);
    xs.push_back(std::log(nn / std::log(nn)));
    ys.push_back(std::log(pt.risk.risk));
    sx += xs.back();
    sy += ys.back();
  }
  const double xbar = sx / m, ybar = sy / m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - xbar) * (xs[i] - xbar);
    sxy += (xs[i] - xbar) * (ys[i] - ybar);
  }
  fit.slope = sxy / sxx;
  fit.intercept = ybar - fit.slope * xbar;
  fit.residuals.clear();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    fit.residuals.push_back(ys[i] - (fit.intercept + fit.slope * xs[i]));
  }
}

nlohmann::json RateFit::to_json() const {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : points) {
    pts.push_back(nlohmann::json{{"n", p.n},
                                 {"risk", p.risk.risk},
                                 {"stderr", p.risk.stderr_},
                                 {"reps", p.risk.reps},
                                 {"q", p.risk.q}});
  }
  return nlohmann::json{{"slope", slope},
                        {"intercept", intercept},
                        {"theoretical_slope", theoretical_slope},
                        {"residuals", residuals},
                        {"points", pts}};
}

std::map<std::string, int> structure_histogram(
    std::span<const ReplicateRecord> records) {
  std::map<std::string, int> out;
  for (const auto& r : records) ++out[r.p_hat];
  return out;
}

std::map<std::string, int> structure_recovery(const SyntheticDensity& f,
                                              const PipelineConfig& config,
                                              std::size_t n, int reps,
                                              std::uint64_t seed,
                                              int threads) {
  const auto records = run_replicates(f, config, n, reps, seed, threads);
  return structure_histogram(records);
}

}  // namespace supkde
