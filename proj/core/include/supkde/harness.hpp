#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "supkde/constants.hpp"
#include "supkde/kernel.hpp"
#include "supkde/partition.hpp"
#include "supkde/selection.hpp"
#include "supkde/synthetic.hpp"

namespace supkde {

/// Anisotropic smoothness description: per-axis exponent beta_j, norm
/// index p_j (use INFINITY for the sup-norm case) and radius L_j, plus the
/// independence structure the rate refers to.
struct SmoothnessSpec {
  std::vector<double> beta;
  std::vector<double> p;
  std::vector<double> L;
  Partition partition;
};

/// Effective smoothness index: inf over blocks of
/// (1 - sum 1/(beta_j p_j)) / sum (1/beta_j), with 1/p = 0 at p = infinity.
double upsilon(const SmoothnessSpec& spec);

/// Minimax rate exponent: phi_n = (ln n / n)^(u / (2u + 1)).
inline double rate_exponent(double u) { return u / (2.0 * u + 1.0); }

struct BiasOptions {
  double tol = 1e-7;              // adaptive quadrature tolerance
  std::size_t probe_nodes = 201;  // dense-grid resolution per axis
  /// Probe box override per block axis; defaults to the density's box.
  std::optional<std::pair<std::vector<double>, std::vector<double>>> box;
};

/// b_{h_I}: sup over a dense block grid of the kernel approximation error
/// of the marginal f_I, each value from adaptive quadrature.
double true_bias(const SyntheticDensity& f, const Kernel& k,
                 const std::vector<int>& block,
                 std::span<const double> h_block,
                 const BiasOptions& options = {});

/// s_eta(x) = int K_eta(t - x) f_I(t) dt.
double smoothed_marginal(const SyntheticDensity& f, const Kernel& k,
                         const std::vector<int>& block,
                         std::span<const double> eta_block,
                         std::span<const double> x, double tol = 1e-9);

/// s*_{h,eta}(x): same smoothing with the convolution kernel, one profile
/// per block axis.
double pair_smoothed_marginal(
    const SyntheticDensity& f,
    const std::vector<std::shared_ptr<const ConvolutionProfile>>& profiles,
    const std::vector<int>& block, std::span<const double> x,
    double tol = 1e-9);

struct OracleRiskResult {
  double value = 0.0;
  std::size_t h_index = 0;
  std::size_t p_index = 0;
  double bias_part = 0.0;   // B(h, P) at the argmin
  double stoch_part = 0.0;  // sqrt(ln n / (n V(h,P))) at the argmin
};

/// r_n(f): exact minimization of B(h,P) + sqrt(ln n / (n V(h,P))) over the
/// candidate grid and the factorizing partitions of f within the family.
OracleRiskResult oracle_risk(const SyntheticDensity& f, const Kernel& k,
                             const CandidateSet& cands, std::size_t n,
                             const BiasOptions& options = {});

/// Everything a simulation campaign needs to run one selection.
struct PipelineConfig {
  Kernel kernel;
  constants::Context ctx;
  PartitionFamily family;
  SelectionOptions selection;
};

struct ReplicateRecord {
  std::size_t replicate = 0;
  double sup_error_selected = 0.0;
  double sup_error_best = 0.0;  // best candidate with hindsight
  double ratio = 0.0;           // selected / best
  double criterion = 0.0;       // selected criterion value
  std::vector<double> h_hat;
  std::string p_hat;
};

/// Samples `reps` datasets of size n, runs selection on each and evaluates
/// sup-norm errors against the true density on the selection grid.
/// Replicate RNG streams depend only on (seed, replicate), so the output
/// is identical for any thread count.
std::vector<ReplicateRecord> run_replicates(const SyntheticDensity& f,
                                            const PipelineConfig& config,
                                            std::size_t n, int reps,
                                            std::uint64_t seed,
                                            int threads = 0);

struct RiskEstimate {
  double risk = 0.0;
  double stderr_ = 0.0;
  double q = 1.0;
  int reps = 0;
};

RiskEstimate aggregate_risk(std::span<const ReplicateRecord> records,
                            double q);

/// Monte Carlo sup-norm risk (E ||f^ - f||_inf^q)^(1/q).
RiskEstimate mc_risk(const SyntheticDensity& f, const PipelineConfig& config,
                     std::size_t n, int reps, double q, std::uint64_t seed,
                     int threads = 0);

struct RatePoint {
  std::size_t n = 0;
  RiskEstimate risk;
};

struct RateFit {
  std::vector<RatePoint> points;
  double slope = 0.0;
  double intercept = 0.0;
  double theoretical_slope = 0.0;  // -upsilon / (2 upsilon + 1)
  std::vector<double> residuals;
  nlohmann::json to_json() const;
};

/// OLS of log risk on log(n / ln n) across the n-list.
RateFit rate_experiment(const SyntheticDensity& f, const SmoothnessSpec& spec,
                        const PipelineConfig& config,
                        const std::vector<std::size_t>& n_list, int reps,
                        double q, std::uint64_t seed, int threads = 0);

/// The OLS piece alone: fills slope/intercept/residuals from `points`.
void fit_log_rate(RateFit& fit);

/// Frequency table of the selected partitions (keys are 1-based JSON
/// text like [[1,2],[3]]).
std::map<std::string, int> structure_histogram(
    std::span<const ReplicateRecord> records);

std::map<std::string, int> structure_recovery(const SyntheticDensity& f,
                                              const PipelineConfig& config,
                                              std::size_t n, int reps,
                                              std::uint64_t seed,
                                              int threads = 0);

}  // namespace supkde
