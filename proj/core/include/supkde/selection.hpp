#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "supkde/constants.hpp"
#include "supkde/dataset.hpp"
#include "supkde/estimator.hpp"
#include "supkde/grid.hpp"
#include "supkde/kernel.hpp"
#include "supkde/partition.hpp"

namespace supkde {

struct SelectionOptions {
  double grid_resolution = 0.0;  // <= 0: min candidate bandwidth / 4
  int threads = 0;               // 0: SUPKDE_THREADS env, else hardware
  std::size_t eta_budget = 0;    // 0: compare against every candidate
  int profile_nodes = 2049;      // convolution table resolution
};

/// Dyadic bandwidth vectors admitted by H_n, crossed with a partition
/// family. Candidate index = h_index * family.size() + p_index; bandwidth
/// vectors are ordered lexicographically descending (largest first).
struct CandidateSet {
  std::vector<BandwidthVector> bandwidths;
  PartitionFamily family;
  double a_star = 1.0;  // threshold in force when the set was built

  std::size_t count() const { return bandwidths.size() * family.size(); }
  std::size_t h_index(std::size_t candidate) const {
    return candidate / family.size();
  }
  std::size_t p_index(std::size_t candidate) const {
    return candidate % family.size();
  }
  const BandwidthVector& bandwidth(std::size_t candidate) const {
    return bandwidths[h_index(candidate)];
  }
  const Partition& partition(std::size_t candidate) const {
    return family.members()[p_index(candidate)];
  }
};

/// All dyadic h with n V_h >= ln(n) / a_star. Throws EmptyCandidateError
/// when even h = (1,...,1) fails the constraint.
CandidateSet build_candidates(std::size_t n, int d, double a_star,
                              PartitionFamily family);

struct CriterionEntry {
  std::size_t h_index = 0;
  std::size_t p_index = 0;
  double delta_hat = 0.0;
  double a_hat = 0.0;
  double penalty = 0.0;  // lambda * a_hat
  double total = 0.0;    // delta_hat + penalty
  double volume = 0.0;   // V(h, P)
};

/// Argmin over the criterion table under the documented tie-break:
/// smallest total, then largest V(h,P), then fewest blocks, then
/// lexicographically largest h, then family order.
std::size_t argmin_candidate(const std::vector<CriterionEntry>& table,
                             const CandidateSet& cands);

struct SelectionResult {
  std::size_t selected = 0;
  std::vector<CriterionEntry> table;
  double lambda = 0.0;
  double f_n = 0.0;
  double f_bar_n = 1.0;
  double a_star = 1.0;
  constants::Mode mode = constants::Mode::calibrated;
  std::vector<double> h_hat;
  nlohmann::json p_hat;  // 1-based blocks

  nlohmann::json to_json(const CandidateSet& cands,
                         const EvaluationGrid& grid) const;
};

/// Runs the pairwise-comparison selection rule and keeps every fitted
/// candidate around for audits (oracle ratios, per-candidate errors).
class SelectionEngine {
 public:
  SelectionEngine(const Dataset& data, const Kernel& kernel,
                  const constants::Context& ctx, PartitionFamily family,
                  SelectionOptions options = {});

  const CandidateSet& candidates() const { return candidates_; }
  std::shared_ptr<const EvaluationGrid> grid() const { return grid_; }
  const SelectionResult& run();

  /// The plain product estimator of one candidate (fitted on demand).
  const FittedEstimator& plain(std::size_t candidate);
  /// Delta^ of one candidate; requires run().
  double delta_hat(std::size_t candidate);
  double f_bar_n() const { return f_sup_.f_bar_n; }
  double lambda() const { return lambda_; }

  /// Sup-norm error of every candidate against a tabulated truth.
  std::vector<double> candidate_sup_errors(std::span<const double> truth);

 private:
  void fit_all_plain();
  FittedEstimator make_pair_estimator(std::size_t i, std::size_t j);

  const Dataset& data_;
  Kernel kernel_;
  constants::Context ctx_;
  SelectionOptions options_;
  CandidateSet candidates_;
  std::shared_ptr<const EvaluationGrid> grid_;
  ConvolutionCache conv_cache_;
  TableCache marginal_cache_;
  TableCache pair_cache_;
  std::vector<std::optional<FittedEstimator>> plain_;
  EmpiricalSup f_sup_;
  double lambda_ = 0.0;
  std::optional<SelectionResult> result_;
};

/// One-shot convenience wrapper around SelectionEngine.
SelectionResult select(const Dataset& data, const Kernel& kernel,
                       const constants::Context& ctx,
                       const PartitionFamily& family,
                       const SelectionOptions& options = {});

}  // namespace supkde
