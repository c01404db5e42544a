#include "supkde/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "supkde/errors.hpp"
#include "supkde/parallel.hpp"
#include "supkde/version.hpp"

namespace supkde {

namespace {

void enumerate_exponents(std::size_t n, double threshold, int d, int axis,
                         std::vector<int>& k, std::vector<BandwidthVector>& out) {
  if (axis == d) {
    double v = 1.0;
    for (int e : k) v *= std::ldexp(1.0, -e);
    if (static_cast<double>(n) * v >= threshold) {
      std::vector<double> h(k.size());
      for (std::size_t j = 0; j < k.size(); ++j) {
        h[j] = std::ldexp(1.0, -k[j]);
      }
      out.emplace_back(std::move(h));
    }
    return;
  }
  for (int e = 0; e <= 60; ++e) {
    // prune: the volume can only shrink as further exponents are added
    double v = std::ldexp(1.0, -e);
    for (int a = 0; a < axis; ++a) v *= std::ldexp(1.0, -k[a]);
    if (static_cast<double>(n) * v < threshold) break;
    k[axis] = e;
    enumerate_exponents(n, threshold, d, axis + 1, k, out);
  }
  k[axis] = 0;
}

}  // namespace

CandidateSet build_candidates(std::size_t n, int d, double a_star,
                              PartitionFamily family) {
  if (n < 3) throw ArgumentError("build_candidates: need n >= 3");
  if (d < 1 || family.dim() != d) {
    throw ArgumentError("build_candidates: family dimension mismatch");
  }
  if (!(a_star > 0.0)) throw ArgumentError("build_candidates: a_star <= 0");
  const double threshold = std::log(static_cast<double>(n)) / a_star;
  std::vector<int> k(static_cast<std::size_t>(d), 0);
  std::vector<BandwidthVector> bandwidths;
  enumerate_exponents(n, threshold, d, 0, k, bandwidths);
  if (bandwidths.empty()) {
    throw EmptyCandidateError(
        "H_n is empty: n V_h >= ln(n)/a* fails even at h = (1,...,1) "
        "(a* = " + std::to_string(a_star) +
        ", n = " + std::to_string(n) +
        "). With theoretical constants this needs an astronomically large "
        "n; use calibrated mode (--mode calibrated) instead.");
  }
  // Exponents were produced in ascending lexicographic order, so the
  // bandwidths are already lexicographically descending.
  return CandidateSet{std::move(bandwidths), std::move(family), a_star};
}

SelectionEngine::SelectionEngine(const Dataset& data, const Kernel& kernel,
                                 const constants::Context& ctx,
                                 PartitionFamily family,
                                 SelectionOptions options)
    : data_(data),
      kernel_(kernel),
      ctx_(ctx),
      options_(options),
      candidates_(build_candidates(
          data.size(), data.dim(),
          constants::lambda_and_threshold(ctx, 1.0).a_star,
          std::move(family))),
      conv_cache_(kernel_, options_.profile_nodes) {
  if (ctx_.d != data_.dim()) {
    throw ArgumentError("selection: context dimension differs from data");
  }
  double min_h = 1.0;
  double max_h = 0.0;
  for (const auto& b : candidates_.bandwidths) {
    min_h = std::min(min_h, *std::min_element(b.h.begin(), b.h.end()));
    max_h = std::max(max_h, b.max_component());
  }
  const double res = options_.grid_resolution > 0.0
                         ? options_.grid_resolution
                         : min_h / 4.0;
  // Inflate by the full max bandwidth: pairwise estimators have support
  // radius (h_j + eta_j)/2 <= max_h per axis.
  grid_ = std::make_shared<const EvaluationGrid>(
      EvaluationGrid::cover(data_, max_h, res));
  plain_.resize(candidates_.count());
}

const FittedEstimator& SelectionEngine::plain(std::size_t candidate) {
  auto& slot = plain_[candidate];
  if (!slot) {
    const auto& h = candidates_.bandwidth(candidate);
    const auto& p = candidates_.partition(candidate);
    std::vector<BlockTablePtr> tables;
    tables.reserve(p.blocks().size());
    for (const auto& block : p.blocks()) {
      const auto hb = h.restrict_to(block);
      tables.push_back(marginal_cache_.get_or_build(
          TableCache::Key{block, hb, {}}, [&]() {
            return fit_marginal(data_, kernel_, block, hb, grid_);
          }));
    }
    slot.emplace(grid_, std::move(tables));
  }
  return *slot;
}

void SelectionEngine::fit_all_plain() {
  parallel_for(candidates_.count(), options_.threads,
               [this](std::size_t c) { plain(c); });
}

FittedEstimator SelectionEngine::make_pair_estimator(std::size_t i,
                                                     std::size_t j) {
  const auto& hi = candidates_.bandwidth(i);
  const auto& hj = candidates_.bandwidth(j);
  const Partition meet =
      diamond(candidates_.partition(i), candidates_.partition(j));
  std::vector<BlockTablePtr> tables;
  tables.reserve(meet.blocks().size());
  for (const auto& block : meet.blocks()) {
    // Unordered per-axis key: the convolution is symmetric in (h, eta).
    std::vector<double> lo(block.size()), up(block.size());
    for (std::size_t k = 0; k < block.size(); ++k) {
      const double a = hi.h[static_cast<std::size_t>(block[k])];
      const double b = hj.h[static_cast<std::size_t>(block[k])];
      lo[k] = std::min(a, b);
      up[k] = std::max(a, b);
    }
    tables.push_back(pair_cache_.get_or_build(
        TableCache::Key{block, lo, up}, [&]() {
          std::vector<std::shared_ptr<const ConvolutionProfile>> profiles;
          profiles.reserve(block.size());
          for (std::size_t k = 0; k < block.size(); ++k) {
            profiles.push_back(conv_cache_.get(lo[k], up[k]));
          }
          return fit_pair_marginal(data_, block, profiles, grid_);
        }));
  }
  return FittedEstimator(grid_, std::move(tables));
}

std::size_t argmin_candidate(const std::vector<CriterionEntry>& table,
                             const CandidateSet& cands) {
  if (table.empty()) throw ArgumentError("argmin: empty table");
  std::size_t best = 0;
  for (std::size_t i = 1; i < table.size(); ++i) {
    const auto& a = table[i];
    const auto& b = table[best];
    bool better = false;
    if (a.total != b.total) {
      better = a.total < b.total;
    } else if (a.volume != b.volume) {
      better = a.volume > b.volume;
    } else {
      const auto blocks_a = cands.partition(i).block_count();
      const auto blocks_b = cands.partition(best).block_count();
      if (blocks_a != blocks_b) {
        better = blocks_a < blocks_b;
      } else if (cands.bandwidth(i) != cands.bandwidth(best)) {
        better = cands.bandwidth(i).h > cands.bandwidth(best).h;
      }
      // otherwise the earlier family member wins
    }
    if (better) best = i;
  }
  return best;
}

const SelectionResult& SelectionEngine::run() {
  if (result_) return *result_;
  const std::size_t m = candidates_.count();
  if (m > 4096) {
    throw ArgumentError(
        "selection: " + std::to_string(m) +
        " candidates would need a " + std::to_string(m) + "x" +
        std::to_string(m) +
        " comparison matrix; restrict the partition family or raise the "
        "candidate floor");
  }

  f_sup_ = empirical_f_n(data_, kernel_, candidates_.bandwidths, grid_);
  const auto pen = constants::lambda_and_threshold(ctx_, f_sup_.f_bar_n);
  lambda_ = pen.lambda;

  std::vector<double> a_hat_all(m);
  for (std::size_t c = 0; c < m; ++c) {
    a_hat_all[c] = A_hat(f_sup_.f_bar_n, candidates_.bandwidth(c),
                         candidates_.partition(c), data_.size());
  }

  fit_all_plain();

  // Inner-sup subsample (off by default): keep every stride-th candidate
  // as an eta-candidate.
  std::vector<bool> inner_allowed(m, true);
  if (options_.eta_budget > 0 && options_.eta_budget < m) {
    const std::size_t stride =
        (m + options_.eta_budget - 1) / options_.eta_budget;
    for (std::size_t c = 0; c < m; ++c) inner_allowed[c] = (c % stride == 0);
  }

  // s(i,j) = || f^_{(h_i,P_i),(h_j,P_j)} - f^_{h_j,P_j} ||_grid.
  // The pair estimator is symmetric in its two arguments, so one sweep per
  // unordered pair fills both orientations.
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> s(m * m, nan);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(m * (m + 1) / 2);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) {
      if (inner_allowed[j] || inner_allowed[i]) pairs.emplace_back(i, j);
    }
  }
  parallel_for(pairs.size(), options_.threads, [&](std::size_t pi) {
    const auto [i, j] = pairs[pi];
    const FittedEstimator pair_est = make_pair_estimator(i, j);
    const auto diff = sup_norm_diff2(pair_est, plain(i), plain(j));
    if (inner_allowed[j]) s[i * m + j] = diff.vs_second;
    if (inner_allowed[i]) s[j * m + i] = diff.vs_first;
  });

  SelectionResult res;
  res.table.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    double dh = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double sij = s[i * m + j];
      if (std::isnan(sij)) continue;
      dh = std::max(dh, std::max(0.0, sij - lambda_ * a_hat_all[j]));
    }
    auto& e = res.table[i];
    e.h_index = candidates_.h_index(i);
    e.p_index = candidates_.p_index(i);
    e.delta_hat = dh;
    e.a_hat = a_hat_all[i];
    e.penalty = lambda_ * a_hat_all[i];
    e.total = dh + e.penalty;
    e.volume = candidates_.bandwidth(i).min_block_volume(
        candidates_.partition(i));
  }

  res.selected = argmin_candidate(res.table, candidates_);
  res.lambda = lambda_;
  res.f_n = f_sup_.f_n;
  res.f_bar_n = f_sup_.f_bar_n;
  res.a_star = candidates_.a_star;
  res.mode = ctx_.mode;
  res.h_hat = candidates_.bandwidth(res.selected).h;
  res.p_hat = candidates_.partition(res.selected).to_json();
  result_ = std::move(res);
  return *result_;
}

double SelectionEngine::delta_hat(std::size_t candidate) {
  run();
  return result_->table[candidate].delta_hat;
}

std::vector<double> SelectionEngine::candidate_sup_errors(
    std::span<const double> truth) {
  fit_all_plain();
  std::vector<double> out(candidates_.count());
  parallel_for(out.size(), options_.threads, [&](std::size_t c) {
    out[c] = sup_norm_error(plain(c), truth);
  });
  return out;
}

nlohmann::json SelectionResult::to_json(const CandidateSet& cands,
                                        const EvaluationGrid& grid) const {
  nlohmann::json jtable = nlohmann::json::array();
  for (const auto& e : table) {
    jtable.push_back(nlohmann::json{
        {"h", cands.bandwidths[e.h_index].h},
        {"partition", cands.family.members()[e.p_index].to_json()},
        {"delta_hat", e.delta_hat},
        {"a_hat", e.a_hat},
        {"penalty", e.penalty},
        {"total", e.total},
        {"volume", e.volume}});
  }
  return nlohmann::json{
      {"version", kVersion},
      {"selected", {{"index", selected},
                    {"h", h_hat},
                    {"partition", p_hat},
                    {"total", table[selected].total}}},
      {"lambda", lambda},
      {"f_n", f_n},
      {"f_bar_n", f_bar_n},
      {"a_star", a_star},
      {"mode", constants::mode_name(mode)},
      {"tie_break", "total,volume_desc,blocks_asc,h_lex_desc,family_order"},
      {"grid", grid.to_json()},
      {"criterion_table", jtable}};
}

SelectionResult select(const Dataset& data, const Kernel& kernel,
                       const constants::Context& ctx,
                       const PartitionFamily& family,
                       const SelectionOptions& options) {
  SelectionEngine engine(data, kernel, ctx, family, options);
  return engine.run();
}

}  // namespace supkde
