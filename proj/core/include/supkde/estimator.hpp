#pragma once

#include <functional>
#include <map>
#include <memory>
#include <shared_mutex>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "supkde/dataset.hpp"
#include "supkde/grid.hpp"
#include "supkde/kernel.hpp"
#include "supkde/partition.hpp"

namespace supkde {

/// Per-coordinate kernel scales, each in (0, 1].
struct BandwidthVector {
  std::vector<double> h;

  explicit BandwidthVector(std::vector<double> values);

  int dim() const noexcept { return static_cast<int>(h.size()); }
  double volume() const;
  std::vector<double> restrict_to(const std::vector<int>& block) const;
  double block_volume(const std::vector<int>& block) const;
  /// V(h, P) = inf over blocks of the block volume.
  double min_block_volume(const Partition& p) const;
  double max_component() const;

  friend bool operator==(const BandwidthVector&,
                         const BandwidthVector&) = default;
  friend auto operator<=>(const BandwidthVector&,
                          const BandwidthVector&) = default;
};

/// Values of one block marginal on the grid restricted to the block's axes,
/// row-major with the last block axis fastest.
class BlockTable {
 public:
  BlockTable(std::vector<int> block,
             std::shared_ptr<const EvaluationGrid> grid);

  const std::vector<int>& block() const noexcept { return block_; }
  const EvaluationGrid& grid() const noexcept { return *grid_; }
  std::shared_ptr<const EvaluationGrid> grid_ptr() const { return grid_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t flat) const { return values_[flat]; }
  double& operator[](std::size_t flat) { return values_[flat]; }
  const std::vector<double>& values() const noexcept { return values_; }
  /// Stride of the k-th block axis in the flat layout.
  std::size_t stride(std::size_t k) const { return strides_[k]; }
  double max_value() const;
  /// Plain Riemann sum: sum of values times the product of axis steps.
  double riemann_mass() const;

 private:
  std::vector<int> block_;
  std::shared_ptr<const EvaluationGrid> grid_;
  std::vector<std::size_t> strides_;
  std::vector<double> values_;
};

using BlockTablePtr = std::shared_ptr<const BlockTable>;

/// f~_{h_I} on the block grid. The fast path visits only samples near each
/// node; `_bruteforce` is the all-pairs reference. Both accumulate in
/// ascending sample order with identical scalar expressions, so their
/// outputs agree exactly.
BlockTablePtr fit_marginal(const Dataset& data, const Kernel& k,
                           const std::vector<int>& block,
                           std::span<const double> h_block,
                           std::shared_ptr<const EvaluationGrid> grid);
BlockTablePtr fit_marginal_bruteforce(const Dataset& data, const Kernel& k,
                                      const std::vector<int>& block,
                                      std::span<const double> h_block,
                                      std::shared_ptr<const EvaluationGrid>
                                          grid);

/// Same estimator with |K| in place of K (enters f_n only).
BlockTablePtr fit_abs_marginal(const Dataset& data, const Kernel& k,
                               const std::vector<int>& block,
                               std::span<const double> h_block,
                               std::shared_ptr<const EvaluationGrid> grid);
BlockTablePtr fit_abs_marginal_bruteforce(
    const Dataset& data, const Kernel& k, const std::vector<int>& block,
    std::span<const double> h_block,
    std::shared_ptr<const EvaluationGrid> grid);

/// f~_{h_I, eta_I}: the convolution-kernel estimator on one block; one
/// profile per block axis (keyed unordered, so the (h,eta)/(eta,h) tables
/// coincide bit-for-bit).
BlockTablePtr fit_pair_marginal(
    const Dataset& data, const std::vector<int>& block,
    const std::vector<std::shared_ptr<const ConvolutionProfile>>& profiles,
    std::shared_ptr<const EvaluationGrid> grid);
BlockTablePtr fit_pair_marginal_bruteforce(
    const Dataset& data, const std::vector<int>& block,
    const std::vector<std::shared_ptr<const ConvolutionProfile>>& profiles,
    std::shared_ptr<const EvaluationGrid> grid);

/// A product estimator: one table per block of a partition of all axes.
/// Values combine lazily; the full d-dimensional tensor is never stored.
class FittedEstimator {
 public:
  FittedEstimator(std::shared_ptr<const EvaluationGrid> grid,
                  std::vector<BlockTablePtr> tables);

  const EvaluationGrid& grid() const noexcept { return *grid_; }
  std::shared_ptr<const EvaluationGrid> grid_ptr() const { return grid_; }
  const std::vector<BlockTablePtr>& tables() const noexcept {
    return tables_;
  }
  /// Product of the block tables at one grid node.
  double value(std::span<const std::size_t> multi_index) const;
  /// Full tensor in row-major order (all axes, last fastest); d <= 3 only.
  std::vector<double> materialize() const;

 private:
  std::shared_ptr<const EvaluationGrid> grid_;
  std::vector<BlockTablePtr> tables_;
};

/// Max over grid nodes of |a - b|, without materializing either tensor.
double sup_norm_diff(const FittedEstimator& a, const FittedEstimator& b);

/// One sweep computing max|pair - first| and max|pair - second| together.
struct PairSupDiff {
  double vs_first = 0.0;
  double vs_second = 0.0;
};
PairSupDiff sup_norm_diff2(const FittedEstimator& pair_estimator,
                           const FittedEstimator& first,
                           const FittedEstimator& second);

/// Max over grid nodes of |estimator - truth|, truth given as a row-major
/// table over the full grid (see `tabulate_on_grid`).
double sup_norm_error(const FittedEstimator& est,
                      std::span<const double> truth_table);

/// Row-major table of an arbitrary function over the full grid.
std::vector<double> tabulate_on_grid(
    const EvaluationGrid& grid,
    const std::function<double(std::span<const double>)>& f);

struct EmpiricalSup {
  double f_n = 0.0;
  double f_bar_n = 1.0;  // 1 v 2 f_n
};

/// f_n: sup over candidate bandwidths, nonempty index subsets and grid
/// nodes of the absolute-kernel average.
EmpiricalSup empirical_f_n(const Dataset& data, const Kernel& k,
                           const std::vector<BandwidthVector>& bandwidths,
                           std::shared_ptr<const EvaluationGrid> grid);

/// A^_n(h, P) = sqrt(f_bar_n ln(n) / (n V(h, P))).
double A_hat(double f_bar_n, const BandwidthVector& h, const Partition& p,
             std::size_t n);

/// Read-mostly cache of block tables. Duplicate concurrent fills are
/// permitted; entries for one key are value-identical by construction.
class TableCache {
 public:
  using Key =
      std::tuple<std::vector<int>, std::vector<double>, std::vector<double>>;

  BlockTablePtr get_or_build(const Key& key,
                             const std::function<BlockTablePtr()>& build);
  std::size_t size() const;

 private:
  mutable std::shared_mutex mu_;
  std::map<Key, BlockTablePtr> map_;
};

}  // namespace supkde
