#pragma once

#include <memory>
#include <vector>

#include <nlohmann/json.hpp>

#include "supkde/dataset.hpp"

namespace supkde {

/// Product grid of uniform per-axis nodes: the finite proxy for suprema
/// over R^d. Fast and brute-force evaluation paths share the materialized
/// node vectors, so their arguments agree bit-for-bit.
class EvaluationGrid {
 public:
  EvaluationGrid(std::vector<double> lo, std::vector<double> hi,
                 std::vector<std::size_t> nodes_per_axis);

  /// Box = data hull inflated by `inflate` per side; per-axis spacing is
  /// the largest uniform step <= resolution.
  static EvaluationGrid cover(const Dataset& data, double inflate,
                              double resolution);

  int dim() const noexcept { return static_cast<int>(axes_.size()); }
  std::size_t nodes(int axis) const { return axes_[axis].size(); }
  const std::vector<double>& axis_nodes(int axis) const { return axes_[axis]; }
  double node(int axis, std::size_t i) const { return axes_[axis][i]; }
  double lo(int axis) const { return lo_[axis]; }
  double hi(int axis) const { return hi_[axis]; }
  double step(int axis) const { return step_[axis]; }
  std::size_t total_nodes() const;

  bool same_axes(const EvaluationGrid& other) const;
  nlohmann::json to_json() const;

 private:
  std::vector<double> lo_, hi_, step_;
  std::vector<std::vector<double>> axes_;
};

}  // namespace supkde
