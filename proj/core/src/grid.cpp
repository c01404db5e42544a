#include "supkde/grid.hpp"

#include <cmath>

#include "supkde/errors.hpp"

namespace supkde {

EvaluationGrid::EvaluationGrid(std::vector<double> lo, std::vector<double> hi,
                               std::vector<std::size_t> nodes_per_axis)
    : lo_(std::move(lo)), hi_(std::move(hi)) {
  if (lo_.empty() || lo_.size() != hi_.size() ||
      lo_.size() != nodes_per_axis.size()) {
    throw ArgumentError("grid: inconsistent axis specs");
  }
  axes_.resize(lo_.size());
  step_.resize(lo_.size());
  for (std::size_t j = 0; j < lo_.size(); ++j) {
    const std::size_t count = nodes_per_axis[j];
    if (count < 2) throw ArgumentError("grid: need >= 2 nodes per axis");
    if (!(lo_[j] < hi_[j])) throw ArgumentError("grid: empty axis range");
    step_[j] = (hi_[j] - lo_[j]) / static_cast<double>(count - 1);
    auto& ax = axes_[j];
    ax.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      ax[i] = lo_[j] + step_[j] * static_cast<double>(i);
    }
    ax.back() = hi_[j];
  }
}

EvaluationGrid EvaluationGrid::cover(const Dataset& data, double inflate,
                                     double resolution) {
  if (!(inflate >= 0.0)) throw ArgumentError("grid: inflate must be >= 0");
  if (!(resolution > 0.0)) {
    throw ArgumentError("grid: resolution must be positive");
  }
  const int d = data.dim();
  std::vector<double> lo(static_cast<std::size_t>(d));
  std::vector<double> hi(static_cast<std::size_t>(d));
  std::vector<std::size_t> counts(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    const auto [mn, mx] = data.range(j);
    lo[static_cast<std::size_t>(j)] = mn - inflate;
    hi[static_cast<std::size_t>(j)] = mx + inflate;
    const double span = hi[static_cast<std::size_t>(j)] -
                        lo[static_cast<std::size_t>(j)];
    counts[static_cast<std::size_t>(j)] =
        static_cast<std::size_t>(std::ceil(span / resolution)) + 1;
    counts[static_cast<std::size_t>(j)] =
        std::max<std::size_t>(counts[static_cast<std::size_t>(j)], 2);
  }
  return EvaluationGrid(std::move(lo), std::move(hi), std::move(counts));
}

std::size_t EvaluationGrid::total_nodes() const {
  std::size_t total = 1;
  for (const auto& ax : axes_) total *= ax.size();
  return total;
}

bool EvaluationGrid::same_axes(const EvaluationGrid& other) const {
  return axes_ == other.axes_;
}

nlohmann::json EvaluationGrid::to_json() const {
  nlohmann::json axes = nlohmann::json::array();
  for (std::size_t j = 0; j < axes_.size(); ++j) {
    axes.push_back(nlohmann::json{{"lo", lo_[j]},
                                  {"hi", hi_[j]},
                                  {"step", step_[j]},
                                  {"nodes", axes_[j].size()}});
  }
  return nlohmann::json{{"axes", axes}};
}

}  // namespace supkde
