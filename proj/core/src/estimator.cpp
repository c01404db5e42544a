#include "supkde/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>

#include "supkde/errors.hpp"

namespace supkde {

BandwidthVector::BandwidthVector(std::vector<double> values)
    : h(std::move(values)) {
  if (h.empty()) throw ArgumentError("bandwidth vector: empty");
  for (double v : h) {
    if (!(v > 0.0 && v <= 1.0)) {
      throw ArgumentError("bandwidth vector: components must lie in (0, 1]");
    }
  }
}

double BandwidthVector::volume() const {
  double v = 1.0;
  for (double x : h) v *= x;
  return v;
}

std::vector<double> BandwidthVector::restrict_to(
    const std::vector<int>& block) const {
  std::vector<double> out;
  out.reserve(block.size());
  for (int j : block) out.push_back(h[static_cast<std::size_t>(j)]);
  return out;
}

double BandwidthVector::block_volume(const std::vector<int>& block) const {
  double v = 1.0;
  for (int j : block) v *= h[static_cast<std::size_t>(j)];
  return v;
}

double BandwidthVector::min_block_volume(const Partition& p) const {
  if (p.dim() != dim()) {
    throw ArgumentError("min_block_volume: dimension mismatch");
  }
  double v = std::numeric_limits<double>::infinity();
  for (const auto& b : p.blocks()) v = std::min(v, block_volume(b));
  return v;
}

double BandwidthVector::max_component() const {
  return *std::max_element(h.begin(), h.end());
}

BlockTable::BlockTable(std::vector<int> block,
                       std::shared_ptr<const EvaluationGrid> grid)
    : block_(std::move(block)), grid_(std::move(grid)) {
  if (block_.empty()) throw ArgumentError("block table: empty block");
  if (!std::is_sorted(block_.begin(), block_.end())) {
    throw ArgumentError("block table: block must be sorted");
  }
  const std::size_t m = block_.size();
  strides_.assign(m, 1);
  std::size_t total = 1;
  for (std::size_t k = m; k-- > 0;) {
    strides_[k] = total;
    total *= grid_->nodes(block_[k]);
  }
  values_.assign(total, 0.0);
}

double BlockTable::max_value() const {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : values_) m = std::max(m, v);
  return m;
}

double BlockTable::riemann_mass() const {
  double cell = 1.0;
  for (int j : block_) cell *= grid_->step(j);
  double s = 0.0;
  for (double v : values_) s += v;
  return s * cell;
}

namespace {

// Per-axis factor evaluators. Each exposes the value at a displacement
// dx = X - node and its one-sided support radius. The same evaluator
// object backs the scatter and brute-force paths, so factor values agree
// bit-for-bit.
struct PlainAxis {
  const Kernel* k;
  double h;
  double support() const { return 0.5 * h; }
  double operator()(double dx) const { return (*k)(dx / h); }
};

struct AbsAxis {
  const Kernel* k;
  double h;
  double support() const { return 0.5 * h; }
  double operator()(double dx) const { return std::abs((*k)(dx / h)); }
};

struct PairAxis {
  const ConvolutionProfile* p;
  double support() const { return p->support_half_width(); }
  double operator()(double dx) const { return (*p)(dx); }
};

template <class Axis>
void check_coverage(const Dataset& data, const std::vector<int>& block,
                    const std::vector<Axis>& axes,
                    const EvaluationGrid& grid) {
  if (grid.dim() != data.dim()) {
    throw ArgumentError("fit: grid and data dimensions differ");
  }
  for (std::size_t k = 0; k < block.size(); ++k) {
    const int j = block[k];
    const auto [mn, mx] = data.range(j);
    const double s = axes[k].support();
    if (grid.lo(j) > mn - s || grid.hi(j) < mx + s) {
      throw ArgumentError(
          "fit: grid does not cover the data hull plus kernel support on "
          "axis " +
          std::to_string(j + 1) + "; the sup-norm proxy would be invalid");
    }
  }
}

// Fast path: for each sample, touch only the nodes inside its support box.
// Accumulation at every node happens in ascending sample order, identical
// to the brute-force loop, so both paths produce the same doubles.
template <class Axis>
BlockTablePtr scatter_fit(const Dataset& data, const std::vector<int>& block,
                          const std::vector<Axis>& axes, double scale,
                          std::shared_ptr<const EvaluationGrid> grid) {
  check_coverage(data, block, axes, *grid);
  auto table = std::make_shared<BlockTable>(block, grid);
  const std::size_t m = block.size();
  const std::size_t n = data.size();

  std::vector<std::vector<double>> vals(m);
  std::vector<std::size_t> first(m), count(m), cursor(m);

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < m; ++k) {
      const int j = block[k];
      const double x = data(i, j);
      const double lo = grid->lo(j);
      const double step = grid->step(j);
      const double s = axes[k].support();
      const auto node_count = static_cast<long>(grid->nodes(j));
      // Generous by one node on each side: borderline nodes evaluate to
      // exact zeros, which leave the accumulators untouched.
      long a = static_cast<long>(std::floor((x - s - lo) / step)) - 1;
      long b = static_cast<long>(std::ceil((x + s - lo) / step)) + 1;
      a = std::clamp<long>(a, 0, node_count - 1);
      b = std::clamp<long>(b, 0, node_count - 1);
      first[k] = static_cast<std::size_t>(a);
      count[k] = static_cast<std::size_t>(b - a + 1);
      auto& v = vals[k];
      v.resize(count[k]);
      const auto& nodes = grid->axis_nodes(j);
      for (std::size_t c = 0; c < count[k]; ++c) {
        v[c] = axes[k](x - nodes[first[k] + c]);
      }
    }
    if (m == 1) {
      double* out = &(*table)[first[0]];
      const double* v = vals[0].data();
      for (std::size_t c = 0; c < count[0]; ++c) out[c] += v[c];
    } else if (m == 2) {
      const std::size_t s0 = table->stride(0);
      for (std::size_t c0 = 0; c0 < count[0]; ++c0) {
        const double v0 = vals[0][c0];
        double* out = &(*table)[(first[0] + c0) * s0 + first[1]];
        const double* v1 = vals[1].data();
        for (std::size_t c1 = 0; c1 < count[1]; ++c1) {
          out[c1] += v0 * v1[c1];
        }
      }
    } else {
      std::fill(cursor.begin(), cursor.end(), 0);
      std::size_t flat = 0;
      for (std::size_t k = 0; k < m; ++k) flat += first[k] * table->stride(k);
      while (true) {
        double w = vals[0][cursor[0]];
        for (std::size_t k = 1; k < m; ++k) w *= vals[k][cursor[k]];
        (*table)[flat] += w;
        std::size_t k = m - 1;
        while (true) {
          ++cursor[k];
          flat += table->stride(k);
          if (cursor[k] < count[k]) break;
          flat -= table->stride(k) * count[k];
          cursor[k] = 0;
          if (k == 0) goto next_sample;
          --k;
        }
      }
    next_sample:;
    }
  }
  for (std::size_t f = 0; f < table->size(); ++f) (*table)[f] *= scale;
  return table;
}

// Reference path: all samples at every node, same scalar expressions.
template <class Axis>
BlockTablePtr brute_fit(const Dataset& data, const std::vector<int>& block,
                        const std::vector<Axis>& axes, double scale,
                        std::shared_ptr<const EvaluationGrid> grid) {
  check_coverage(data, block, axes, *grid);
  auto table = std::make_shared<BlockTable>(block, grid);
  const std::size_t m = block.size();
  const std::size_t n = data.size();
  std::vector<std::size_t> idx(m, 0);
  std::vector<double> node(m);
  for (std::size_t k = 0; k < m; ++k) node[k] = grid->node(block[k], 0);
  std::size_t flat = 0;
  while (true) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double w = axes[0](data(i, block[0]) - node[0]);
      for (std::size_t k = 1; k < m; ++k) {
        w *= axes[k](data(i, block[k]) - node[k]);
      }
      acc += w;
    }
    (*table)[flat] = acc * scale;
    ++flat;
    std::size_t k = m - 1;
    while (true) {
      ++idx[k];
      if (idx[k] < grid->nodes(block[k])) {
        node[k] = grid->node(block[k], idx[k]);
        break;
      }
      idx[k] = 0;
      node[k] = grid->node(block[k], 0);
      if (k == 0) return table;
      --k;
    }
  }
}

template <class Axis>
std::vector<Axis> plain_axes(const Kernel& k, const std::vector<int>& block,
                             std::span<const double> h_block) {
  if (h_block.size() != block.size()) {
    throw ArgumentError("fit: bandwidth block size mismatch");
  }
  std::vector<Axis> axes;
  axes.reserve(block.size());
  for (std::size_t kk = 0; kk < block.size(); ++kk) {
    const double h = h_block[kk];
    if (!(h > 0.0 && h <= 1.0)) {
      throw ArgumentError("fit: bandwidths must lie in (0, 1]");
    }
    axes.push_back(Axis{&k, h});
  }
  return axes;
}

double inv_scale(const Dataset& data, std::span<const double> h_block) {
  double v = 1.0;
  for (double h : h_block) v *= h;
  return 1.0 / (static_cast<double>(data.size()) * v);
}

}  // namespace

BlockTablePtr fit_marginal(const Dataset& data, const Kernel& k,
                           const std::vector<int>& block,
                           std::span<const double> h_block,
                           std::shared_ptr<const EvaluationGrid> grid) {
  return scatter_fit(data, block, plain_axes<PlainAxis>(k, block, h_block),
                     inv_scale(data, h_block), std::move(grid));
}

BlockTablePtr fit_marginal_bruteforce(
    const Dataset& data, const Kernel& k, const std::vector<int>& block,
    std::span<const double> h_block,
    std::shared_ptr<const EvaluationGrid> grid) {
  return brute_fit(data, block, plain_axes<PlainAxis>(k, block, h_block),
                   inv_scale(data, h_block), std::move(grid));
}

BlockTablePtr fit_abs_marginal(const Dataset& data, const Kernel& k,
                               const std::vector<int>& block,
                               std::span<const double> h_block,
                               std::shared_ptr<const EvaluationGrid> grid) {
  return scatter_fit(data, block, plain_axes<AbsAxis>(k, block, h_block),
                     inv_scale(data, h_block), std::move(grid));
}

BlockTablePtr fit_abs_marginal_bruteforce(
    const Dataset& data, const Kernel& k, const std::vector<int>& block,
    std::span<const double> h_block,
    std::shared_ptr<const EvaluationGrid> grid) {
  return brute_fit(data, block, plain_axes<AbsAxis>(k, block, h_block),
                   inv_scale(data, h_block), std::move(grid));
}

namespace {

std::vector<PairAxis> pair_axes(
    const std::vector<int>& block,
    const std::vector<std::shared_ptr<const ConvolutionProfile>>& profiles) {
  if (profiles.size() != block.size()) {
    throw ArgumentError("pair fit: one profile per block axis required");
  }
  std::vector<PairAxis> axes;
  axes.reserve(block.size());
  for (const auto& p : profiles) {
    if (!p) throw ArgumentError("pair fit: null profile");
    axes.push_back(PairAxis{p.get()});
  }
  return axes;
}

}  // namespace

BlockTablePtr fit_pair_marginal(
    const Dataset& data, const std::vector<int>& block,
    const std::vector<std::shared_ptr<const ConvolutionProfile>>& profiles,
    std::shared_ptr<const EvaluationGrid> grid) {
  return scatter_fit(data, block, pair_axes(block, profiles),
                     1.0 / static_cast<double>(data.size()), std::move(grid));
}

BlockTablePtr fit_pair_marginal_bruteforce(
    const Dataset& data, const std::vector<int>& block,
    const std::vector<std::shared_ptr<const ConvolutionProfile>>& profiles,
    std::shared_ptr<const EvaluationGrid> grid) {
  return brute_fit(data, block, pair_axes(block, profiles),
                   1.0 / static_cast<double>(data.size()), std::move(grid));
}

FittedEstimator::FittedEstimator(std::shared_ptr<const EvaluationGrid> grid,
                                 std::vector<BlockTablePtr> tables)
    : grid_(std::move(grid)), tables_(std::move(tables)) {
  std::vector<bool> covered(static_cast<std::size_t>(grid_->dim()), false);
  for (const auto& t : tables_) {
    if (!t) throw ArgumentError("fitted estimator: null table");
    if (!t->grid().same_axes(*grid_)) {
      throw ArgumentError("fitted estimator: tables on different grids");
    }
    for (int j : t->block()) {
      if (covered[static_cast<std::size_t>(j)]) {
        throw ArgumentError("fitted estimator: overlapping blocks");
      }
      covered[static_cast<std::size_t>(j)] = true;
    }
  }
  for (bool c : covered) {
    if (!c) throw ArgumentError("fitted estimator: blocks do not cover axes");
  }
}

double FittedEstimator::value(std::span<const std::size_t> multi) const {
  double prod = 1.0;
  for (const auto& t : tables_) {
    std::size_t flat = 0;
    for (std::size_t k = 0; k < t->block().size(); ++k) {
      flat += multi[static_cast<std::size_t>(t->block()[k])] * t->stride(k);
    }
    prod *= (*t)[flat];
  }
  return prod;
}

std::vector<double> FittedEstimator::materialize() const {
  if (grid_->dim() > 3) {
    throw ArgumentError("materialize: supported for d <= 3 only");
  }
  std::vector<double> out(grid_->total_nodes());
  const int d = grid_->dim();
  std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    out[flat] = value(idx);
    for (int ax = d - 1; ax >= 0; --ax) {
      if (++idx[static_cast<std::size_t>(ax)] <
          grid_->nodes(ax)) {
        break;
      }
      idx[static_cast<std::size_t>(ax)] = 0;
    }
  }
  return out;
}

namespace {

// Walks the full grid in row-major order while tracking each block
// table's flat offset incrementally.
class ProductCursor {
 public:
  explicit ProductCursor(const FittedEstimator& e) {
    const auto& g = e.grid();
    const auto d = static_cast<std::size_t>(g.dim());
    for (const auto& t : e.tables()) {
      Entry en;
      en.values = t->values().data();
      en.flat = 0;
      en.stride.assign(d, 0);
      en.rewind.assign(d, 0);
      for (std::size_t k = 0; k < t->block().size(); ++k) {
        const auto ax = static_cast<std::size_t>(t->block()[k]);
        en.stride[ax] = t->stride(k);
        en.rewind[ax] = t->stride(k) * (g.nodes(static_cast<int>(ax)) - 1);
      }
      entries_.push_back(std::move(en));
    }
  }

  double value() const {
    double v = entries_[0].values[entries_[0].flat];
    for (std::size_t t = 1; t < entries_.size(); ++t) {
      v *= entries_[t].values[entries_[t].flat];
    }
    return v;
  }

  void advance(std::size_t ax) {
    for (auto& e : entries_) e.flat += e.stride[ax];
  }
  void rewind(std::size_t ax) {
    for (auto& e : entries_) e.flat -= e.rewind[ax];
  }

 private:
  struct Entry {
    const double* values;
    std::size_t flat;
    std::vector<std::size_t> stride;
    std::vector<std::size_t> rewind;
  };
  std::vector<Entry> entries_;
};

template <class Visit>
void sweep(const EvaluationGrid& grid, std::span<ProductCursor*> cursors,
           Visit&& visit) {
  const auto d = static_cast<std::size_t>(grid.dim());
  std::vector<std::size_t> idx(d, 0);
  std::size_t flat = 0;
  while (true) {
    visit(flat);
    std::size_t ax = d;
    bool done = false;
    while (true) {
      if (ax == 0) {
        done = true;
        break;
      }
      --ax;
      ++idx[ax];
      if (idx[ax] < grid.nodes(static_cast<int>(ax))) {
        for (auto* c : cursors) c->advance(ax);
        break;
      }
      idx[ax] = 0;
      for (auto* c : cursors) c->rewind(ax);
    }
    if (done) break;
    ++flat;
  }
}

void require_same_grid(const FittedEstimator& a, const FittedEstimator& b) {
  if (!a.grid().same_axes(b.grid())) {
    throw ArgumentError("sup-norm: estimators live on different grids");
  }
}

}  // namespace

double sup_norm_diff(const FittedEstimator& a, const FittedEstimator& b) {
  require_same_grid(a, b);
  ProductCursor ca(a), cb(b);
  ProductCursor* cursors[] = {&ca, &cb};
  double best = 0.0;
  sweep(a.grid(), cursors, [&](std::size_t) {
    best = std::max(best, std::abs(ca.value() - cb.value()));
  });
  return best;
}

PairSupDiff sup_norm_diff2(const FittedEstimator& pair_estimator,
                           const FittedEstimator& first,
                           const FittedEstimator& second) {
  require_same_grid(pair_estimator, first);
  require_same_grid(pair_estimator, second);
  ProductCursor cp(pair_estimator), c1(first), c2(second);
  ProductCursor* cursors[] = {&cp, &c1, &c2};
  PairSupDiff out;
  sweep(pair_estimator.grid(), cursors, [&](std::size_t) {
    const double v = cp.value();
    out.vs_first = std::max(out.vs_first, std::abs(v - c1.value()));
    out.vs_second = std::max(out.vs_second, std::abs(v - c2.value()));
  });
  return out;
}

double sup_norm_error(const FittedEstimator& est,
                      std::span<const double> truth_table) {
  if (truth_table.size() != est.grid().total_nodes()) {
    throw ArgumentError("sup_norm_error: truth table size mismatch");
  }
  ProductCursor c(est);
  ProductCursor* cursors[] = {&c};
  double best = 0.0;
  sweep(est.grid(), cursors, [&](std::size_t flat) {
    best = std::max(best, std::abs(c.value() - truth_table[flat]));
  });
  return best;
}

std::vector<double> tabulate_on_grid(
    const EvaluationGrid& grid,
    const std::function<double(std::span<const double>)>& f) {
  const auto d = static_cast<std::size_t>(grid.dim());
  std::vector<double> out(grid.total_nodes());
  std::vector<std::size_t> idx(d, 0);
  std::vector<double> coords(d);
  for (std::size_t k = 0; k < d; ++k) {
    coords[k] = grid.node(static_cast<int>(k), 0);
  }
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    out[flat] = f(coords);
    for (std::size_t ax = d; ax-- > 0;) {
      ++idx[ax];
      if (idx[ax] < grid.nodes(static_cast<int>(ax))) {
        coords[ax] = grid.node(static_cast<int>(ax), idx[ax]);
        break;
      }
      idx[ax] = 0;
      coords[ax] = grid.node(static_cast<int>(ax), 0);
    }
  }
  return out;
}

EmpiricalSup empirical_f_n(const Dataset& data, const Kernel& k,
                           const std::vector<BandwidthVector>& bandwidths,
                           std::shared_ptr<const EvaluationGrid> grid) {
  if (bandwidths.empty()) {
    throw ArgumentError("empirical_f_n: empty bandwidth grid");
  }
  const int d = data.dim();
  if (d > 16) throw ArgumentError("empirical_f_n: d > 16 not supported");
  EmpiricalSup out;
  for (std::uint32_t mask = 1; mask < (1u << d); ++mask) {
    std::vector<int> block;
    for (int j = 0; j < d; ++j) {
      if (mask & (1u << j)) block.push_back(j);
    }
    std::set<std::vector<double>> restrictions;
    for (const auto& h : bandwidths) restrictions.insert(h.restrict_to(block));
    for (const auto& hb : restrictions) {
      const auto table = fit_abs_marginal(data, k, block, hb, grid);
      out.f_n = std::max(out.f_n, table->max_value());
    }
  }
  out.f_bar_n = std::max(1.0, 2.0 * out.f_n);
  return out;
}

double A_hat(double f_bar_n, const BandwidthVector& h, const Partition& p,
             std::size_t n) {
  if (n < 3) throw ArgumentError("A_hat: need n >= 3");
  if (!(f_bar_n >= 1.0)) throw ArgumentError("A_hat: need f_bar_n >= 1");
  const double v = h.min_block_volume(p);
  return std::sqrt(f_bar_n * std::log(static_cast<double>(n)) /
                   (static_cast<double>(n) * v));
}

BlockTablePtr TableCache::get_or_build(
    const Key& key, const std::function<BlockTablePtr()>& build) {
  {
    std::shared_lock lock(mu_);
    if (auto it = map_.find(key); it != map_.end()) return it->second;
  }
  auto fresh = build();
  std::unique_lock lock(mu_);
  auto [it, inserted] = map_.emplace(key, std::move(fresh));
  (void)inserted;
  return it->second;
}

std::size_t TableCache::size() const {
  std::shared_lock lock(mu_);
  return map_.size();
}

}  // namespace supkde
