#include "supkde/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "supkde/errors.hpp"
#include "supkde/quadrature.hpp"

namespace supkde {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kBumpShrink = 0.98;  // keeps supp(g) strictly inside (-1/2,1/2)
}  // namespace

double bump_profile(double t) {
  const double u = t / kBumpShrink;
  if (std::abs(u) > 0.5) return 0.0;
  const double q = 1.0 - 4.0 * u * u;
  return std::sin(kTwoPi * u) * q * q;
}

struct SyntheticDensity::Block {
  std::vector<int> axes;
  Eigen::MatrixXd cov;
  Eigen::MatrixXd chol;  // lower-triangular factor for sampling

  struct SubGaussian {
    std::vector<double> inv;  // row-major m x m
    double norm = 0.0;        // (2 pi)^(-m/2) det^(-1/2)
    int m = 0;
  };
  mutable std::map<std::vector<int>, SubGaussian> sub_cache;
  mutable std::mutex mu;

  const SubGaussian& sub(const std::vector<int>& positions) const {
    std::lock_guard<std::mutex> lock(mu);
    auto it = sub_cache.find(positions);
    if (it != sub_cache.end()) return it->second;
    const int m = static_cast<int>(positions.size());
    Eigen::MatrixXd c(m, m);
    for (int r = 0; r < m; ++r) {
      for (int s = 0; s < m; ++s) {
        c(r, s) = cov(positions[static_cast<std::size_t>(r)],
                      positions[static_cast<std::size_t>(s)]);
      }
    }
    SubGaussian sg;
    sg.m = m;
    const double det = c.determinant();
    if (!(det > 0.0)) {
      throw ArgumentError("synthetic density: covariance sub-block not SPD");
    }
    const Eigen::MatrixXd inv = c.inverse();
    sg.inv.resize(static_cast<std::size_t>(m * m));
    for (int r = 0; r < m; ++r) {
      for (int s = 0; s < m; ++s) {
        sg.inv[static_cast<std::size_t>(r * m + s)] = inv(r, s);
      }
    }
    sg.norm = std::pow(kTwoPi, -0.5 * m) / std::sqrt(det);
    auto [ins, _] = sub_cache.emplace(positions, std::move(sg));
    return ins->second;
  }

  double density(const std::vector<int>& positions,
                 std::span<const double> x) const {
    const auto& sg = sub(positions);
    double quad = 0.0;
    for (int r = 0; r < sg.m; ++r) {
      for (int s = 0; s < sg.m; ++s) {
        quad += x[static_cast<std::size_t>(r)] *
                sg.inv[static_cast<std::size_t>(r * sg.m + s)] *
                x[static_cast<std::size_t>(s)];
      }
    }
    return sg.norm * std::exp(-0.5 * quad);
  }
};

SyntheticDensity SyntheticDensity::product_gaussian(
    std::vector<double> sigma) {
  std::vector<GaussianBlockSpec> blocks;
  blocks.reserve(sigma.size());
  for (std::size_t j = 0; j < sigma.size(); ++j) {
    if (!(sigma[j] > 0.0)) {
      throw ArgumentError("product_gaussian: sigma must be positive");
    }
    blocks.push_back(GaussianBlockSpec{{static_cast<int>(j)},
                                       {sigma[j] * sigma[j]}});
  }
  auto out = custom_product(static_cast<int>(sigma.size()), std::move(blocks));
  out.kind_ = "product_gaussian";
  return out;
}

SyntheticDensity SyntheticDensity::custom_product(
    int d, std::vector<GaussianBlockSpec> specs) {
  SyntheticDensity out;
  out.dim_ = d;
  out.kind_ = "custom_product";
  std::vector<std::vector<int>> partition_blocks;
  for (const auto& spec : specs) {
    const auto m = spec.axes.size();
    if (m == 0) throw ArgumentError("synthetic density: empty block");
    if (spec.cov.size() != m * m) {
      throw ArgumentError("synthetic density: covariance size mismatch");
    }
    auto block = std::make_shared<Block>();
    block->axes = spec.axes;
    std::sort(block->axes.begin(), block->axes.end());
    block->cov.resize(static_cast<int>(m), static_cast<int>(m));
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t s = 0; s < m; ++s) {
        block->cov(static_cast<int>(r), static_cast<int>(s)) =
            spec.cov[r * m + s];
      }
    }
    if (!block->cov.isApprox(block->cov.transpose(), 1e-12)) {
      throw ArgumentError("synthetic density: covariance not symmetric");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(block->cov);
    if (llt.info() != Eigen::Success) {
      throw ArgumentError("synthetic density: covariance not positive "
                          "definite");
    }
    block->chol = llt.matrixL();
    partition_blocks.push_back(block->axes);
    out.blocks_.push_back(std::move(block));
  }
  out.p_true_ = std::make_shared<const Partition>(partition_blocks, d);
  out.finalize();
  return out;
}

SyntheticDensity SyntheticDensity::gaussian_with_bumps(
    std::vector<double> sigma, BumpSpec bump) {
  auto out = product_gaussian(sigma);
  out.kind_ = "gaussian_with_bumps";
  if (bump.axes.empty()) {
    throw ArgumentError("bump: needs at least one axis");
  }
  std::sort(bump.axes.begin(), bump.axes.end());
  for (int a : bump.axes) {
    if (a < 0 || a >= out.dim_) throw ArgumentError("bump: axis out of range");
  }
  if (bump.scales.size() != bump.axes.size()) {
    throw ArgumentError("bump: one scale per axis required");
  }
  for (double s : bump.scales) {
    if (!(s > 0.0)) throw ArgumentError("bump: scales must be positive");
  }
  if (bump.centers.empty()) throw ArgumentError("bump: no centers given");
  for (const auto& c : bump.centers) {
    if (c.size() != bump.axes.size()) {
      throw ArgumentError("bump: center dimension mismatch");
    }
  }
  if (!(bump.amplitude >= 0.0)) {
    throw ArgumentError("bump: amplitude must be nonnegative");
  }
  // Pairwise-disjoint supports: separated by >= 0.98 delta on some axis.
  for (std::size_t a = 0; a < bump.centers.size(); ++a) {
    for (std::size_t b = a + 1; b < bump.centers.size(); ++b) {
      bool disjoint = false;
      for (std::size_t l = 0; l < bump.axes.size(); ++l) {
        if (std::abs(bump.centers[a][l] - bump.centers[b][l]) >=
            kBumpShrink * bump.scales[l]) {
          disjoint = true;
          break;
        }
      }
      if (!disjoint) {
        throw ArgumentError("bump: centers " + std::to_string(a) + " and " +
                            std::to_string(b) + " have overlapping supports");
      }
    }
  }
  out.bump_ = std::move(bump);
  out.has_bump_ = true;

  // True partition: bump axes form one block, the rest stay singletons.
  std::vector<std::vector<int>> pblocks;
  pblocks.push_back(out.bump_.axes);
  for (int j = 0; j < out.dim_; ++j) {
    if (!std::binary_search(out.bump_.axes.begin(), out.bump_.axes.end(), j)) {
      pblocks.push_back({j});
    }
  }
  out.p_true_ = std::make_shared<const Partition>(pblocks, out.dim_);
  out.finalize();
  return out;
}

void SyntheticDensity::finalize() {
  box_lo_.assign(static_cast<std::size_t>(dim_), 0.0);
  box_hi_.assign(static_cast<std::size_t>(dim_), 0.0);
  for (const auto& block : blocks_) {
    for (std::size_t k = 0; k < block->axes.size(); ++k) {
      const double sd = std::sqrt(block->cov(static_cast<int>(k),
                                             static_cast<int>(k)));
      const auto j = static_cast<std::size_t>(block->axes[k]);
      box_lo_[j] = -7.5 * sd;
      box_hi_[j] = 7.5 * sd;
    }
  }
  if (!has_bump_) {
    efficiency_ = 1.0;
    envelope_ = 1.0;
    return;
  }
  for (std::size_t l = 0; l < bump_.axes.size(); ++l) {
    const auto j = static_cast<std::size_t>(bump_.axes[l]);
    for (const auto& c : bump_.centers) {
      box_lo_[j] = std::min(box_lo_[j], c[l] - 0.5 * bump_.scales[l]);
      box_hi_[j] = std::max(box_hi_[j], c[l] + 0.5 * bump_.scales[l]);
    }
  }
  // Probe every bump box: positivity of N + B and the rejection envelope.
  const std::size_t m = bump_.axes.size();
  double max_ratio = 0.0;  // sup B/N
  double min_rel = 0.0;    // inf B/N
  const int probes_per_axis = 33;
  std::vector<double> y(m);
  for (const auto& c : bump_.centers) {
    std::vector<std::size_t> idx(m, 0);
    while (true) {
      for (std::size_t l = 0; l < m; ++l) {
        y[l] = c[l] + bump_.scales[l] *
                          (-0.49 + 0.98 * static_cast<double>(idx[l]) /
                                       (probes_per_axis - 1));
      }
      double gauss = 1.0;
      for (std::size_t l = 0; l < m; ++l) {
        const auto* blk = blocks_[static_cast<std::size_t>(
                                      bump_.axes[l])].get();
        gauss *= blk->density({0}, std::span<const double>(&y[l], 1));
      }
      const double ratio = bump_value(y) / gauss;
      max_ratio = std::max(max_ratio, ratio);
      min_rel = std::min(min_rel, ratio);
      std::size_t l = m;
      bool done = true;
      while (l-- > 0) {
        if (++idx[l] < static_cast<std::size_t>(probes_per_axis)) {
          done = false;
          break;
        }
        idx[l] = 0;
      }
      if (done) break;
    }
  }
  if (min_rel < -1.0) {
    throw ArgumentError(
        "bump: density goes negative (min 1 + B/N = " +
        std::to_string(1.0 + min_rel) + "); reduce the amplitude");
  }
  envelope_ = 1.0 + std::max(0.0, max_ratio);
  efficiency_ = 1.0 / envelope_;
  if (efficiency_ < 0.01) {
    throw ArgumentError(
        "bump: rejection sampling efficiency " + std::to_string(efficiency_) +
        " < 1%; reduce the amplitude or widen the base density");
  }
}

double SyntheticDensity::bump_value(std::span<const double> x_block) const {
  double total = 0.0;
  for (const auto& c : bump_.centers) {
    double prod = bump_.amplitude;
    for (std::size_t l = 0; l < bump_.axes.size(); ++l) {
      prod *= bump_profile((x_block[l] - c[l]) / bump_.scales[l]);
      if (prod == 0.0) break;
    }
    total += prod;
  }
  return total;
}

double SyntheticDensity::marginal(const std::vector<int>& block,
                                  std::span<const double> x_block) const {
  if (block.size() != x_block.size()) {
    throw ArgumentError("marginal: block/point size mismatch");
  }
  // Gaussian part: product over density blocks of their sub-marginals.
  double gauss = 1.0;
  for (const auto& blk : blocks_) {
    std::vector<int> positions;
    std::vector<double> coords;
    for (std::size_t k = 0; k < blk->axes.size(); ++k) {
      const auto it =
          std::find(block.begin(), block.end(), blk->axes[k]);
      if (it != block.end()) {
        positions.push_back(static_cast<int>(k));
        coords.push_back(x_block[static_cast<std::size_t>(
            it - block.begin())]);
      }
    }
    if (!positions.empty()) gauss *= blk->density(positions, coords);
  }
  if (!has_bump_) return gauss;
  // The bump survives only if the whole bump block is kept: integrating
  // out any of its axes kills the term (the profile has zero mass).
  const bool contains_bump = std::includes(
      block.begin(), block.end(), bump_.axes.begin(), bump_.axes.end());
  if (!contains_bump) return gauss;
  std::vector<double> xb(bump_.axes.size());
  double gauss_outside = 1.0;
  for (std::size_t i = 0; i < block.size(); ++i) {
    const int j = block[i];
    const auto it =
        std::find(bump_.axes.begin(), bump_.axes.end(), j);
    if (it != bump_.axes.end()) {
      xb[static_cast<std::size_t>(it - bump_.axes.begin())] = x_block[i];
    } else {
      const auto* blk = blocks_[static_cast<std::size_t>(j)].get();
      gauss_outside *=
          blk->density({0}, std::span<const double>(&x_block[i], 1));
    }
  }
  return gauss + bump_value(xb) * gauss_outside;
}

double SyntheticDensity::operator()(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim_) {
    throw ArgumentError("density: point dimension mismatch");
  }
  // Computed as the product of the true-partition block marginals, so the
  // factorization over p_true holds bit-for-bit.
  double prod = 1.0;
  std::vector<double> xb;
  for (const auto& b : p_true_->blocks()) {
    xb.clear();
    for (int j : b) xb.push_back(x[static_cast<std::size_t>(j)]);
    prod *= marginal(b, xb);
  }
  return prod;
}

std::vector<double> SyntheticDensity::sample(Rng& rng) const {
  std::vector<double> x(static_cast<std::size_t>(dim_), 0.0);
  std::vector<bool> filled(static_cast<std::size_t>(dim_), false);
  if (has_bump_) {
    // Rejection against the Gaussian envelope on the bump block.
    const std::size_t m = bump_.axes.size();
    std::vector<double> y(m);
    long attempts = 0;
    while (true) {
      if (++attempts > 200000) {
        throw QuadratureError(
            "bump rejection sampler: acceptance stalled; change the bump "
            "parameters");
      }
      double gauss = 1.0;
      for (std::size_t l = 0; l < m; ++l) {
        const auto* blk =
            blocks_[static_cast<std::size_t>(bump_.axes[l])].get();
        const double sd = std::sqrt(blk->cov(0, 0));
        y[l] = sd * rng.normal();
        gauss *= blk->density({0}, std::span<const double>(&y[l], 1));
      }
      const double accept = (1.0 + bump_value(y) / gauss) / envelope_;
      if (rng.uniform01() < accept) break;
    }
    for (std::size_t l = 0; l < m; ++l) {
      const auto j = static_cast<std::size_t>(bump_.axes[l]);
      x[j] = y[l];
      filled[j] = true;
    }
  }
  for (const auto& blk : blocks_) {
    if (filled[static_cast<std::size_t>(blk->axes.front())]) continue;
    const auto m = static_cast<int>(blk->axes.size());
    Eigen::VectorXd z(m);
    for (int k = 0; k < m; ++k) z(k) = rng.normal();
    const Eigen::VectorXd v = blk->chol * z;
    for (int k = 0; k < m; ++k) {
      x[static_cast<std::size_t>(blk->axes[static_cast<std::size_t>(k)])] =
          v(k);
    }
  }
  return x;
}

Dataset SyntheticDensity::sample_dataset(std::size_t n, Rng& rng) const {
  std::vector<double> data(n * static_cast<std::size_t>(dim_));
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = sample(rng);
    for (int j = 0; j < dim_; ++j) {
      data[static_cast<std::size_t>(j) * n + i] =
          x[static_cast<std::size_t>(j)];
    }
  }
  return Dataset(n, dim_, std::move(data));
}

double SyntheticDensity::mass_quadrature(double tol) const {
  return integrate_box(
      [this](std::span<const double> x) { return (*this)(x); }, box_lo_,
      box_hi_, tol);
}

nlohmann::json SyntheticDensity::to_json() const {
  nlohmann::json out;
  out["kind"] = kind_;
  out["dim"] = dim_;
  if (kind_ == "custom_product") {
    nlohmann::json jblocks = nlohmann::json::array();
    for (const auto& blk : blocks_) {
      nlohmann::json jb;
      nlohmann::json axes = nlohmann::json::array();
      for (int a : blk->axes) axes.push_back(a + 1);
      jb["axes"] = axes;
      std::vector<double> cov;
      for (int r = 0; r < blk->cov.rows(); ++r) {
        for (int c = 0; c < blk->cov.cols(); ++c) {
          cov.push_back(blk->cov(r, c));
        }
      }
      jb["cov"] = cov;
      jblocks.push_back(std::move(jb));
    }
    out["blocks"] = std::move(jblocks);
  } else {
    std::vector<double> sigma(static_cast<std::size_t>(dim_), 0.0);
    for (const auto& blk : blocks_) {
      sigma[static_cast<std::size_t>(blk->axes.front())] =
          std::sqrt(blk->cov(0, 0));
    }
    out["sigma"] = sigma;
  }
  if (has_bump_) {
    nlohmann::json jb;
    nlohmann::json axes = nlohmann::json::array();
    for (int a : bump_.axes) axes.push_back(a + 1);
    jb["axes"] = axes;
    jb["amplitude"] = bump_.amplitude;
    jb["scales"] = bump_.scales;
    jb["centers"] = bump_.centers;
    out["bump"] = std::move(jb);
  }
  return out;
}

SyntheticDensity SyntheticDensity::from_json(const nlohmann::json& j) {
  if (!j.contains("kind")) throw FormatError("density JSON: missing 'kind'");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "product_gaussian") {
    return product_gaussian(j.at("sigma").get<std::vector<double>>());
  }
  if (kind == "custom_product") {
    const int d = j.at("dim").get<int>();
    std::vector<GaussianBlockSpec> specs;
    for (const auto& jb : j.at("blocks")) {
      GaussianBlockSpec s;
      for (const auto& a : jb.at("axes")) s.axes.push_back(a.get<int>() - 1);
      s.cov = jb.at("cov").get<std::vector<double>>();
      specs.push_back(std::move(s));
    }
    return custom_product(d, std::move(specs));
  }
  if (kind == "gaussian_with_bumps") {
    BumpSpec b;
    const auto& jb = j.at("bump");
    for (const auto& a : jb.at("axes")) b.axes.push_back(a.get<int>() - 1);
    b.amplitude = jb.at("amplitude").get<double>();
    b.scales = jb.at("scales").get<std::vector<double>>();
    b.centers = jb.at("centers").get<std::vector<std::vector<double>>>();
    return gaussian_with_bumps(j.at("sigma").get<std::vector<double>>(),
                               std::move(b));
  }
  throw FormatError("density JSON: unknown kind '" + kind + "'");
}

}  // namespace supkde
