#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "supkde/dataset.hpp"
#include "supkde/partition.hpp"
#include "supkde/rng.hpp"

namespace supkde {

/// The zero-mean bump profile: odd, integral exactly zero, supported in
/// (-1/2, 1/2) strictly (it vanishes outside [-0.49, 0.49]).
double bump_profile(double t);

/// Product of per-block multivariate Gaussians, optionally with a
/// zero-mass bump perturbation on one diagonal block. Every marginal has a
/// closed form and the density factorizes exactly over `true_partition`.
class SyntheticDensity {
 public:
  struct GaussianBlockSpec {
    std::vector<int> axes;    // 0-based, sorted
    std::vector<double> cov;  // row-major |axes| x |axes|
  };

  /// Perturbation sum_j A prod_l g((x_l - c_jl) / delta_l) on `axes`;
  /// centers must keep the bump supports pairwise disjoint.
  struct BumpSpec {
    std::vector<int> axes;
    double amplitude = 0.0;
    std::vector<double> scales;                 // delta_l per axis
    std::vector<std::vector<double>> centers;   // one point per bump
  };

  /// Independent coordinates: N(0, sigma_j^2) per axis.
  static SyntheticDensity product_gaussian(std::vector<double> sigma);

  /// Product of multivariate Gaussian blocks (covers correlated blocks).
  static SyntheticDensity custom_product(
      int d, std::vector<GaussianBlockSpec> blocks);

  /// Independent Gaussians with a bump perturbation on `bump.axes`.
  static SyntheticDensity gaussian_with_bumps(std::vector<double> sigma,
                                              BumpSpec bump);

  int dim() const noexcept { return dim_; }
  const Partition& true_partition() const noexcept { return *p_true_; }
  const std::string& kind() const noexcept { return kind_; }

  double operator()(std::span<const double> x) const;
  /// Marginal density f_I; any strict sub-marginal of the bump block
  /// loses the perturbation because the profile integrates to zero.
  double marginal(const std::vector<int>& block,
                  std::span<const double> x_block) const;

  std::vector<double> sample(Rng& rng) const;
  Dataset sample_dataset(std::size_t n, Rng& rng) const;

  /// 1 / envelope constant of the bump rejection sampler (1 if no bump).
  double rejection_efficiency() const noexcept { return efficiency_; }

  /// Box carrying all but ~1e-12 of the mass, per axis.
  const std::vector<double>& box_lo() const noexcept { return box_lo_; }
  const std::vector<double>& box_hi() const noexcept { return box_hi_; }

  /// Mass of the density by adaptive quadrature over the box.
  double mass_quadrature(double tol = 1e-6) const;

  nlohmann::json to_json() const;
  static SyntheticDensity from_json(const nlohmann::json& j);

 private:
  struct Block;  // resolved Gaussian block (cholesky, inverses)
  SyntheticDensity() = default;
  void finalize();  // builds boxes, envelope, true partition
  double bump_value(std::span<const double> x_block) const;

  int dim_ = 0;
  std::string kind_;
  std::vector<std::shared_ptr<const Block>> blocks_;
  BumpSpec bump_;
  bool has_bump_ = false;
  double envelope_ = 1.0;    // sup f_I* / N_I* over the bump support
  double efficiency_ = 1.0;  // 1 / envelope
  std::shared_ptr<const Partition> p_true_;
  std::vector<double> box_lo_, box_hi_;
};

}  // namespace supkde
