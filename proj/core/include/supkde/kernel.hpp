#pragma once

#include <functional>
#include <map>
#include <memory>
#include <shared_mutex>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace supkde {

/// A univariate kernel: unit integral, supported on [-1/2, 1/2], symmetric,
/// Lipschitz, optionally with vanishing moments 2..moment_order.
///
/// The library's own kernels are even polynomials vanishing at the support
/// boundary; arbitrary evaluators are accepted for checking purposes.
class Kernel {
 public:
  /// Even polynomial kernel with vanishing moments up to `moment_order`.
  /// Coefficients solve the linear moment system: unit integral, zero even
  /// moments 2..moment_order, zero value at t = 1/2.
  static Kernel polynomial(int moment_order);

  /// Wraps an arbitrary evaluator; constants are measured numerically.
  static Kernel from_function(std::function<double(double)> f,
                              int moment_order = 1);

  static Kernel from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;  // polynomial kernels only

  /// K(t); exactly zero for |t| > 1/2.
  double operator()(double t) const { return eval_(t); }

  int moment_order() const noexcept { return moment_order_; }
  double lipschitz() const noexcept { return lipschitz_; }   // probed
  double sup_norm() const noexcept { return sup_norm_; }     // k_inf
  double l1_norm() const noexcept { return l1_norm_; }       // k_1
  double integral() const noexcept { return integral_; }
  bool is_polynomial() const noexcept { return !coeff_.empty(); }
  /// Coefficients of the even powers 1, t^2, t^4, ... (empty if wrapped).
  const std::vector<double>& even_coefficients() const noexcept {
    return coeff_;
  }

 private:
  Kernel() = default;
  void measure();

  std::function<double(double)> eval_;
  std::vector<double> coeff_;
  int moment_order_ = 1;
  double lipschitz_ = 0.0;
  double sup_norm_ = 0.0;
  double l1_norm_ = 0.0;
  double integral_ = 0.0;
};

/// Report of the kernel admissibility checks; report-only, never throws.
struct AssumptionReport {
  double integral = 0.0;
  bool integral_ok = false;       // |integral - 1| <= 1e-10
  bool support_ok = false;        // zero outside [-1/2, 1/2]
  bool symmetric_ok = false;      // K(t) == K(-t) on the probe grid
  double probed_lipschitz = 0.0;  // max slope on a 10^4-point grid
  bool lipschitz_ok = false;      // probe stable under grid refinement
  double sup_norm = 0.0;
  double l1_norm = 0.0;
  std::vector<double> moments;    // moments 1..moment_order
  bool moments_ok = false;        // |moment m| <= 1e-8 for m = 2..order
  bool all_ok() const {
    return integral_ok && support_ok && symmetric_ok && lipschitz_ok &&
           moments_ok;
  }
  nlohmann::json to_json() const;
};

AssumptionReport check_assumptions(const Kernel& k);

/// Product kernel K_h(u) = V^-1 prod_j K(u_j / h_j) over one block.
/// Zero as soon as any |u_j| exceeds h_j / 2.
double product_kernel_value(const Kernel& k, std::span<const double> h_block,
                            std::span<const double> u);

/// Tabulated convolution K_h * K_eta of two scaled copies of one kernel.
///
/// Values are computed by Gauss-Legendre quadrature over the exact support
/// overlap (exact for polynomial kernels) at `nodes` uniform arguments
/// spanning [-(h+eta)/2, (h+eta)/2]; evaluation interpolates linearly.
class ConvolutionProfile {
 public:
  ConvolutionProfile(const Kernel& k, double h, double eta, int nodes);

  /// Interpolated value; exactly zero outside the support.
  double operator()(double z) const;

  /// Quadrature value at an arbitrary argument (no table involved).
  double exact_at(double z) const;

  double support_half_width() const noexcept { return half_width_; }
  double h() const noexcept { return h_; }
  double eta() const noexcept { return eta_; }
  /// Integral of the convolution, evaluated piecewise-exactly.
  double mass() const noexcept { return mass_; }
  const std::vector<double>& values() const noexcept { return values_; }

 private:
  Kernel kernel_;
  double h_ = 0.0;
  double eta_ = 0.0;
  double half_width_ = 0.0;
  double step_ = 0.0;
  double mass_ = 0.0;
  std::vector<double> values_;
};

/// Per-axis cache of convolution profiles keyed by the unordered pair
/// {h, eta}. Read-mostly; concurrent fills of the same key are idempotent.
class ConvolutionCache {
 public:
  explicit ConvolutionCache(Kernel k, int nodes_per_profile = 2049);

  std::shared_ptr<const ConvolutionProfile> get(double h, double eta);
  const Kernel& kernel() const noexcept { return kernel_; }
  int nodes_per_profile() const noexcept { return nodes_; }

 private:
  Kernel kernel_;
  int nodes_;
  mutable std::shared_mutex mu_;
  std::map<std::pair<double, double>,
           std::shared_ptr<const ConvolutionProfile>>
      map_;
};

}  // namespace supkde
