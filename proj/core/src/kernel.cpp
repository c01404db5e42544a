#include "supkde/kernel.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "supkde/errors.hpp"

namespace supkde {

namespace {

constexpr int kLipschitzProbePoints = 10000;

// Even polynomial in t evaluated through s = t*t, so K(-t) == K(t) holds
// bit-exactly.
double poly_eval(const std::vector<double>& coeff, double t) {
  if (std::abs(t) > 0.5) return 0.0;
  const double s = t * t;
  double acc = 0.0;
  for (std::size_t i = coeff.size(); i-- > 0;) acc = acc * s + coeff[i];
  return acc;
}

// integral of t^m * t^(2i) over [-1/2, 1/2] for even m (odd ones vanish).
double even_moment_integral(int m, int i) {
  const int p = m + 2 * i;
  return std::pow(0.5, p) / static_cast<double>(p + 1);
}

double probe_max_slope(const std::function<double(double)>& f, int points) {
  // Probe a hair beyond the support to catch boundary jumps.
  const double lo = -0.51, hi = 0.51;
  const double step = (hi - lo) / (points - 1);
  double worst = 0.0;
  double prev = f(lo);
  for (int i = 1; i < points; ++i) {
    const double cur = f(lo + step * i);
    worst = std::max(worst, std::abs(cur - prev) / step);
    prev = cur;
  }
  return worst;
}

}  // namespace

Kernel Kernel::polynomial(int moment_order) {
  if (moment_order < 1 || moment_order > 12) {
    throw ArgumentError("polynomial kernel: need 1 <= moment_order <= 12");
  }
  // Unknowns: coefficients of 1, t^2, ..., t^(2(n-1)).
  // Rows: unit integral; vanishing even moments 2..moment_order; zero
  // boundary value at t = 1/2 (keeps the kernel Lipschitz on all of R).
  const int n_even_moments = moment_order / 2;
  const int n = n_even_moments + 2;
  Eigen::MatrixXd A(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) A(0, i) = even_moment_integral(0, i);
  b(0) = 1.0;
  for (int r = 1; r <= n_even_moments; ++r) {
    for (int i = 0; i < n; ++i) A(r, i) = even_moment_integral(2 * r, i);
  }
  for (int i = 0; i < n; ++i) A(n - 1, i) = std::pow(0.25, i);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (!lu.isInvertible()) {
    throw ArgumentError("polynomial kernel: singular moment system");
  }
  const Eigen::VectorXd c = lu.solve(b);

  Kernel k;
  k.coeff_.assign(c.data(), c.data() + n);
  k.moment_order_ = moment_order;
  auto coeff = k.coeff_;
  k.eval_ = [coeff](double t) { return poly_eval(coeff, t); };
  k.measure();
  return k;
}

Kernel Kernel::from_function(std::function<double(double)> f,
                             int moment_order) {
  if (!f) throw ArgumentError("kernel evaluator must be callable");
  if (moment_order < 1) throw ArgumentError("moment_order must be >= 1");
  Kernel k;
  k.eval_ = std::move(f);
  k.moment_order_ = moment_order;
  k.measure();
  return k;
}

Kernel Kernel::from_json(const nlohmann::json& j) {
  if (!j.contains("even_coefficients") || !j.contains("moment_order")) {
    throw FormatError(
        "kernel JSON needs 'even_coefficients' and 'moment_order'");
  }
  Kernel k;
  k.coeff_ = j.at("even_coefficients").get<std::vector<double>>();
  if (k.coeff_.empty()) throw FormatError("kernel JSON: empty coefficients");
  k.moment_order_ = j.at("moment_order").get<int>();
  if (k.moment_order_ < 1) {
    throw FormatError("kernel JSON: moment_order must be >= 1");
  }
  auto coeff = k.coeff_;
  k.eval_ = [coeff](double t) { return poly_eval(coeff, t); };
  k.measure();
  return k;
}

nlohmann::json Kernel::to_json() const {
  if (!is_polynomial()) {
    throw ArgumentError("only polynomial kernels are serializable");
  }
  return nlohmann::json{{"moment_order", moment_order_},
                        {"even_coefficients", coeff_},
                        {"lipschitz", lipschitz_},
                        {"sup_norm", sup_norm_},
                        {"l1_norm", l1_norm_}};
}

void Kernel::measure() {
  namespace bq = boost::math::quadrature;
  if (is_polynomial()) {
    integral_ = 0.0;
    for (std::size_t i = 0; i < coeff_.size(); ++i) {
      integral_ += coeff_[i] * even_moment_integral(0, static_cast<int>(i));
    }
  } else {
    integral_ = bq::gauss<double, 128>::integrate(eval_, -0.5, 0.5);
  }
  double err = 0.0;
  l1_norm_ = bq::gauss_kronrod<double, 61>::integrate(
      [this](double t) { return std::abs(eval_(t)); }, -0.5, 0.5, 12, 1e-12,
      &err);
  sup_norm_ = 0.0;
  const int probes = kLipschitzProbePoints;
  for (int i = 0; i < probes; ++i) {
    const double t = -0.5 + static_cast<double>(i) / (probes - 1);
    sup_norm_ = std::max(sup_norm_, std::abs(eval_(t)));
  }
  sup_norm_ = std::max(sup_norm_, std::abs(eval_(0.0)));
  lipschitz_ = probe_max_slope(eval_, probes);
}

AssumptionReport check_assumptions(const Kernel& k) {
  AssumptionReport r;
  r.integral = k.integral();
  r.integral_ok = std::abs(r.integral - 1.0) <= 1e-10;
  r.sup_norm = k.sup_norm();
  r.l1_norm = k.l1_norm();

  r.support_ok = true;
  r.symmetric_ok = true;
  for (int i = 0; i < 2001; ++i) {
    const double t = 0.5 + 1e-9 + i * 1e-3;
    if (k(t) != 0.0 || k(-t) != 0.0) r.support_ok = false;
  }
  for (int i = 0; i < 4001; ++i) {
    const double t = -0.5 + i * (1.0 / 4000.0);
    if (k(t) != k(-t)) r.symmetric_ok = false;
  }

  r.probed_lipschitz = k.lipschitz();
  // A jump makes the probed slope scale with the grid; refine and compare.
  const double refined =
      [&] {
        const int pts = 2 * kLipschitzProbePoints;
        const double lo = -0.51, hi = 0.51;
        const double step = (hi - lo) / (pts - 1);
        double worst = 0.0;
        double prev = k(lo);
        for (int i = 1; i < pts; ++i) {
          const double cur = k(lo + step * i);
          worst = std::max(worst, std::abs(cur - prev) / step);
          prev = cur;
        }
        return worst;
      }();
  r.lipschitz_ok = refined <= 1.5 * std::max(r.probed_lipschitz, 1e-12);

  namespace bq = boost::math::quadrature;
  r.moments.resize(static_cast<std::size_t>(k.moment_order()));
  r.moments_ok = true;
  for (int m = 1; m <= k.moment_order(); ++m) {
    double err = 0.0;
    const double mom = bq::gauss_kronrod<double, 61>::integrate(
        [&](double t) { return std::pow(t, m) * k(t); }, -0.5, 0.5, 12, 1e-13,
        &err);
    r.moments[static_cast<std::size_t>(m - 1)] = mom;
    if (m >= 2 && std::abs(mom) > 1e-8) r.moments_ok = false;
  }
  return r;
}

nlohmann::json AssumptionReport::to_json() const {
  return nlohmann::json{{"integral", integral},
                        {"integral_ok", integral_ok},
                        {"support_ok", support_ok},
                        {"symmetric_ok", symmetric_ok},
                        {"probed_lipschitz", probed_lipschitz},
                        {"lipschitz_ok", lipschitz_ok},
                        {"sup_norm", sup_norm},
                        {"l1_norm", l1_norm},
                        {"moments", moments},
                        {"moments_ok", moments_ok},
                        {"all_ok", all_ok()}};
}

double product_kernel_value(const Kernel& k, std::span<const double> h_block,
                            std::span<const double> u) {
  if (h_block.size() != u.size()) {
    throw ArgumentError("product kernel: bandwidth/point size mismatch");
  }
  double inv_volume = 1.0;
  double prod = 1.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    const double h = h_block[j];
    if (!(h > 0.0)) throw ArgumentError("product kernel: bandwidth <= 0");
    inv_volume /= h;
    prod *= k(u[j] / h);
  }
  return inv_volume * prod;
}

ConvolutionProfile::ConvolutionProfile(const Kernel& k, double h, double eta,
                                       int nodes)
    : kernel_(k), h_(h), eta_(eta) {
  if (!(h > 0.0 && h <= 1.0 && eta > 0.0 && eta <= 1.0)) {
    throw ArgumentError("convolution profile: bandwidths must lie in (0,1]");
  }
  if (nodes < 65) {
    throw ArgumentError("convolution profile: need at least 65 nodes");
  }
  half_width_ = 0.5 * (h_ + eta_);
  step_ = 2.0 * half_width_ / (nodes - 1);
  values_.resize(static_cast<std::size_t>(nodes));
  for (int i = 0; i < nodes; ++i) {
    values_[static_cast<std::size_t>(i)] =
        exact_at(-half_width_ + step_ * i);
  }
  // The convolution is piecewise polynomial in z with breakpoints at
  // +-|h-eta|/2; Gauss-Legendre per piece integrates it exactly.
  namespace bq = boost::math::quadrature;
  const double knot = 0.5 * std::abs(h_ - eta_);
  auto f = [this](double z) { return exact_at(z); };
  mass_ = bq::gauss<double, 64>::integrate(f, -half_width_, -knot) +
          bq::gauss<double, 64>::integrate(f, -knot, knot) +
          bq::gauss<double, 64>::integrate(f, knot, half_width_);
}

double ConvolutionProfile::exact_at(double z) const {
  // [K_h * K_eta](z) = int K_h(u - z) K_eta(u) du; the integrand is a
  // single polynomial on the support overlap, so fixed-order
  // Gauss-Legendre is exact there.
  const double lo = std::max(-0.5 * eta_, z - 0.5 * h_);
  const double hi = std::min(0.5 * eta_, z + 0.5 * h_);
  if (!(lo < hi)) return 0.0;
  namespace bq = boost::math::quadrature;
  const double inv = 1.0 / (h_ * eta_);
  return bq::gauss<double, 64>::integrate(
      [&](double u) {
        return inv * kernel_((u - z) / h_) * kernel_(u / eta_);
      },
      lo, hi);
}

double ConvolutionProfile::operator()(double z) const {
  const double x = (z + half_width_) / step_;
  // The profile vanishes at the support endpoints, so clamping the
  // boundary cells to zero loses nothing.
  if (x <= 0.0 || x >= static_cast<double>(values_.size() - 1)) return 0.0;
  const auto i = static_cast<std::size_t>(x);
  const double w = x - static_cast<double>(i);
  return values_[i] + w * (values_[i + 1] - values_[i]);
}

ConvolutionCache::ConvolutionCache(Kernel k, int nodes_per_profile)
    : kernel_(std::move(k)), nodes_(nodes_per_profile) {}

std::shared_ptr<const ConvolutionProfile> ConvolutionCache::get(double h,
                                                                double eta) {
  const std::pair<double, double> key{std::min(h, eta), std::max(h, eta)};
  {
    std::shared_lock lock(mu_);
    if (auto it = map_.find(key); it != map_.end()) return it->second;
  }
  auto fresh = std::make_shared<const ConvolutionProfile>(kernel_, key.first,
                                                          key.second, nodes_);
  std::unique_lock lock(mu_);
  auto [it, inserted] = map_.emplace(key, std::move(fresh));
  (void)inserted;  // losing the race keeps the identical existing entry
  return it->second;
}

}  // namespace supkde
