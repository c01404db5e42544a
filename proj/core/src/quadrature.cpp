#include "supkde/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "supkde/errors.hpp"

namespace supkde {

namespace {

using GaussLo = boost::math::quadrature::gauss<double, 15>;
using GaussHi = boost::math::quadrature::gauss<double, 25>;

// Embedded tensor Gauss-Legendre pair on one box: the 15/25-point
// disagreement serves as the error estimate. Exact for the polynomial
// kernels, and a couple of bisections resolve smooth factors.
template <class Rule>
double tensor_gauss(const std::function<double(std::span<const double>)>& f,
                    std::span<const double> lo, std::span<const double> hi,
                    std::vector<double>& point, std::size_t axis) {
  const auto& abscissa = Rule::abscissa();
  const auto& weights = Rule::weights();
  const double mid = 0.5 * (lo[axis] + hi[axis]);
  const double half = 0.5 * (hi[axis] - lo[axis]);
  auto eval = [&](double x) {
    point[axis] = x;
    if (axis + 1 == lo.size()) return f(point);
    return tensor_gauss<Rule>(f, lo, hi, point, axis + 1);
  };
  // Boost stores the nonnegative half of the symmetric rule; index 0 is
  // the center point for odd node counts.
  double acc = weights[0] * eval(mid);
  for (std::size_t i = 1; i < abscissa.size(); ++i) {
    const double dx = half * abscissa[i];
    acc += weights[i] * (eval(mid - dx) + eval(mid + dx));
  }
  return acc * half;
}

struct PanelResult {
  double value = 0.0;
  double error = 0.0;
};

PanelResult integrate_panel(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> lo, std::span<const double> hi,
    std::vector<double>& point) {
  const double coarse = tensor_gauss<GaussLo>(f, lo, hi, point, 0);
  const double fine = tensor_gauss<GaussHi>(f, lo, hi, point, 0);
  return {fine, std::abs(fine - coarse)};
}

PanelResult integrate_recursive(
    const std::function<double(std::span<const double>)>& f,
    std::vector<double> lo, std::vector<double> hi,
    std::vector<double>& point, double tol, int depth) {
  const auto panel = integrate_panel(f, lo, hi, point);
  if (panel.error <= tol || depth == 0) return panel;
  // Bisect every axis; each child carries a proportional share of tol.
  const std::size_t d = lo.size();
  const auto children = std::size_t{1} << d;
  const double child_tol = tol / static_cast<double>(children);
  PanelResult total;
  std::vector<double> clo(d), chi(d);
  for (std::size_t mask = 0; mask < children; ++mask) {
    for (std::size_t k = 0; k < d; ++k) {
      const double mid = 0.5 * (lo[k] + hi[k]);
      if (mask & (std::size_t{1} << k)) {
        clo[k] = mid;
        chi[k] = hi[k];
      } else {
        clo[k] = lo[k];
        chi[k] = mid;
      }
    }
    const auto child =
        integrate_recursive(f, clo, chi, point, child_tol, depth - 1);
    total.value += child.value;
    total.error += child.error;
  }
  return total;
}

}  // namespace

double integrate_box(const std::function<double(std::span<const double>)>& f,
                     std::span<const double> lo, std::span<const double> hi,
                     double tol) {
  if (lo.empty() || lo.size() != hi.size()) {
    throw ArgumentError("integrate_box: inconsistent bounds");
  }
  std::vector<double> point(lo.size(), 0.0);
  const auto result =
      integrate_recursive(f, std::vector<double>(lo.begin(), lo.end()),
                          std::vector<double>(hi.begin(), hi.end()), point,
                          tol, 8);
  if (!(result.error <= tol) || !std::isfinite(result.value)) {
    throw QuadratureError("integrate_box: requested tolerance " +
                          std::to_string(tol) + ", achieved " +
                          std::to_string(result.error));
  }
  return result.value;
}

double integrate_interval(const std::function<double(double)>& f, double lo,
                          double hi, double tol) {
  const double los[1] = {lo};
  const double his[1] = {hi};
  return integrate_box(
      [&](std::span<const double> x) { return f(x[0]); },
      std::span<const double>(los, 1), std::span<const double>(his, 1), tol);
}

}  // namespace supkde
