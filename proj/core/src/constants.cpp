#include "supkde/constants.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <mutex>
#include <optional>

#include "supkde/errors.hpp"

namespace supkde::constants {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kE = 2.718281828459045235360287471352662498;

double root_map(double delta) {
  const double l = std::log(delta);
  return 8.0 * kPi * kPi * delta * (1.0 + l * l);
}

double positive_part(double x) { return x > 0.0 ? x : 0.0; }

// One of the two bracketed sup integrands of C_s, at a given delta.
double c_term(int s, int which, double delta) {
  const double ph = phi(delta);
  if (which == 1) {
    const double arg = 9216.0 * (s + 1) * delta * delta / (ph * ph);
    const double val = positive_part(1.0 + std::log(arg)) +
                       1.5 * positive_part(std::log2(0.5 * arg));
    return val / (delta * delta);
  }
  const double arg = 9216.0 * (s + 1) * delta / ph;
  const double val = positive_part(1.0 + std::log(arg)) +
                     1.5 * positive_part(std::log2(0.5 * arg));
  return val / delta;
}

}  // namespace

double delta_star() {
  static const double value = [] {
    double lo = 1e-8, hi = 1e-2;
    // root_map is nondecreasing: d/ddelta [delta(1+ln^2 delta)] = (1+ln delta)^2.
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      (root_map(mid) < 1.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }();
  return value;
}

double phi(double delta) {
  const double l = std::log(delta);
  return (6.0 / (kPi * kPi)) / (1.0 + l * l);
}

double big_C_component(int s, int which, int grid_points) {
  if (s < 1 || s > 12) throw ArgumentError("big_C: need 1 <= s <= 12");
  if (which != 1 && which != 2) throw ArgumentError("big_C: bad component");
  const double lo = delta_star();
  double hi = 1.0;
  for (int doubling = 0; doubling <= 3; ++doubling) {
    const double log_lo = std::log(lo), log_hi = std::log(hi);
    double best = -1.0;
    int best_idx = -1;
    for (int i = 0; i < grid_points; ++i) {
      const double delta = std::exp(
          log_lo + (log_hi - log_lo) * i / (grid_points - 1));
      const double v = c_term(s, which, delta);
      if (v > best) {
        best = v;
        best_idx = i;
      }
    }
    if (best_idx < grid_points - 1) return s * best;
    hi *= 2.0;
  }
  throw QuadratureError(
      "big_C: grid maximum still at the cutoff after 3 doublings");
}

double big_C(int s) {
  if (s < 1 || s > 12) throw ArgumentError("big_C: need 1 <= s <= 12");
  static std::array<std::optional<double>, 13> memo;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = memo[static_cast<std::size_t>(s)];
  if (!slot) {
    slot = big_C_component(s, 1, 10000) + big_C_component(s, 2, 10000);
  }
  return *slot;
}

double tau_p(double p, int s, double a) {
  if (a <= 0.0) throw ArgumentError("tau_p: need a > 0");
  if (p < 1.0) throw ArgumentError("tau_p: need p >= 1");
  if (s < 1) throw ArgumentError("tau_p: need s >= 1");
  const double ds = delta_star();
  const double inv_ds2 = 1.0 / (ds * ds);
  // log(a) read as the natural logarithm; recorded in output metadata.
  return s * (234.0 * s * inv_ds2 + 6.5 * p + 5.5) * std::log(2.0) +
         s * (2.0 * p + 3.0) +
         (108.0 * s * inv_ds2 * std::abs(std::log(a)) + 36.0 * big_C(s) +
          1.0) /
             std::log(3.0);
}

double gamma_p(double p, int s, double a, double lipschitz) {
  const double tau = tau_p(p, s, a);
  const double bracket =
      a + 1.5 * lipschitz * std::pow(a, static_cast<double>(s - 1));
  return 4.0 * kE * std::sqrt(2.0 * s * tau * bracket) +
         (16.0 * kE / 3.0) * std::max(s * bracket, 8.0 * a) * tau;
}

double pi_const(int s, double a, double lipschitz) {
  if (a <= 0.0) throw ArgumentError("pi_const: need a > 0");
  if (s < 1) throw ArgumentError("pi_const: need s >= 1");
  const double inner =
      1.0 + 1.5 * lipschitz * std::pow(a, static_cast<double>(s - 2));
  const double first = std::max(std::sqrt(a), a);
  const double second =
      std::max(std::sqrt(2.0 * kE * s * inner),
               (2.0 * kE / 3.0) * std::max(s * inner, 8.0));
  return first * second;
}

nlohmann::json Context::to_json() const {
  return nlohmann::json{{"q", q},
                        {"d", d},
                        {"k_inf", k_inf},
                        {"k_lip", k_lip},
                        {"mode", mode_name(mode)},
                        {"kappa", kappa},
                        {"candidate_floor", candidate_floor},
                        {"log_base", "natural"}};
}

Penalty lambda_and_threshold(const Context& ctx, double f_bar_n) {
  if (!(f_bar_n >= 1.0)) {
    throw ArgumentError("lambda_and_threshold: need f_bar_n >= 1");
  }
  if (ctx.d < 1) throw ArgumentError("lambda_and_threshold: need d >= 1");
  Penalty out;
  out.mode = ctx.mode;
  if (ctx.mode == Mode::calibrated) {
    if (!(ctx.kappa > 0.0)) {
      throw ArgumentError("calibrated mode: need kappa > 0");
    }
    if (!(ctx.candidate_floor > 0.0)) {
      throw ArgumentError("calibrated mode: need candidate_floor > 0");
    }
    out.lambda = ctx.kappa;
    out.a_star = ctx.candidate_floor;
    out.Lambda = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  if (!(ctx.k_inf > 0.0)) {
    throw ArgumentError("theoretical mode: kernel sup-norm required");
  }
  double prev = -1.0;
  double g = 0.0;
  for (int s = 1; s <= ctx.d; ++s) {
    g = gamma_p(2.0 * ctx.q, s, ctx.k_inf, ctx.k_lip);
    if (g < prev) {
      throw ArgumentError(
          "gamma_{2q}(s, k_inf) is not nondecreasing in s; the Lambda "
          "simplification does not apply to this kernel");
    }
    prev = g;
  }
  out.Lambda = g;
  const int exponent = (ctx.d * ctx.d) / 4 + 1;
  out.lambda = out.Lambda * ctx.d * std::pow(f_bar_n, exponent);
  out.a_star = 1.0 / (4.0 * g * g);
  return out;
}

}  // namespace supkde::constants
