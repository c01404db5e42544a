#pragma once

#include <string>

#include <nlohmann/json.hpp>

namespace supkde::constants {

/// Smallest root of 8 pi^2 delta (1 + (ln delta)^2) = 1; the map is
/// nondecreasing, so bisection pins it down. Memoized.
double delta_star();

/// phi(delta) = (6/pi^2) (1 + (ln delta)^2)^-1.
double phi(double delta);

/// C_s = C_s^(1) + C_s^(2): both suprema over delta > delta* evaluated on a
/// log grid (10^4 points, interior-maximum verified, cutoff doubled up to 3
/// times). Memoized per s; 1 <= s <= 12.
double big_C(int s);

/// The two summands of C_s, exposed for grid-stability tests.
double big_C_component(int s, int which, int grid_points);

double tau_p(double p, int s, double a);
double gamma_p(double p, int s, double a, double lipschitz);
double pi_const(int s, double a, double lipschitz);

enum class Mode { theoretical, calibrated };

inline const char* mode_name(Mode m) {
  return m == Mode::theoretical ? "theoretical" : "calibrated";
}

/// Inputs the penalty computation depends on. In calibrated mode lambda is
/// the user multiplier kappa and the bandwidth-grid threshold becomes
/// `candidate_floor`; every downstream output is labeled with the mode.
struct Context {
  double q = 1.0;  // risk exponent
  int d = 1;
  double k_inf = 0.0;  // kernel sup-norm
  double k_lip = 0.0;  // kernel Lipschitz constant
  Mode mode = Mode::calibrated;
  double kappa = 1.0;            // calibrated-mode lambda
  double candidate_floor = 1.0;  // calibrated-mode stand-in for a*

  nlohmann::json to_json() const;
};

struct Penalty {
  double lambda = 0.0;
  double a_star = 0.0;  // bandwidth-grid threshold actually in force
  double Lambda = 0.0;  // sup_s gamma_{2q}(s, k_inf); NaN in calibrated mode
  Mode mode = Mode::calibrated;
};

/// lambda = Lambda d fbar^(floor(d^2/4)+1) and a* = [2 gamma_{2q}(d,k_inf)]^-2
/// in theoretical mode; lambda = kappa and a* = candidate_floor otherwise.
/// gamma_{2q}(s, k_inf) is checked to be nondecreasing in s = 1..d, which
/// justifies collapsing the sup over partitions to s = d.
Penalty lambda_and_threshold(const Context& ctx, double f_bar_n);

}  // namespace supkde::constants
