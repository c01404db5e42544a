#pragma once

#include <functional>
#include <span>

namespace supkde {

/// Adaptive Gauss-Kronrod integration over an axis-aligned box, iterated
/// one axis at a time. Throws QuadratureError when the outer error
/// estimate exceeds `tol` (the message reports the achieved tolerance).
double integrate_box(const std::function<double(std::span<const double>)>& f,
                     std::span<const double> lo, std::span<const double> hi,
                     double tol);

/// 1-d convenience wrapper.
double integrate_interval(const std::function<double(double)>& f, double lo,
                          double hi, double tol);

}  // namespace supkde
