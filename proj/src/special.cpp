#include "tvp/special.hpp"

#include <cmath>
#include <algorithm>
#include <limits>
#include <numbers>
#include <string>

#include "tvp/error.hpp"

namespace tvp {

namespace {

// Solves erfc(x) = y for 0 < y <= 1 (so x >= 0) by Newton on
// log erfc(x) - log y, falling back to bisection whenever a step leaves the
// current bracket. Working in logs keeps the iteration well scaled deep in the
// tail where erfc underflows toward denormals.
double inv_erfc_upper(double y) {
  const double log_y = std::log(y);
  double lo = 0.0;
  double hi = 27.5;  // erfc(27.5) is below the smallest positive double
  // Asymptotic start: erfc(x) ~ exp(-x^2) / (x sqrt(pi)).
  double x = y > 0.5 ? (1.0 - y) * std::sqrt(std::numbers::pi) / 2.0 : std::sqrt(-std::log(y * std::sqrt(std::numbers::pi)));
  if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double e = std::erfc(x);
    const double r = std::log(e) - log_y;
    if (r > 0.0)
      lo = x;  // erfc(x) too large: root lies to the right
    else
      hi = x;
    if (r == 0.0) return x;
    const double slope = -2.0 / std::sqrt(std::numbers::pi) * std::exp(-x * x) / e;
    double next = x - r / slope;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, x)) return next;
    x = next;
  }
  return x;
}

} // namespace

double inv_erfc(double y) {
  if (!(y > 0.0 && y < 2.0))
    throw DomainError("inv_erfc: argument " + std::to_string(y) + " outside (0, 2)");
  if (y == 1.0) return 0.0;
  if (y > 1.0) return -inv_erfc_upper(2.0 - y);
  return inv_erfc_upper(y);
}

} // namespace tvp
