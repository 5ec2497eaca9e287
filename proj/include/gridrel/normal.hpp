#pragma once

// Standard normal special functions. Everything that touches a tail goes
// through the complementary functions so that probabilities down to ~1e-300
// keep full relative precision.

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

#include "gridrel/errors.hpp"

namespace gridrel::normal {

/// Largest margin whose upper tail is still a normal double (~5.7e-300).
inline constexpr double kMaxTailMargin = 37.0;

inline double pdf(double t) {
  return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi);
}

inline double cdf(double t) { return 0.5 * std::erfc(-t / std::numbers::sqrt2); }

/// Upper tail 1 - cdf(t).
inline double sf(double t) { return 0.5 * std::erfc(t / std::numbers::sqrt2); }

/// log of the upper tail. Uses the Mills-ratio expansion once erfc would
/// start losing range.
inline double log_sf(double t) {
  if (t < 30.0) return std::log(sf(t));
  const double inv2 = 1.0 / (t * t);
  const double series = 1.0 - inv2 * (1.0 - 3.0 * inv2 * (1.0 - 5.0 * inv2));
  return -0.5 * t * t - std::log(t) - 0.5 * std::log(2.0 * std::numbers::pi) +
         std::log(series);
}

/// Inverse of sf on (0, 1].
inline double isf(double q) {
  if (!(q > 0.0 && q <= 1.0)) {
    if (q == 0.0) return std::numeric_limits<double>::infinity();
    throw NumericalError("normal::isf: probability outside (0, 1]");
  }
  if (q == 1.0) return -std::numeric_limits<double>::infinity();
  return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * q);
}

/// Inverse of cdf on (0, 1).
inline double quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw NumericalError("normal::quantile: probability outside [0, 1]");
  }
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

}  // namespace gridrel::normal
