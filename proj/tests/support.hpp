#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gridrel/gridrel.hpp"

namespace testing_support {

inline std::string case_path(const std::string& name) {
  return std::string(GRIDREL_DATA_DIR) + "/cases/" + name;
}

/// Asymptotic Kolmogorov critical value sqrt(n) * D at significance 1e-3.
inline constexpr double kKsCritical = 1.9495;

inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

inline bool ks_passes(const std::vector<double>& xs, const std::function<double(double)>& cdf) {
  return std::sqrt(static_cast<double>(xs.size())) * ks_statistic(xs, cdf) < kKsCritical;
}

/// Two orthogonal halfspaces p1 <= b1, p2 <= b2 under a 2-D standard normal.
inline gridrel::FailureModel orthogonal_pair(double b1 = 2.0, double b2 = 2.0) {
  Eigen::MatrixXd W(2, 2);
  W << 1.0, 0.0, 0.0, 1.0;
  Eigen::VectorXd b(2);
  b << b1, b2;
  return {gridrel::NominalGaussian::standard(2), W, b};
}

/// Inclusion-exclusion for independent coordinates.
inline double orthogonal_pair_pi(double b1 = 2.0, double b2 = 2.0) {
  const double q1 = gridrel::normal::sf(b1), q2 = gridrel::normal::sf(b2);
  return q1 + q2 - q1 * q2;
}

/// Closed-form second moment E_D[r^2] for the orthogonal pair under weights x.
inline double orthogonal_pair_second_moment(const Eigen::VectorXd& x, double b1 = 2.0,
                                            double b2 = 2.0) {
  const double q1 = gridrel::normal::sf(b1), q2 = gridrel::normal::sf(b2);
  return q1 * (1.0 - q2) * q1 / x(0) + q2 * (1.0 - q1) * q2 / x(1) +
         q1 * q2 / (x(0) / q1 + x(1) / q2);
}

inline gridrel::FailureModel single_row(double b = 1.5) {
  Eigen::MatrixXd W(1, 2);
  W << 1.0, 0.0;
  Eigen::VectorXd bb(1);
  bb << b;
  return {gridrel::NominalGaussian::standard(2), W, bb};
}

}  // namespace testing_support

namespace testing_support {

/// tau such that the regular J-gon has exterior probability `target`.
inline double regular_tau_for(std::size_t J, double target) {
  double lo = 0.5, hi = 10.0;
  for (int it = 0; it < 60; ++it) {
    gridrel::SyntheticSpec spec;
    spec.J = J;
    spec.tau = 0.5 * (lo + hi);
    const double pi = gridrel::quadrature::exterior_probability(gridrel::generate_polytope(spec).model());
    (pi > target ? lo : hi) = spec.tau;
  }
  return 0.5 * (lo + hi);
}

}  // namespace testing_support
