#pragma once

// Deterministic reference values for two-dimensional cases.
//
// After whitening, p = mean + L z with z ~ N(0, I2). Along the ray z = rho u,
// the polytope rows are crossed at rho_j = b'_j / (omega'_j . u) and stay
// violated beyond it, so any functional of the violated set integrates in
// closed form in rho (P(R > rho) = exp(-rho^2 / 2)). Only the angle needs
// numerical quadrature, done with adaptive Gauss-Kronrod on panels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "gridrel/errors.hpp"
#include "gridrel/mixture.hpp"

namespace gridrel::quadrature {

struct Options {
  std::size_t panels = 0;  // 0 picks clamp(2 J, 64, 1024)
  double tolerance = 1e-12;  // relative, per panel
  unsigned max_depth = 12;
};

namespace detail {

struct WhitenedRows {
  std::vector<Eigen::Vector2d> omega;
  std::vector<double> bound;
};

inline WhitenedRows whiten(const FailureModel& model) {
  const auto& g = model.gaussian();
  if (g.dim() != 2 || g.rank() != 2)
    throw ConfigError("quadrature: needs a full-rank two-dimensional Gaussian");
  WhitenedRows rows;
  for (std::size_t j = 0; j < model.J(); ++j) {
    const Eigen::Vector2d w = model.W().row(static_cast<Eigen::Index>(j)).transpose();
    const double b = model.b()(static_cast<Eigen::Index>(j)) - g.mean().dot(w);
    if (!(b > 0.0)) throw ConfigError("quadrature: the mean must lie strictly inside the polytope");
    rows.omega.push_back(g.cov_sqrt() * w);
    rows.bound.push_back(b);
  }
  return rows;
}

inline double integrate_angle(const std::function<double(double)>& f, std::size_t panels,
                              const Options& opt) {
  const double width = 2.0 * std::numbers::pi / static_cast<double>(panels);
  double total = 0.0;
  for (std::size_t k = 0; k < panels; ++k) {
    const double a = width * static_cast<double>(k);
    total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        f, a, a + width, opt.max_depth, opt.tolerance);
  }
  return total / (2.0 * std::numbers::pi);
}

inline std::size_t panel_count(std::size_t J, const Options& opt) {
  return opt.panels ? opt.panels : std::clamp<std::size_t>(2 * J, 64, 1024);
}

}  // namespace detail

/// P(p outside the polytope).
inline double exterior_probability(const FailureModel& model, const Options& opt = {}) {
  const auto rows = detail::whiten(model);
  auto f = [&](double theta) {
    const Eigen::Vector2d u(std::cos(theta), std::sin(theta));
    double rho = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < rows.bound.size(); ++j) {
      const double c = rows.omega[j].dot(u);
      if (c > 0.0) rho = std::min(rho, rows.bound[j] / c);
    }
    return std::isinf(rho) ? 0.0 : std::exp(-0.5 * rho * rho);
  };
  return detail::integrate_angle(f, detail::panel_count(model.J(), opt), opt);
}

/// E[ h(violated set) ] where h is built incrementally along each ray.
///
/// `step(acc, j)` folds row j into an accumulator when the ray crosses it;
/// `value(acc)` evaluates h for the rows folded so far. Points inside the
/// polytope contribute zero.
template <typename Acc, typename Step, typename Value>
double exterior_expectation(const FailureModel& model, Acc init, Step step, Value value,
                            const Options& opt = {}) {
  const auto rows = detail::whiten(model);
  std::vector<std::pair<double, std::size_t>> crossings;
  crossings.reserve(rows.bound.size());
  auto f = [&](double theta) {
    const Eigen::Vector2d u(std::cos(theta), std::sin(theta));
    crossings.clear();
    for (std::size_t j = 0; j < rows.bound.size(); ++j) {
      const double c = rows.omega[j].dot(u);
      if (c > 0.0) crossings.emplace_back(rows.bound[j] / c, j);
    }
    std::sort(crossings.begin(), crossings.end());
    Acc acc = init;
    double sum = 0.0;
    for (std::size_t k = 0; k < crossings.size(); ++k) {
      step(acc, crossings[k].second);
      const double lo = crossings[k].first;
      const double tail_lo = std::exp(-0.5 * lo * lo);
      const double tail_hi =
          k + 1 < crossings.size() ? std::exp(-0.5 * crossings[k + 1].first * crossings[k + 1].first) : 0.0;
      if (tail_lo > tail_hi) sum += value(acc) * (tail_lo - tail_hi);
      if (tail_lo == 0.0) break;
    }
    return sum;
  };
  return detail::integrate_angle(f, detail::panel_count(model.J(), opt), opt);
}

/// Second moment E_D[r^2] = E_nominal[f r] of the importance weight under weights x.
inline double weight_second_moment(const FailureModel& model, const Eigen::VectorXd& x,
                                   const Options& opt = {}) {
  return exterior_expectation(
      model, 0.0,
      [&](double& s, std::size_t j) {
        const double pj = model.row(j).tail_prob;
        if (pj > 0.0) s += x(static_cast<Eigen::Index>(j)) / pj;
      },
      [](double s) { return s > 0.0 ? 1.0 / s : 0.0; }, opt);
}

/// Per-sample variance V(x) = E_D[r^2] - Pi^2 of the mixture estimator.
inline double mixture_variance(const FailureModel& model, const Eigen::VectorXd& x, double pi,
                               const Options& opt = {}) {
  return weight_second_moment(model, x, opt) - pi * pi;
}

/// Average number of violated rows given failure, E[N(p) | p outside].
inline double mean_violated_given_failure(const FailureModel& model, double pi,
                                          const Options& opt = {}) {
  const double total = exterior_expectation(
      model, 0.0, [](double& n, std::size_t) { n += 1.0; }, [](double n) { return n; }, opt);
  return total / pi;
}

}  // namespace gridrel::quadrature
