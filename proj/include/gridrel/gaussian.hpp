#pragma once

// Nominal Gaussian over power injections, single-halfspace tail
// probabilities and the exact halfspace-conditioned sampler.

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "gridrel/errors.hpp"
#include "gridrel/normal.hpp"
#include "gridrel/random.hpp"

namespace gridrel {

/// N(mean, cov) with a possibly singular covariance.
///
/// Zero-variance coordinates (slack bus, loads) are common, so the
/// distribution is stored through its spectral decomposition: `cov_sqrt` is
/// the symmetric PSD square root and `support` spans the range of `cov`.
class NominalGaussian {
 public:
  NominalGaussian() = default;

  NominalGaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov)
      : mean_(std::move(mean)), cov_(std::move(cov)) {
    const auto n = mean_.size();
    if (n == 0 || cov_.rows() != n || cov_.cols() != n)
      throw ConfigError("NominalGaussian: dimension mismatch");
    if (!mean_.allFinite() || !cov_.allFinite())
      throw NumericalError("NominalGaussian: non-finite mean or covariance");
    if ((cov_ - cov_.transpose()).norm() > 1e-12 * (1.0 + cov_.norm()))
      throw ConfigError("NominalGaussian: covariance is not symmetric");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov_);
    const Eigen::VectorXd& lambda = eig.eigenvalues();
    const Eigen::MatrixXd& vectors = eig.eigenvectors();
    const double lambda_max = lambda.cwiseAbs().maxCoeff();
    if (lambda.minCoeff() < -1e-10 * std::max(1.0, lambda_max))
      throw ConfigError("NominalGaussian: covariance is not positive semidefinite");

    const double cutoff = 1e-12 * lambda_max;
    Eigen::VectorXd root = Eigen::VectorXd::Zero(n);
    int rank = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (lambda(i) > cutoff) {
        root(i) = std::sqrt(lambda(i));
        ++rank;
      }
    cov_sqrt_ = vectors * root.asDiagonal() * vectors.transpose();

    support_.resize(n, rank);
    support_eigenvalues_.resize(rank);
    int k = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (lambda(i) > cutoff) {
        support_.col(k) = vectors.col(i);
        support_eigenvalues_(k) = lambda(i);
        ++k;
      }
  }

  /// Standard normal in `n` dimensions.
  static NominalGaussian standard(Eigen::Index n) {
    return {Eigen::VectorXd::Zero(n), Eigen::MatrixXd::Identity(n, n)};
  }

  Eigen::Index dim() const { return mean_.size(); }
  Eigen::Index rank() const { return support_.cols(); }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& cov() const { return cov_; }
  const Eigen::MatrixXd& cov_sqrt() const { return cov_sqrt_; }
  const Eigen::MatrixXd& support() const { return support_; }
  const Eigen::VectorXd& support_eigenvalues() const { return support_eigenvalues_; }

  Eigen::VectorXd sample(RandomStream& rng) const {
    Eigen::VectorXd z(dim());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
    return cov_sqrt_ * z + mean_;
  }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd cov_sqrt_;
  Eigen::MatrixXd support_;
  Eigen::VectorXd support_eigenvalues_;
};

/// One row omega^T p <= bound of a polytope, with its whitened geometry.
struct HalfspaceConstraint {
  Eigen::VectorXd omega;
  double bound = 0.0;
  double sigma_norm = 0.0;  // ||cov_sqrt * omega||
  double beta = 0.0;        // (bound - mean^T omega) / sigma_norm
  double tail_prob = 0.0;   // P(omega^T p >= bound)
  Eigen::VectorXd omega_bar;  // cov_sqrt * omega / sigma_norm

  bool degenerate() const { return sigma_norm == 0.0; }

  /// Can be sampled by `sample_conditional`.
  bool samplable() const {
    return !degenerate() && tail_prob > 0.0 && beta <= normal::kMaxTailMargin;
  }
};

/// Closed-form P(omega^T p >= b) under `g`.
///
/// The margin is measured in whitened units; a row whose direction carries
/// no variance is deterministic and gets probability 0 or 1 from the mean.
inline HalfspaceConstraint tail_probability(const NominalGaussian& g,
                                            const Eigen::VectorXd& omega, double b) {
  if (omega.size() != g.dim()) throw ConfigError("tail_probability: dimension mismatch");
  if (!omega.allFinite() || !std::isfinite(b))
    throw NumericalError("tail_probability: non-finite constraint");

  HalfspaceConstraint c;
  c.omega = omega;
  c.bound = b;
  const Eigen::VectorXd whitened = g.cov_sqrt() * omega;
  const double norm = whitened.norm();
  const double scale = omega.norm() * std::sqrt(std::max(g.cov_sqrt().squaredNorm(), 0.0));
  const double center = g.mean().dot(omega);

  if (norm <= 1e-13 * scale || norm == 0.0) {
    c.sigma_norm = 0.0;
    c.omega_bar = Eigen::VectorXd::Zero(omega.size());
    const double gap = b - center;
    c.beta = gap > 0.0 ? std::numeric_limits<double>::infinity()
                       : -std::numeric_limits<double>::infinity();
    c.tail_prob = center > b ? 1.0 : 0.0;
    return c;
  }
  c.sigma_norm = norm;
  c.omega_bar = whitened / norm;
  c.beta = (b - center) / norm;
  c.tail_prob = normal::sf(c.beta);
  return c;
}

/// Algorithm body of the conditional sampler with the randomness supplied.
///
/// `z` is a standard normal vector and `u` lies in [0, 1). The tail level is
/// mapped through the complementary functions:
/// y = sf^{-1}((1 - u) sf(tau)), which equals the textbook
/// cdf^{-1}(cdf(tau) + u (1 - cdf(tau))) but stays exact far in the tail.
inline Eigen::VectorXd sample_conditional_from(const NominalGaussian& g,
                                               const HalfspaceConstraint& c,
                                               const Eigen::VectorXd& z, double u) {
  if (c.degenerate()) throw NumericalError("sample_conditional: degenerate constraint");
  if (c.beta > normal::kMaxTailMargin || c.tail_prob <= 0.0)
    throw NumericalError("sample_conditional: tail probability underflows (margin " +
                         std::to_string(c.beta) + ")");
  const double level = (1.0 - u) * c.tail_prob;
  double y = normal::isf(level);
  // Round-off in sf/isf can land a hair inside the halfspace.
  if (y < c.beta) y = c.beta;
  const Eigen::VectorXd phi = c.omega_bar * y + (z - c.omega_bar * c.omega_bar.dot(z));
  Eigen::VectorXd p = g.cov_sqrt() * phi + g.mean();
  return p;
}

/// Draw p ~ N(mean, cov) conditioned on omega^T p >= b.
inline Eigen::VectorXd sample_conditional(const NominalGaussian& g,
                                          const HalfspaceConstraint& c,
                                          RandomStream& rng) {
  Eigen::VectorXd z(g.dim());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return sample_conditional_from(g, c, z, rng.uniform());
}

/// Log-density of `g` restricted to its support (mean + range(cov)).
inline double nominal_logpdf(const NominalGaussian& g, const Eigen::VectorXd& p) {
  if (p.size() != g.dim()) throw ConfigError("nominal_logpdf: dimension mismatch");
  const Eigen::VectorXd d = p - g.mean();
  const Eigen::VectorXd coords = g.support().transpose() * d;
  const Eigen::VectorXd off_support = d - g.support() * coords;
  if (off_support.norm() > 1e-9 * (1.0 + d.norm()))
    throw NumericalError(
        "nominal_logpdf: point leaves the support (a zero-variance coordinate differs "
        "from its mean)");
  const auto r = static_cast<double>(g.rank());
  const double quad = (coords.array().square() / g.support_eigenvalues().array()).sum();
  const double logdet = g.support_eigenvalues().array().log().sum();
  return -0.5 * r * std::log(2.0 * std::numbers::pi) - 0.5 * logdet - 0.5 * quad;
}

}  // namespace gridrel
