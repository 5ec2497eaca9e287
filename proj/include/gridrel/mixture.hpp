#pragma once

// Mixture of halfspace-conditioned Gaussians, its density ratio and the
// running importance-sampling estimate of the failure probability.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gridrel/errors.hpp"
#include "gridrel/gaussian.hpp"
#include "gridrel/random.hpp"

namespace gridrel {

/// Polytope rows together with the nominal distribution they are tested
/// against. Rows whose tail underflows (or that carry sentinel limits) are
/// vacuous: they stay indexed but never enter the mixture.
class FailureModel {
 public:
  FailureModel() = default;

  FailureModel(NominalGaussian gaussian, Eigen::MatrixXd W, Eigen::VectorXd b,
               std::vector<std::string> labels = {}, std::vector<bool> forced_vacuous = {})
      : gaussian_(std::move(gaussian)), W_(std::move(W)), b_(std::move(b)),
        labels_(std::move(labels)) {
    if (W_.cols() != gaussian_.dim() || W_.rows() != b_.size() || W_.rows() == 0)
      throw ConfigError("FailureModel: dimension mismatch");
    const auto J = static_cast<std::size_t>(W_.rows());
    if (labels_.empty())
      for (std::size_t j = 0; j < J; ++j) labels_.push_back("row:" + std::to_string(j));
    if (labels_.size() != J) throw ConfigError("FailureModel: label count mismatch");
    if (!forced_vacuous.empty() && forced_vacuous.size() != J)
      throw ConfigError("FailureModel: vacuous mask size mismatch");

    rows_.reserve(J);
    for (std::size_t j = 0; j < J; ++j) {
      const auto r = static_cast<Eigen::Index>(j);
      auto c = tail_probability(gaussian_, W_.row(r).transpose(), b_(r));
      const bool forced = !forced_vacuous.empty() && forced_vacuous[j];
      if (forced) c.tail_prob = 0.0;
      if (c.degenerate() && c.tail_prob == 1.0) certain_failure_ = true;
      if (c.samplable() && !forced) active_.push_back(j);
      rows_.push_back(std::move(c));
    }
  }

  const NominalGaussian& gaussian() const { return gaussian_; }
  const Eigen::MatrixXd& W() const { return W_; }
  const Eigen::VectorXd& b() const { return b_; }
  const std::vector<HalfspaceConstraint>& rows() const { return rows_; }
  const HalfspaceConstraint& row(std::size_t j) const { return rows_[j]; }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<std::size_t>& active() const { return active_; }
  std::size_t J() const { return rows_.size(); }
  bool is_active(std::size_t j) const {
    return std::binary_search(active_.begin(), active_.end(), j);
  }

  /// Some zero-variance row is violated at the mean: the failure is certain.
  bool certain_failure() const { return certain_failure_; }

  /// Every row is vacuous and none is deterministically violated: Pi = 0.
  bool all_vacuous() const { return active_.empty() && !certain_failure_; }

  /// Indices j with omega_j^T p > b_j, over all rows.
  std::vector<std::size_t> violated(const Eigen::VectorXd& p) const {
    const Eigen::VectorXd slack = W_ * p - b_;
    std::vector<std::size_t> out;
    for (Eigen::Index j = 0; j < slack.size(); ++j)
      if (slack(j) > 0.0) out.push_back(static_cast<std::size_t>(j));
    return out;
  }

  bool fails(const Eigen::VectorXd& p) const { return (W_ * p - b_).maxCoeff() > 0.0; }

 private:
  NominalGaussian gaussian_;
  Eigen::MatrixXd W_;
  Eigen::VectorXd b_;
  std::vector<std::string> labels_;
  std::vector<HalfspaceConstraint> rows_;
  std::vector<std::size_t> active_;
  bool certain_failure_ = false;
};

/// Simplex weights over the J rows; zero exactly on inactive rows.
struct MixtureWeights {
  Eigen::VectorXd x;
  double epsilon = 0.0;
};

/// Default floor: min(1e-3, 1 / (10 J)) over the active rows.
inline double default_epsilon(std::size_t active_count) {
  return std::min(1e-3, 1.0 / (10.0 * static_cast<double>(std::max<std::size_t>(active_count, 1))));
}

/// Clip active coordinates to `epsilon` and rescale the unclipped ones so the
/// total stays one. Repeats until no new coordinate falls below the floor.
inline void project_floor(Eigen::VectorXd& x, double epsilon,
                          const std::vector<std::size_t>& active) {
  const auto k = active.size();
  if (k == 0) return;
  if (epsilon * static_cast<double>(k) > 1.0 + 1e-12)
    throw ConfigError("epsilon floor exceeds 1/J");
  std::vector<bool> clipped(x.size(), false);
  for (int guard = 0; guard <= static_cast<int>(k); ++guard) {
    double free_mass = 0.0;
    std::size_t n_clipped = 0;
    for (auto j : active) {
      if (clipped[j]) ++n_clipped;
      else free_mass += x(static_cast<Eigen::Index>(j));
    }
    const double target = 1.0 - epsilon * static_cast<double>(n_clipped);
    bool changed = false;
    for (auto j : active) {
      auto& v = x(static_cast<Eigen::Index>(j));
      if (clipped[j]) {
        v = epsilon;
      } else {
        v = free_mass > 0.0 ? v * target / free_mass : target / static_cast<double>(k - n_clipped);
        if (v < epsilon) {
          clipped[j] = true;
          changed = true;
        }
      }
    }
    if (!changed) return;
  }
}

/// x proportional to the single-row tail probabilities (the static ALOE choice).
inline MixtureWeights proportional_weights(const FailureModel& model, double epsilon) {
  MixtureWeights w;
  w.epsilon = epsilon;
  w.x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.J()));
  if (model.active().empty()) return w;
  double total = 0.0;
  for (auto j : model.active()) total += model.row(j).tail_prob;
  for (auto j : model.active())
    w.x(static_cast<Eigen::Index>(j)) = model.row(j).tail_prob / total;
  project_floor(w.x, epsilon, model.active());
  return w;
}

/// Inverse-CDF categorical sampler over frozen weights.
class CategoricalSampler {
 public:
  explicit CategoricalSampler(const Eigen::VectorXd& x) {
    cumulative_.resize(static_cast<std::size_t>(x.size()));
    double acc = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      acc += x(i);
      cumulative_[static_cast<std::size_t>(i)] = acc;
    }
    if (!(acc > 0.0)) throw ConfigError("CategoricalSampler: weights sum to zero");
    total_ = acc;
  }

  std::size_t draw(RandomStream& rng) const {
    const double u = rng.uniform() * total_;
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    auto idx = static_cast<std::size_t>(it - cumulative_.begin());
    if (idx >= cumulative_.size()) {
      // u == total after rounding: take the last entry with positive weight.
      idx = cumulative_.size() - 1;
      while (idx > 0 && cumulative_[idx] == cumulative_[idx - 1]) --idx;
    }
    return idx;
  }

 private:
  std::vector<double> cumulative_;
  double total_ = 0.0;
};

/// One draw from the mixture with everything the estimator and the
/// gradients need.
struct MixtureSample {
  std::size_t component = 0;
  Eigen::VectorXd p;
  std::vector<std::size_t> violated;  // all rows with omega^T p > b
  double ratio = 0.0;                 // nominal / mixture density
};

/// sum over active violated rows of x_j / Pi_j.
inline double mixture_density_factor(const std::vector<std::size_t>& violated,
                                     const Eigen::VectorXd& x, const FailureModel& model) {
  double s = 0.0;
  for (auto j : violated) {
    const double pj = model.row(j).tail_prob;
    if (pj > 0.0) s += x(static_cast<Eigen::Index>(j)) / pj;
  }
  return s;
}

/// upsilon(p) / upsilon_D(p, x) = 1 / sum_j (x_j / Pi_j) 1[omega_j^T p > b_j].
///
/// Returns 0 when no active row is violated (a point inside the polytope, or
/// one that only breaks vacuous rows).
inline double density_ratio(const std::vector<std::size_t>& violated,
                            const Eigen::VectorXd& x, const FailureModel& model) {
  const double s = mixture_density_factor(violated, x, model);
  return s > 0.0 ? 1.0 / s : 0.0;
}

inline double density_ratio(const Eigen::VectorXd& p, const MixtureWeights& w,
                            const FailureModel& model) {
  return density_ratio(model.violated(p), w.x, model);
}

/// Choose a component with probability x_i, then draw from it.
///
/// The generating row is counted as violated even when round-off puts the
/// point exactly on its boundary: membership in that halfspace holds by
/// construction.
inline MixtureSample sample_mixture(const CategoricalSampler& picker, const MixtureWeights& w,
                                    const FailureModel& model, RandomStream& rng) {
  if (model.active().empty())
    throw NumericalError("sample_mixture: every constraint is vacuous (Pi = 0)");
  MixtureSample s;
  s.component = picker.draw(rng);
  if (!model.is_active(s.component) || w.x(static_cast<Eigen::Index>(s.component)) <= 0.0)
    throw NumericalError("sample_mixture: picked an inactive component");
  s.p = sample_conditional(model.gaussian(), model.row(s.component), rng);
  s.violated = model.violated(s.p);
  if (!std::binary_search(s.violated.begin(), s.violated.end(), s.component)) {
    s.violated.push_back(s.component);
    std::sort(s.violated.begin(), s.violated.end());
  }
  s.ratio = density_ratio(s.violated, w.x, model);
  return s;
}

inline MixtureSample sample_mixture(const MixtureWeights& w, const FailureModel& model,
                                    RandomStream& rng) {
  return sample_mixture(CategoricalSampler(w.x), w, model, rng);
}

/// Running mean / variance of importance weights (Welford, mergeable).
struct EstimatorState {
  std::size_t count = 0;
  double mean = 0.0;  // Pi-hat
  double m2 = 0.0;    // sum of squared deviations
  double violated_mean = 0.0;
  double max_weight = 0.0;

  void add(double weight, std::size_t violated_count) {
    ++count;
    const double delta = weight - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (weight - mean);
    violated_mean += (static_cast<double>(violated_count) - violated_mean) / static_cast<double>(count);
    max_weight = std::max(max_weight, weight);
  }

  /// Chan et al. pairwise combination.
  void merge(const EstimatorState& other) {
    if (other.count == 0) return;
    if (count == 0) {
      *this = other;
      return;
    }
    const double na = static_cast<double>(count);
    const double nb = static_cast<double>(other.count);
    const double n = na + nb;
    const double delta = other.mean - mean;
    mean += delta * nb / n;
    m2 += other.m2 + delta * delta * na * nb / n;
    violated_mean += (other.violated_mean - violated_mean) * nb / n;
    count += other.count;
    max_weight = std::max(max_weight, other.max_weight);
  }

  /// Sample variance of the weights.
  double weight_variance() const {
    return count > 1 ? std::max(m2, 0.0) / static_cast<double>(count - 1) : 0.0;
  }

  /// Empirical standard deviation of Pi-hat, s(Pi-hat).
  double std_error() const {
    return count > 0 ? std::sqrt(weight_variance() / static_cast<double>(count)) : 0.0;
  }
};

inline void update_estimate(EstimatorState& state, const MixtureSample& s) {
  state.add(s.ratio, s.violated.size());
}

struct UnionBounds {
  double lower = 0.0;  // max_i Pi_i
  double upper = 0.0;  // sum_i Pi_i
};

inline UnionBounds union_bounds(const FailureModel& model) {
  UnionBounds u;
  for (const auto& r : model.rows()) {
    u.lower = std::max(u.lower, r.tail_prob);
    u.upper += r.tail_prob;
  }
  return u;
}

}  // namespace gridrel
