#pragma once

// Online re-weighting of the mixture by entropic mirror descent, driven by
// stochastic gradients of the estimator variance (md-var) or of the
// KL divergence to the zero-variance sampler (md-kl).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gridrel/errors.hpp"
#include "gridrel/mixture.hpp"
#include "gridrel/random.hpp"

namespace gridrel {

enum class Method { mc, aloe, md_var, md_kl };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::mc: return "mc";
    case Method::aloe: return "aloe";
    case Method::md_var: return "md-var";
    case Method::md_kl: return "md-kl";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "mc") return Method::mc;
  if (s == "aloe") return Method::aloe;
  if (s == "md-var") return Method::md_var;
  if (s == "md-kl") return Method::md_kl;
  throw ConfigError("unknown method '" + s + "' (expected mc|aloe|md-var|md-kl)");
}

/// How the constant step size is scaled.
///
/// `online` divides by the root-mean-square sup-norm of the batch gradients
/// seen so far, an empirical stand-in for sqrt(M^2 + sigma^2) in the
/// mirror-descent rate bound. `bound` uses the a-priori bound Pi_ub / epsilon
/// instead; it is conservative enough that the weights barely move on rare
/// events and is kept for comparison.
enum class StepPolicy { online, bound };

struct AdaptiveConfig {
  Method method = Method::md_var;
  std::size_t samples = 1000;  // horizon N
  std::size_t batch = 32;
  double epsilon = 0.0;  // 0 selects default_epsilon(J)
  double eta0 = 1.0;
  StepPolicy policy = StepPolicy::online;
  bool record_weights = false;
};

struct OptimizerState {
  MixtureWeights weights;
  std::size_t iteration = 0;
  double eta = 0.0;
  double v_hat = 0.0;
  double grad_sq_sum = 0.0;  // sum of squared batch-gradient sup-norms
};

/// Variance-gradient contribution of one sample, accumulated into `g`.
///
/// d V / d x_i = -E_{p ~ D(x)}[ r(p)^3 1[omega_i^T p > b_i] / Pi_i ] with
/// r = upsilon / upsilon_D, so only the ratio and the tail probabilities are
/// needed; the raw Gaussian density never appears.
inline void accumulate_gradient_var(Eigen::VectorXd& g, const MixtureSample& s,
                                    const FailureModel& model, double scale = 1.0) {
  const double r3 = s.ratio * s.ratio * s.ratio;
  for (auto j : s.violated) {
    const double pj = model.row(j).tail_prob;
    if (pj > 0.0 && model.is_active(j)) g(static_cast<Eigen::Index>(j)) -= scale * r3 / pj;
  }
}

inline Eigen::VectorXd stochastic_gradient_var(const MixtureSample& s, const FailureModel& model) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.J()));
  accumulate_gradient_var(g, s, model);
  return g;
}

/// KL-gradient contribution: -(r / Pi-hat) * r * 1[violated_i] / Pi_i.
inline void accumulate_gradient_kl(Eigen::VectorXd& g, const MixtureSample& s,
                                   const FailureModel& model, double pi_hat,
                                   double scale = 1.0) {
  if (!(pi_hat > 0.0)) throw NumericalError("stochastic_gradient_kl: Pi-hat must be positive");
  const double c = s.ratio * s.ratio / pi_hat;
  for (auto j : s.violated) {
    const double pj = model.row(j).tail_prob;
    if (pj > 0.0 && model.is_active(j)) g(static_cast<Eigen::Index>(j)) -= scale * c / pj;
  }
}

/// `pi_hat` <= 0 falls back to the union-bound upper bound.
inline Eigen::VectorXd stochastic_gradient_kl(const MixtureSample& s, const FailureModel& model,
                                              double pi_hat) {
  if (!(pi_hat > 0.0)) pi_hat = union_bounds(model).upper;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.J()));
  accumulate_gradient_kl(g, s, model, pi_hat);
  return g;
}

/// Multiplicative-weights step x_i <- x_i exp(-eta g_i) / Z followed by the
/// epsilon floor. Exponents are shifted by their maximum before exp.
inline void mirror_step(MixtureWeights& w, const Eigen::VectorXd& g, double eta,
                        const std::vector<std::size_t>& active) {
  if (!g.allFinite()) throw NumericalError("mirror_step: non-finite gradient");
  if (active.empty()) return;
  double shift = -std::numeric_limits<double>::infinity();
  for (auto j : active) shift = std::max(shift, -eta * g(static_cast<Eigen::Index>(j)));
  double total = 0.0;
  for (auto j : active) {
    auto& v = w.x(static_cast<Eigen::Index>(j));
    v *= std::exp(-eta * g(static_cast<Eigen::Index>(j)) - shift);
    total += v;
  }
  if (!(total > 0.0)) throw NumericalError("mirror_step: weights collapsed");
  for (auto j : active) w.x(static_cast<Eigen::Index>(j)) /= total;
  project_floor(w.x, w.epsilon, active);
}

inline void mirror_step(OptimizerState& state, const Eigen::VectorXd& g,
                        const std::vector<std::size_t>& active) {
  mirror_step(state.weights, g, state.eta, active);
  ++state.iteration;
}

/// eta = eta0 * sqrt(log J / (5 N)) / gradient_scale, with eta0 clamped to (0, 1].
inline double step_size(std::size_t horizon, std::size_t J, double eta0, double gradient_scale) {
  if (!(eta0 > 0.0)) throw ConfigError("step_size: eta0 must be positive");
  eta0 = std::min(eta0, 1.0);
  if (J <= 1 || !(gradient_scale > 0.0)) return 0.0;
  return eta0 * std::sqrt(std::log(static_cast<double>(J)) / (5.0 * static_cast<double>(horizon))) /
         gradient_scale;
}

/// The a-priori bound policy: gradient scale Pi_ub / epsilon, i.e.
/// eta = eta0 * epsilon / Pi_ub * sqrt(log J / (5 N)).
inline double bound_step_size(std::size_t horizon, std::size_t J, double eta0, double epsilon,
                              double pi_upper) {
  if (!(pi_upper > 0.0) || !(epsilon > 0.0)) return 0.0;
  return step_size(horizon, J, eta0, pi_upper / epsilon);
}

struct TraceRow {
  std::size_t batch = 0;
  double pi_hat = 0.0;
  double std_error = 0.0;
  double v_hat = 0.0;
  double eta = 0.0;
  double avg_violated = 0.0;
};

struct AdaptiveResult {
  EstimatorState estimate;
  OptimizerState optimizer;
  Eigen::VectorXd x_initial;
  std::vector<TraceRow> trace;
  std::vector<Eigen::VectorXd> weight_history;  // x before each batch, if recorded
};

/// Importance sampling with weights frozen within each batch.
///
/// Starts from x proportional to Pi_i. For aloe the weights never change;
/// md-var and md-kl take one mirror step per batch from the batch-mean
/// stochastic gradient.
inline AdaptiveResult run_adaptive(const FailureModel& model, const AdaptiveConfig& cfg,
                                   RandomStream& rng) {
  if (cfg.method == Method::mc) throw ConfigError("run_adaptive: mc is not a mixture method");
  if (cfg.samples == 0) throw ConfigError("run_adaptive: samples must be >= 1");
  if (cfg.batch == 0) throw ConfigError("run_adaptive: batch must be >= 1");
  if (model.active().empty()) throw NumericalError("run_adaptive: every constraint is vacuous");

  const auto& active = model.active();
  const std::size_t J_active = active.size();
  const double epsilon = cfg.epsilon > 0.0 ? cfg.epsilon : default_epsilon(J_active);
  if (epsilon * static_cast<double>(J_active) > 1.0 + 1e-12)
    throw ConfigError("epsilon must not exceed 1/J (J = " + std::to_string(J_active) + ")");
  const double pi_upper = union_bounds(model).upper;

  AdaptiveResult res;
  res.optimizer.weights = proportional_weights(model, epsilon);
  res.x_initial = res.optimizer.weights.x;
  const bool adapt = cfg.method != Method::aloe && J_active > 1;

  Eigen::VectorXd grad(static_cast<Eigen::Index>(model.J()));
  std::vector<MixtureSample> batch;
  std::size_t done = 0;
  std::size_t batch_index = 0;
  while (done < cfg.samples) {
    const std::size_t size = std::min(cfg.batch, cfg.samples - done);
    if (cfg.record_weights) res.weight_history.push_back(res.optimizer.weights.x);
    const CategoricalSampler picker(res.optimizer.weights.x);
    batch.clear();
    double second_moment = 0.0;
    for (std::size_t k = 0; k < size; ++k) {
      batch.push_back(sample_mixture(picker, res.optimizer.weights, model, rng));
      update_estimate(res.estimate, batch.back());
      second_moment += batch.back().ratio * batch.back().ratio;
    }
    done += size;
    const double pi_hat = res.estimate.mean;
    res.optimizer.v_hat = second_moment / static_cast<double>(size) - pi_hat * pi_hat;

    double eta = 0.0;
    if (adapt && done < cfg.samples) {
      grad.setZero();
      const double inv = 1.0 / static_cast<double>(size);
      for (const auto& s : batch) {
        if (cfg.method == Method::md_var) accumulate_gradient_var(grad, s, model, inv);
        else accumulate_gradient_kl(grad, s, model, pi_hat > 0.0 ? pi_hat : pi_upper, inv);
      }
      if (cfg.policy == StepPolicy::online) {
        const double sup = grad.cwiseAbs().maxCoeff();
        res.optimizer.grad_sq_sum += sup * sup;
        const double rms = std::sqrt(res.optimizer.grad_sq_sum / static_cast<double>(batch_index + 1));
        eta = step_size(cfg.samples, J_active, cfg.eta0, rms);
      } else {
        eta = bound_step_size(cfg.samples, J_active, cfg.eta0, epsilon, pi_upper);
      }
      res.optimizer.eta = eta;
      mirror_step(res.optimizer, grad, active);
    }
    res.trace.push_back({batch_index, pi_hat, res.estimate.std_error(), res.optimizer.v_hat, eta,
                         res.estimate.violated_mean});
    ++batch_index;
  }
  return res;
}

}  // namespace gridrel
