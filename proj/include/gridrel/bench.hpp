#pragma once

// Baselines, synthetic polytopes and the stopping-rule benchmark.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <numbers>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gridrel/adaptive.hpp"
#include "gridrel/errors.hpp"
#include "gridrel/gaussian.hpp"
#include "gridrel/grid_model.hpp"
#include "gridrel/mixture.hpp"
#include "gridrel/random.hpp"

namespace gridrel {

enum class PolytopeKind { regular, degenerate };

inline std::string to_string(PolytopeKind k) {
  return k == PolytopeKind::regular ? "regular" : "degenerate";
}

inline PolytopeKind parse_polytope_kind(const std::string& s) {
  if (s == "regular") return PolytopeKind::regular;
  if (s == "degenerate") return PolytopeKind::degenerate;
  throw ConfigError("unknown synthetic kind '" + s + "' (expected regular|degenerate)");
}

struct SyntheticSpec {
  PolytopeKind kind = PolytopeKind::regular;
  std::size_t J = 3;
  double tau = 1.0;
  double perturbation = 1e-6;  // degenerate only
  std::uint64_t seed = 0;      // degenerate only
  bool normalize = false;      // rescale degenerate rows to unit norm

  void validate() const {
    if (kind == PolytopeKind::regular && J < 3)
      throw ConfigError("regular polytope needs J >= 3");
    if (kind == PolytopeKind::degenerate && J < 1)
      throw ConfigError("degenerate polytope needs J >= 1");
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("tau must be positive");
    if (kind == PolytopeKind::degenerate && !(perturbation > 0.0))
      throw ConfigError("perturbation must be positive");
  }

  std::string name() const {
    return to_string(kind) + "-J" + std::to_string(J);
  }
};

struct SyntheticCase {
  SyntheticSpec spec;
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
  std::vector<std::string> labels;

  FailureModel model() const {
    return FailureModel(NominalGaussian::standard(2), W, b, labels);
  }
};

/// Rows omega_j^T p <= tau under a two-dimensional standard normal.
///
/// regular:    omega_j = (sin 2 pi j / J, cos 2 pi j / J), j = 1..J.
/// degenerate: omega_1 = (0, 1), omega_j = (xi_j, -1 - xi_j) with
///             xi_j ~ U[-perturbation, perturbation] from the seeded stream.
inline SyntheticCase generate_polytope(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticCase out;
  out.spec = spec;
  const auto J = static_cast<Eigen::Index>(spec.J);
  out.W.resize(J, 2);
  out.b = Eigen::VectorXd::Constant(J, spec.tau);
  if (spec.kind == PolytopeKind::regular) {
    for (Eigen::Index j = 0; j < J; ++j) {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(j + 1) / static_cast<double>(J);
      out.W(j, 0) = std::sin(a);
      out.W(j, 1) = std::cos(a);
    }
  } else {
    RandomStream rng(spec.seed, 0x706f6c79);
    out.W(0, 0) = 0.0;
    out.W(0, 1) = 1.0;
    for (Eigen::Index j = 1; j < J; ++j) {
      const double xi = spec.perturbation * (2.0 * rng.uniform() - 1.0);
      out.W(j, 0) = xi;
      out.W(j, 1) = -1.0 - xi;
      if (spec.normalize) out.W.row(j) /= out.W.row(j).norm();
    }
  }
  for (Eigen::Index j = 0; j < J; ++j) out.labels.push_back("face:" + std::to_string(j + 1));
  return out;
}

/// Grid case -> failure model over the reliability polytope.
struct GridModel {
  GridCase grid;
  NetworkMatrices mats;
  ReliabilityPolytope polytope;
  FailureModel model;
};

inline GridModel make_grid_model(const GridCase& gc, double sigma_scale) {
  GridModel gm;
  gm.grid = gc;
  gm.mats = build_matrices(gc);
  gm.polytope = build_polytope(gm.mats, gc);
  std::vector<bool> vacuous;
  for (const auto& l : gm.polytope.labels) vacuous.push_back(l.vacuous);
  gm.model = FailureModel(grid_gaussian(gc, sigma_scale), gm.polytope.W, gm.polytope.b,
                          gm.polytope.label_strings(), vacuous);
  return gm;
}

struct BenchResult {
  std::string method;
  std::size_t samples = 0;
  double pi_hat = 0.0;
  double std_error = 0.0;
  double avg_violated = 0.0;
  double wall_ms = 0.0;
  bool stop_pass = false;
  bool extrapolated = false;
  bool audit_pass = true;  // re-check at 2N in audit mode
  std::string error;       // per-cell failure, empty on success
};

/// Pi/2 <= Pi-hat - s and Pi-hat + s <= 3 Pi / 2.
inline bool stopping_rule_holds(double pi_hat, double s, double pi) {
  return pi / 2.0 <= pi_hat - s && pi_hat + s <= 1.5 * pi;
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

/// Fraction of nominal samples outside the polytope.
inline BenchResult run_plain_mc(const FailureModel& model, std::size_t N, RandomStream& rng) {
  if (N == 0) throw ConfigError("samples must be >= 1");
  Stopwatch clock;
  std::size_t hits = 0;
  double violated_sum = 0.0;
  const auto& g = model.gaussian();
  for (std::size_t k = 0; k < N; ++k) {
    const Eigen::VectorXd p = g.sample(rng);
    const auto v = model.violated(p);
    if (!v.empty()) {
      ++hits;
      violated_sum += static_cast<double>(v.size());
    }
  }
  BenchResult r;
  r.method = to_string(Method::mc);
  r.samples = N;
  r.pi_hat = static_cast<double>(hits) / static_cast<double>(N);
  r.std_error = std::sqrt(r.pi_hat * (1.0 - r.pi_hat) / static_cast<double>(N));
  r.avg_violated = hits ? violated_sum / static_cast<double>(hits) : 0.0;
  r.wall_ms = clock.elapsed_ms();
  return r;
}

/// One estimate with any method. Models with a certain failure (Pi = 1) or
/// with every row vacuous (Pi = 0) are answered exactly for the mixture methods.
inline BenchResult run_method(const FailureModel& model, AdaptiveConfig cfg, RandomStream& rng) {
  if (cfg.samples == 0) throw ConfigError("samples must be >= 1");
  if (cfg.method == Method::mc) return run_plain_mc(model, cfg.samples, rng);
  Stopwatch clock;
  BenchResult r;
  r.method = to_string(cfg.method);
  r.samples = cfg.samples;
  if (model.certain_failure()) {
    r.pi_hat = 1.0;
  } else if (!model.all_vacuous()) {
    const auto res = run_adaptive(model, cfg, rng);
    r.pi_hat = res.estimate.mean;
    r.std_error = res.estimate.std_error();
    r.avg_violated = res.estimate.violated_mean;
  }
  r.wall_ms = clock.elapsed_ms();
  return r;
}

/// Importance sampling under a prescribed weight schedule: `schedule[k]`
/// supplies `count` samples drawn with weights `x`.
inline EstimatorState run_fixed_schedule(
    const FailureModel& model, const std::vector<std::pair<Eigen::VectorXd, std::size_t>>& schedule,
    RandomStream& rng) {
  EstimatorState est;
  for (const auto& [x, count] : schedule) {
    MixtureWeights w{x, 0.0};
    const CategoricalSampler picker(x);
    for (std::size_t k = 0; k < count; ++k) update_estimate(est, sample_mixture(picker, w, model, rng));
  }
  return est;
}

struct Schedule {
  std::size_t start = 64;
  std::size_t cap = std::size_t{1} << 22;
  bool audit = false;
};

/// Smallest N of the doubling schedule at which a fresh run satisfies the
/// stopping rule against `oracle_pi`. Each N uses its own child stream of
/// `seed`. Plain MC that exhausts the budget reports 1/Pi as extrapolated.
inline BenchResult samples_to_tolerance(const FailureModel& model, AdaptiveConfig cfg,
                                        double oracle_pi, std::uint64_t seed,
                                        const Schedule& schedule = {}) {
  if (!(oracle_pi > 0.0)) throw ConfigError("samples_to_tolerance: oracle Pi must be positive");
  if (schedule.start == 0 || schedule.cap < schedule.start)
    throw ConfigError("samples_to_tolerance: bad schedule");
  Stopwatch clock;
  BenchResult last;
  std::uint64_t level = 0;
  for (std::size_t N = schedule.start; N <= schedule.cap; N *= 2, ++level) {
    cfg.samples = N;
    RandomStream rng(seed, level);
    last = run_method(model, cfg, rng);
    last.stop_pass = stopping_rule_holds(last.pi_hat, last.std_error, oracle_pi);
    if (last.stop_pass) {
      if (schedule.audit) {
        cfg.samples = 2 * N;
        RandomStream audit_rng(seed, level + 1);
        const auto again = run_method(model, cfg, audit_rng);
        last.audit_pass = stopping_rule_holds(again.pi_hat, again.std_error, oracle_pi);
      }
      last.wall_ms = clock.elapsed_ms();
      return last;
    }
  }
  if (cfg.method == Method::mc) {
    last.samples = static_cast<std::size_t>(std::ceil(1.0 / oracle_pi));
    last.extrapolated = true;
  }
  last.stop_pass = false;
  last.wall_ms = clock.elapsed_ms();
  return last;
}

/// Long MD-Var run used as ground truth where no quadrature applies.
inline BenchResult reference_estimate(const FailureModel& model, std::uint64_t seed,
                                      std::size_t samples = 100000) {
  AdaptiveConfig cfg;
  cfg.method = Method::md_var;
  cfg.samples = samples;
  RandomStream rng(seed, 0x726566);
  auto r = run_method(model, cfg, rng);
  r.method = "reference";
  return r;
}

/// Runs `task(i)` for i in [0, count) on up to `threads` workers. Tasks own
/// their outputs; the first exception is rethrown after all workers join.
inline void parallel_for(std::size_t count, std::size_t threads,
                         const std::function<void(std::size_t)>& task) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < count; i += threads) task(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace gridrel
