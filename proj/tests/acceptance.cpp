// Acceptance checks. `acceptance --criterion N` runs one check, no argument
// runs all of them. Each check prints one PASS/FAIL/SKIP line plus detail
// lines; exit code 0 on pass, 1 on fail, 77 on skip.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "gridrel/cli.hpp"
#include "gridrel/gridrel.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace gridrel;

namespace {

enum class Verdict { pass, fail, skip };

struct Outcome {
  Verdict verdict = Verdict::fail;
  std::string summary;
  std::vector<std::string> details;
};

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Verdict verdict_of(bool ok) { return ok ? Verdict::pass : Verdict::fail; }

AdaptiveConfig config(Method m, std::size_t N) {
  AdaptiveConfig c;
  c.method = m;
  c.samples = N;
  return c;
}

struct Moments {
  double sum = 0.0, sq = 0.0;
  int n = 0;
  void add(double v) {
    sum += v;
    sq += v * v;
    ++n;
  }
  double mean() const { return sum / n; }
  double variance() const { return (sq - sum * sum / n) / (n - 1); }
};

// 1. A single row is sampled exactly: every weight equals Pi_1.
Outcome single_constraint() {
  Outcome o;
  const auto model = testing_support::single_row(1.7);
  const double oracle = normal::sf(1.7);
  bool ok = true;
  for (auto m : {Method::aloe, Method::md_var, Method::md_kl})
    for (std::size_t N : {1, 2, 17, 1000}) {
      RandomStream rng(1, N);
      const auto r = run_method(model, config(m, N), rng);
      const bool good = std::abs(r.pi_hat - oracle) <= 1e-12 * oracle && r.std_error <= 1e-12;
      ok = ok && good;
      if (!good || N == 1000)
        o.details.push_back(fmt("%s N=%zu: Pi_hat=%.17g oracle=%.17g s=%.3g", to_string(m).c_str(), N, r.pi_hat,
                                oracle, r.std_error));
    }
  o.verdict = verdict_of(ok);
  o.summary = "single constraint is estimated exactly by ALOE, MD-Var and MD-KL";
  return o;
}

// 2. Unbiasedness on two orthogonal rows with an inclusion-exclusion oracle.
Outcome unbiasedness() {
  Outcome o;
  const auto model = testing_support::orthogonal_pair();
  const double oracle = testing_support::orthogonal_pair_pi();
  bool ok = true;
  for (auto m : {Method::aloe, Method::md_var, Method::md_kl}) {
    Moments mo;
    for (int run = 0; run < 500; ++run) {
      RandomStream rng(2, static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(run));
      mo.add(run_method(model, config(m, 256), rng).pi_hat);
    }
    const double se = std::sqrt(mo.variance() / mo.n);
    const double z = (mo.mean() - oracle) / se;
    ok = ok && std::abs(z) <= 4.0;
    o.details.push_back(fmt("%s: mean=%.8e oracle=%.8e pooled stderr=%.3e z=%+.2f", to_string(m).c_str(),
                            mo.mean(), oracle, se, z));
  }
  o.verdict = verdict_of(ok);
  o.summary = "orthogonal pair, 500 runs x N=256, means within 4 pooled stderr";
  return o;
}

// 3. Regular 360-gon at tau = 6.
Outcome regular_polygon() {
  Outcome o;
  SyntheticSpec spec;
  spec.J = 360;
  spec.tau = 6.0;
  const auto model = generate_polytope(spec).model();
  const double oracle = quadrature::exterior_probability(model);
  o.details.push_back(fmt("quadrature Pi=%.10e, exp(-18)=%.10e", oracle, std::exp(-18.0)));
  bool ok = true;
  for (auto m : {Method::md_var, Method::aloe}) {
    int inside = 0;
    double lo = INFINITY, hi = 0.0;
    for (int run = 0; run < 100; ++run) {
      RandomStream rng(3, static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(run));
      const double ratio = run_method(model, config(m, 1000), rng).pi_hat / oracle;
      inside += ratio >= 0.9 && ratio <= 1.1 ? 1 : 0;
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
    ok = ok && inside >= 90;
    o.details.push_back(fmt("%s: %d/100 runs with ratio in [0.9, 1.1] (range %.4f..%.4f)", to_string(m).c_str(),
                            inside, lo, hi));
  }
  RandomStream rng(3, 99);
  const auto mc = run_plain_mc(model, 1000000, rng);
  ok = ok && mc.pi_hat == 0.0;
  o.details.push_back(fmt("plain MC with 1e6 samples: Pi_hat=%g", mc.pi_hat));
  o.verdict = verdict_of(ok);
  o.summary = "regular polygon J=360 tau=6, N=1000";
  return o;
}

// 4. Degenerate polytope: one row against 1499 near-copies of its opposite.
Outcome degenerate_polytope() {
  Outcome o;
  SyntheticSpec spec;
  spec.kind = PolytopeKind::degenerate;
  spec.J = 1500;
  spec.tau = 1.0;
  spec.perturbation = 1e-6;
  spec.seed = 4;
  const auto model = generate_polytope(spec).model();
  const double target = 2.0 * normal::sf(1.0);
  const int reps = 30;
  int md_smaller = 0, within = 0;
  double first_error = 0.0;
  Moments md_est, aloe_est;
  for (int rep = 0; rep < reps; ++rep) {
    RandomStream a(4, 1, static_cast<std::uint64_t>(rep));
    RandomStream b(4, 2, static_cast<std::uint64_t>(rep));
    const auto md = run_method(model, config(Method::md_var, 1000), a);
    const auto al = run_method(model, config(Method::aloe, 1000), b);
    const double err = std::abs(md.pi_hat / target - 1.0);
    if (rep == 0) first_error = err;
    within += err <= 0.05 ? 1 : 0;
    md_smaller += md.std_error < al.std_error ? 1 : 0;
    md_est.add(md.pi_hat);
    aloe_est.add(al.pi_hat);
  }
  const bool accurate = first_error <= 0.05;
  const bool ordered = md_smaller >= 24;
  o.details.push_back(fmt("MD-Var relative error vs 2 Phi(-1)=%.6f: %.4f on the first repetition, <= 5%% in %d/%d",
                          target, first_error, within, reps));
  o.details.push_back(fmt("MD-Var s < ALOE s in %d/%d repetitions (need 24)", md_smaller, reps));
  o.details.push_back(fmt("mean Pi_hat over repetitions: MD-Var %.4f, ALOE %.4f", md_est.mean(), aloe_est.mean()));
  const double q = normal::sf(1.0);
  const double x1 = 1.0 / 1500.0;
  o.details.push_back(fmt("analysis: the lone row starts at weight 1/1500, so each draw from it carries ratio "
                          "Pi_1/x_1 = %.0f and adds about %.3f to Pi_hat at N=1000. Under the starting weights "
                          "%.0f%% of runs draw nothing from it and report about Phi(-1) = %.3f; one draw gives "
                          "about %.3f. Neither is within 5%% of %.3f.",
                          q / x1, q / x1 / 1000.0, 100.0 * std::pow(1.0 - x1, 1000.0), q, q + q / x1 / 1000.0,
                          target));
  o.details.push_back("analysis: until it is hit, the lone row gets a zero gradient entry and mirror descent lowers "
                      "its weight; the first hit produces a batch gradient of order 1e6 that shrinks every later "
                      "step, so the weights barely move within 1000 samples. In a run that never hits it, ALOE's ratios are "
                      "exactly equal (s = 0) while MD-Var's are not, which decides most s comparisons.");
  o.verdict = verdict_of(accurate && ordered);
  o.summary = "degenerate polytope J=1500 tau=1, N=1000";
  return o;
}

// 5. Batch gradients against central differences of the batch objectives.
Outcome gradients() {
  Outcome o;
  const auto model = testing_support::orthogonal_pair();
  RandomStream pick(5);
  double worst_var = 0.0, worst_kl = 0.0;
  for (int point = 0; point < 5; ++point) {
    Eigen::VectorXd x0(2);
    x0(0) = 0.1 + 0.8 * pick.uniform();
    x0(1) = 1.0 - x0(0);
    const MixtureWeights w{x0, 0.0};
    const CategoricalSampler picker(x0);
    RandomStream rng(5, static_cast<std::uint64_t>(point) + 1);
    std::vector<MixtureSample> batch;
    for (int k = 0; k < 512; ++k) batch.push_back(sample_mixture(picker, w, model, rng));
    const double n = static_cast<double>(batch.size());
    double pi_hat = 0.0;
    for (const auto& s : batch) pi_hat += s.ratio / n;

    Eigen::VectorXd gv = Eigen::VectorXd::Zero(2), gk = Eigen::VectorXd::Zero(2);
    for (const auto& s : batch) {
      accumulate_gradient_var(gv, s, model, 1.0 / n);
      accumulate_gradient_kl(gk, s, model, pi_hat, 1.0 / n);
    }
    auto second_moment = [&](const Eigen::VectorXd& x) {
      double v = 0.0;
      for (const auto& s : batch) v += density_ratio(s.violated, x, model) * s.ratio;
      return v / n;
    };
    auto cross_entropy = [&](const Eigen::VectorXd& x) {
      double v = 0.0;
      for (const auto& s : batch) v -= s.ratio / pi_hat * std::log(mixture_density_factor(s.violated, x, model));
      return v / n;
    };
    const double h = 1e-5;
    for (int i = 0; i < 2; ++i) {
      Eigen::VectorXd up = x0, down = x0;
      up(i) += h;
      down(i) -= h;
      const double fv = (second_moment(up) - second_moment(down)) / (2 * h);
      const double fk = (cross_entropy(up) - cross_entropy(down)) / (2 * h);
      worst_var = std::max(worst_var, std::abs(gv(i) / fv - 1.0));
      worst_kl = std::max(worst_kl, std::abs(gk(i) / fk - 1.0));
    }
  }
  o.details.push_back(fmt("largest relative deviation: variance gradient %.2e (limit 1e-6), KL gradient %.2e "
                          "(limit 1e-4)",
                          worst_var, worst_kl));
  o.verdict = verdict_of(worst_var <= 1e-6 && worst_kl <= 1e-4);
  o.summary = "batch gradients match central finite differences at 5 interior points";
  return o;
}

// 6. Variance of a frozen two-point schedule equals N^-2 sum_k V(x_k).
Outcome variance_decomposition() {
  Outcome o;
  const auto model = testing_support::orthogonal_pair();
  const double pi = testing_support::orthogonal_pair_pi();
  const Eigen::Vector2d xa(0.2, 0.8), xb(0.7, 0.3);
  const std::size_t half = 128;
  const double N = 2.0 * half;
  const double va = quadrature::mixture_variance(model, xa, pi);
  const double vb = quadrature::mixture_variance(model, xb, pi);
  const double predicted = (half * va + half * vb) / (N * N);
  Moments mo;
  for (int run = 0; run < 500; ++run) {
    RandomStream rng(6, static_cast<std::uint64_t>(run));
    mo.add(run_fixed_schedule(model, {{xa, half}, {xb, half}}, rng).mean);
  }
  const double rel = mo.variance() / predicted - 1.0;
  o.details.push_back(fmt("V(x_a)=%.6e V(x_b)=%.6e by quadrature; closed form %.6e %.6e", va, vb,
                          testing_support::orthogonal_pair_second_moment(xa) - pi * pi,
                          testing_support::orthogonal_pair_second_moment(xb) - pi * pi));
  o.details.push_back(fmt("empirical Var=%.6e predicted=%.6e relative difference %+.3f", mo.variance(), predicted,
                          rel));
  o.verdict = verdict_of(std::abs(rel) <= 0.15);
  o.summary = "frozen two-point schedule, 500 runs x N=256, variance within 15%";
  return o;
}

// 7. Stopping-rule sample counts, plain MC against MD-Var.
Outcome stopping_rule() {
  Outcome o;
  const double tau = testing_support::regular_tau_for(360, 2.5e-3);
  SyntheticSpec spec;
  spec.J = 360;
  spec.tau = tau;
  const auto model = generate_polytope(spec).model();
  const double pi = quadrature::exterior_probability(model);
  const auto mc = samples_to_tolerance(model, config(Method::mc, 1), pi, 7);
  const auto md = samples_to_tolerance(model, config(Method::md_var, 1), pi, 7);
  o.details.push_back(fmt("tau=%.6f Pi=%.6e", tau, pi));
  o.details.push_back(fmt("samples to tolerance: MC %zu%s, MD-Var %zu, ratio %.1f", mc.samples,
                          mc.extrapolated ? " (extrapolated)" : "", md.samples,
                          static_cast<double>(mc.samples) / static_cast<double>(md.samples)));
  o.verdict = verdict_of(md.stop_pass && mc.samples >= 10 * md.samples);
  o.summary = "stopping rule on a regular polygon with Pi=2.5e-3, MC needs >= 10x MD-Var";
  return o;
}

// 8. Triangle network against hand-derived matrices.
Outcome triangle_pipeline() {
  Outcome o;
  const auto gc = load_case_file(testing_support::case_path("triangle.json"));
  const auto gm = make_grid_model(gc, 0.25);

  // B = 3 I - 1 1^T for unit susceptances, so B^+ = (I - 1 1^T / 3) / 3.
  const Eigen::Matrix3d pinv = (Eigen::Matrix3d::Identity() - Eigen::Matrix3d::Ones() / 3.0) / 3.0;
  // Slack bus first. Injections are (-(p2 + p3), p2, p3), so theta = injections / 3.
  Eigen::Matrix3d angle;
  angle << 1.0, -2.0, -1.0,  // line 1-2
      0.0, 1.0, -1.0,        // line 2-3
      1.0, -1.0, -2.0;       // line 1-3
  angle /= 3.0;
  Eigen::Matrix3d C;
  C << 0.0, -1.0, -1.0, -1.0, 1.0, 0.0, -1.0, 0.0, 1.0;
  Eigen::MatrixXd W(12, 3);
  W << angle, -angle, C, -C;
  Eigen::VectorXd b(12);
  b << 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 2.0, 1.0, kLimitSentinel, 2.0, 0.0, kLimitSentinel;

  const double dpinv = (gm.mats.laplacian_pinv - pinv).cwiseAbs().maxCoeff();
  const double dW = (gm.polytope.W - W).cwiseAbs().maxCoeff();
  const double db = (gm.polytope.b - b).cwiseAbs().maxCoeff();
  o.details.push_back(fmt("max |B^+ - oracle|=%.2e, max |W - oracle|=%.2e, max |b - oracle|=%.2e", dpinv, dW, db));

  const auto& g = gm.model.gaussian();
  RandomStream rng(8);
  int mismatches = 0, outside = 0, borderline = 0;
  for (int k = 0; k < 10000; ++k) {
    const Eigen::VectorXd p = g.sample(rng);
    Eigen::Vector3d inj(-(p(1) + p(2)), p(1), p(2));
    const Eigen::Vector3d theta = pinv * inj;
    const double margins[] = {0.5 - std::abs(theta(0) - theta(1)), 0.5 - std::abs(theta(1) - theta(2)),
                              0.5 - std::abs(theta(0) - theta(2)), 2.0 - inj(0), inj(0) + 2.0,
                              1.0 - inj(1), inj(1)};
    double worst = INFINITY;
    for (double m : margins) worst = std::min(worst, m);
    const bool direct = worst >= 0.0;
    const bool model_inside = gm.model.violated(p).empty();
    outside += direct ? 0 : 1;
    if (std::abs(worst) <= 1e-10) ++borderline;
    else if (direct != model_inside) ++mismatches;
  }
  o.details.push_back(fmt("1e4 nominal samples: %d outside, %d disagreements, %d within 1e-10 of a face", outside,
                          mismatches, borderline));
  o.verdict = verdict_of(dpinv <= 1e-10 && dW <= 1e-10 && db <= 1e-10 && mismatches == 0);
  o.summary = "triangle case matrices and membership match the hand derivation";
  return o;
}

// 9. 30-bus spot check, only with a converted fixture on disk.
Outcome ieee30_spot_check() {
  Outcome o;
  const std::string path = testing_support::case_path("ieee30.json");
  if (!fs::exists(path)) {
    o.verdict = Verdict::skip;
    o.summary = "30-bus spot check needs data/cases/ieee30.json, which is not shipped";
    o.details.push_back("see README: a faithful conversion does not reproduce the reference magnitude");
    return o;
  }
  const auto gm = make_grid_model(with_theta_max(load_case_file(path), std::numbers::pi / 8), 0.25);
  RandomStream a(9, 1), b(9, 2);
  const auto md = run_method(gm.model, config(Method::md_var, 200), a);
  const auto al = run_method(gm.model, config(Method::aloe, 200), b);
  const double rel = md.pi_hat / 3.1e-3 - 1.0;
  o.details.push_back(fmt("MD-Var Pi_hat=%.4e (relative to 3.1e-3: %+.3f) s=%.3e; ALOE s=%.3e", md.pi_hat, rel,
                          md.std_error, al.std_error));
  o.verdict = verdict_of(std::abs(rel) <= 0.2 && md.std_error < al.std_error);
  o.summary = "30-bus case at theta=pi/8, N=200";
  return o;
}

// 10. Every command twice with the same configuration gives identical bytes.
Outcome determinism() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "gridrel_acceptance_determinism";
  fs::remove_all(root);
  const std::vector<std::vector<std::string>> commands{
      {"estimate", "--case", testing_support::case_path("five_bus.json"), "--method", "md-var", "--samples", "2000",
       "--seed", "10", "--weights-history"},
      {"estimate", "--synthetic", "regular", "--faces", "360", "--tau", "6", "--method", "md-kl", "--samples",
       "1000", "--seed", "10"},
      {"benchmark", "--synthetic", "regular", "--faces", "36", "--tau", "3", "--method", "mc,aloe,md-var,md-kl",
       "--runs", "4", "--samples", "500", "--seed", "10", "--threads", "3"},
      {"benchmark", "--case", testing_support::case_path("triangle.json"), "--theta-max", "0.3,0.4", "--mode",
       "tolerance", "--max-samples", "65536", "--reference-samples", "20000", "--seed", "10"},
      {"generate", "--synthetic", "degenerate", "--faces", "1500", "--tau", "1", "--seed", "10"},
      {"polytope-export", "--case", testing_support::case_path("five_bus.json")}};
  auto slurp = [](const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  bool ok = true;
  std::size_t files = 0;
  for (const auto& cmd : commands) {
    std::vector<std::string> outs;
    for (const char* tag : {"a", "b"}) {
      std::vector<std::string> args{"gridrel"};
      args.insert(args.end(), cmd.begin(), cmd.end());
      args.insert(args.end(), {"--out", (root / tag).string(), "--quiet"});
      std::vector<const char*> argv;
      for (const auto& s : args) argv.push_back(s.c_str());
      std::ostringstream out, err;
      const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
      if (code != 0) {
        ok = false;
        o.details.push_back(cmd[0] + " exited with " + std::to_string(code) + ": " + err.str());
      }
    }
    for (const auto& e : fs::directory_iterator(root / "a")) {
      ++files;
      if (slurp(e.path()) != slurp(root / "b" / e.path().filename())) {
        ok = false;
        o.details.push_back("differs: " + cmd[0] + " " + e.path().filename().string());
      }
    }
    fs::remove_all(root);
  }
  o.details.push_back(fmt("%zu commands, %zu output files compared byte for byte", commands.size(), files));
  o.verdict = verdict_of(ok && files > 0);
  o.summary = "repeated commands with the same seed give byte-identical outputs";
  return o;
}

struct Criterion {
  int id;
  double budget_s;
  std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all{
      {1, 1, single_constraint},      {2, 30, unbiasedness},    {3, 120, regular_polygon},
      {4, 120, degenerate_polytope},  {5, 10, gradients},       {6, 60, variance_decomposition},
      {7, 300, stopping_rule},        {8, 10, triangle_pipeline}, {9, 60, ieee30_spot_check},
      {10, 120, determinism}};
  return all;
}

int report(const Criterion& c) {
  Stopwatch clock;
  Outcome o;
  try {
    o = c.run();
  } catch (const std::exception& e) {
    o.verdict = Verdict::fail;
    o.summary = std::string("error: ") + e.what();
  }
  const double seconds = clock.elapsed_ms() / 1000.0;
  if (o.verdict == Verdict::pass && seconds > c.budget_s) {
    o.verdict = Verdict::fail;
    o.details.push_back(fmt("took %.1f s, budget %.0f s", seconds, c.budget_s));
  }
  const char* tag = o.verdict == Verdict::pass ? "PASS" : o.verdict == Verdict::skip ? "SKIP" : "FAIL";
  std::cout << "criterion " << c.id << ": " << tag << ": " << o.summary << fmt(" (%.2f s)", seconds) << "\n";
  for (const auto& d : o.details) std::cout << "    " << d << "\n";
  std::cout.flush();
  return o.verdict == Verdict::pass ? 0 : o.verdict == Verdict::skip ? 77 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc == 3 && std::string(argv[1]) == "--criterion") {
    const int id = std::atoi(argv[2]);
    for (const auto& c : criteria())
      if (c.id == id) return report(c);
    std::cerr << "unknown criterion " << argv[2] << "\n";
    return 2;
  }
  if (argc != 1) {
    std::cerr << "usage: acceptance [--criterion N]\n";
    return 2;
  }
  int failed = 0;
  for (const auto& c : criteria()) failed += report(c) == 1 ? 1 : 0;
  return failed ? 1 : 0;
}
