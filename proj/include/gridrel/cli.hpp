#pragma once

// Command-line front end: estimate, benchmark, generate, polytope-export.
//
// Exit codes: 0 success, 2 configuration error, 3 case error, 4 numerical
// failure. Logs go to the error stream, data to files.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gridrel/adaptive.hpp"
#include "gridrel/bench.hpp"
#include "gridrel/csv.hpp"
#include "gridrel/errors.hpp"
#include "gridrel/grid_model.hpp"
#include "gridrel/mixture.hpp"
#include "gridrel/normal.hpp"
#include "gridrel/quadrature.hpp"

namespace gridrel::cli {

enum ExitCode : int { kOk = 0, kUnexpected = 1, kConfig = 2, kCase = 3, kNumerical = 4 };

struct RunConfig {
  std::string command;
  std::vector<std::string> cases;
  std::string synthetic;  // regular | degenerate, empty for grid cases
  std::size_t faces = 360;
  double tau = 6.0;
  double perturbation = 1e-6;
  bool normalize = false;
  std::vector<std::string> methods;
  std::size_t samples = 1000;
  std::size_t batch = 32;
  std::vector<double> theta_max;
  std::optional<double> sigma_scale;
  std::optional<double> epsilon;
  double eta0 = 1.0;
  std::string step_policy = "online";
  std::optional<std::uint64_t> seed;
  std::size_t runs = 1;
  std::string out = ".";
  std::string mode = "fixed";  // benchmark: fixed | tolerance
  std::size_t max_samples = std::size_t{1} << 22;
  std::size_t reference_samples = 100000;
  std::size_t threads = 1;
  bool timing = false;
  bool weights_history = false;
  bool quiet = false;
};

/// One estimation target: a grid case at one angle bound, or a synthetic polytope.
struct Target {
  std::string name;
  std::optional<double> theta;
  bool synthetic = false;
  std::optional<SyntheticCase> poly;
  std::optional<GridModel> grid;

  FailureModel synthetic_model;

  const FailureModel& model() const { return grid ? grid->model : synthetic_model; }
};

namespace detail {

inline std::string num(double v) { return csv::format_number(v); }

inline std::string theta_field(const std::optional<double>& t) { return t ? num(*t) : "NA"; }

inline void log(const RunConfig& cfg, std::ostream& err, const std::string& msg) {
  if (!cfg.quiet) err << "gridrel: " << msg << '\n';
}

inline void validate(const RunConfig& cfg) {
  if (cfg.command != "polytope-export" && !cfg.seed)
    throw ConfigError("--seed is required");
  if (cfg.samples == 0) throw ConfigError("--samples must be >= 1");
  if (cfg.batch == 0) throw ConfigError("--batch must be >= 1");
  if (cfg.runs == 0) throw ConfigError("--runs must be >= 1");
  if (cfg.threads == 0) throw ConfigError("--threads must be >= 1");
  if (cfg.max_samples == 0 || cfg.reference_samples == 0)
    throw ConfigError("sample budgets must be >= 1");
  if (!(cfg.eta0 > 0.0)) throw ConfigError("--eta0 must be positive");
  if (cfg.epsilon && !(*cfg.epsilon > 0.0)) throw ConfigError("--epsilon must be positive");
  if (cfg.sigma_scale && !(*cfg.sigma_scale > 0.0))
    throw ConfigError("--sigma-scale must be positive");
  for (double t : cfg.theta_max)
    if (!(t > 0.0) || !std::isfinite(t)) throw ConfigError("--theta-max must be positive");
  if (!(cfg.tau > 0.0)) throw ConfigError("--tau must be positive");
  if (!(cfg.perturbation > 0.0)) throw ConfigError("--perturbation must be positive");
  if (cfg.step_policy != "online" && cfg.step_policy != "bound")
    throw ConfigError("--step-policy must be online or bound");
  if (cfg.mode != "fixed" && cfg.mode != "tolerance")
    throw ConfigError("--mode must be fixed or tolerance");
  for (const auto& m : cfg.methods) parse_method(m);
  const bool has_case = !cfg.cases.empty();
  const bool has_syn = !cfg.synthetic.empty();
  if (cfg.command == "generate") {
    if (!has_syn) throw ConfigError("generate needs --synthetic");
    return;
  }
  if (cfg.command == "polytope-export" && !has_case)
    throw ConfigError("polytope-export needs --case");
  if (has_case == has_syn) throw ConfigError("give exactly one of --case or --synthetic");
  if (has_syn && !cfg.theta_max.empty())
    throw ConfigError("--theta-max applies to grid cases only");
}

inline SyntheticSpec synthetic_spec(const RunConfig& cfg) {
  SyntheticSpec s;
  s.kind = parse_polytope_kind(cfg.synthetic);
  s.J = cfg.faces;
  s.tau = cfg.tau;
  s.perturbation = cfg.perturbation;
  s.seed = cfg.seed.value_or(0);
  s.normalize = cfg.normalize;
  s.validate();
  return s;
}

inline std::vector<Target> build_targets(const RunConfig& cfg) {
  std::vector<Target> out;
  if (!cfg.synthetic.empty()) {
    Target t;
    t.synthetic = true;
    t.poly = generate_polytope(synthetic_spec(cfg));
    t.name = t.poly->spec.name();
    t.synthetic_model = t.poly->model();
    out.push_back(std::move(t));
    return out;
  }
  for (const auto& path : cfg.cases) {
    const GridCase base = load_case_file(path);
    const double sigma = cfg.sigma_scale.value_or(base.sigma_scale);
    std::vector<std::optional<double>> thetas;
    if (cfg.theta_max.empty()) thetas.emplace_back();
    for (double t : cfg.theta_max) thetas.emplace_back(t);
    for (const auto& th : thetas) {
      Target t;
      t.theta = th;
      t.grid = make_grid_model(th ? with_theta_max(base, *th) : base, sigma);
      t.name = base.name.empty() ? std::filesystem::path(path).stem().string() : base.name;
      out.push_back(std::move(t));
    }
  }
  return out;
}

inline AdaptiveConfig adaptive_config(const RunConfig& cfg, Method m) {
  AdaptiveConfig a;
  a.method = m;
  a.samples = cfg.samples;
  a.batch = cfg.batch;
  a.epsilon = cfg.epsilon.value_or(0.0);
  a.eta0 = cfg.eta0;
  a.policy = cfg.step_policy == "bound" ? StepPolicy::bound : StepPolicy::online;
  return a;
}

inline std::filesystem::path out_dir(const RunConfig& cfg) {
  std::filesystem::path dir(cfg.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + cfg.out + "': " + ec.message());
  return dir;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << doc.dump(2) << '\n';
}

inline std::string wall_field(const RunConfig& cfg, double ms) { return cfg.timing ? num(ms) : "NA"; }

/// Oracle Pi: quadrature for synthetic targets, a long MD-Var run for grids.
inline std::pair<double, std::string> oracle(const Target& t, const RunConfig& cfg) {
  const auto& model = t.model();
  if (model.certain_failure()) return {1.0, "certain-failure"};
  if (model.all_vacuous()) return {0.0, "all-vacuous"};
  if (t.synthetic) return {quadrature::exterior_probability(model), "quadrature"};
  const auto r = reference_estimate(model, *cfg.seed, cfg.reference_samples);
  return {r.pi_hat, "md-var-reference-N" + std::to_string(cfg.reference_samples)};
}

inline nlohmann::json config_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["command"] = cfg.command;
  j["case"] = cfg.cases;
  j["synthetic"] = cfg.synthetic;
  if (!cfg.synthetic.empty()) {
    j["faces"] = cfg.faces;
    j["tau"] = cfg.tau;
    j["perturbation"] = cfg.perturbation;
    j["normalize"] = cfg.normalize;
  }
  j["method"] = cfg.methods;
  j["samples"] = cfg.samples;
  j["batch"] = cfg.batch;
  j["theta-max"] = cfg.theta_max;
  if (cfg.sigma_scale) j["sigma-scale"] = *cfg.sigma_scale;
  if (cfg.epsilon) j["epsilon"] = *cfg.epsilon;
  j["eta0"] = cfg.eta0;
  j["step-policy"] = cfg.step_policy;
  if (cfg.seed) j["seed"] = *cfg.seed;
  j["runs"] = cfg.runs;
  j["mode"] = cfg.mode;
  return j;
}

}  // namespace detail

inline int cmd_estimate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.methods.size() > 1) throw ConfigError("estimate takes a single --method");
  if (cfg.theta_max.size() > 1) throw ConfigError("estimate takes a single --theta-max");
  if (cfg.cases.size() > 1) throw ConfigError("estimate takes a single --case");
  const Method method = parse_method(cfg.methods.empty() ? "md-var" : cfg.methods.front());
  const auto targets = detail::build_targets(cfg);
  const Target& t = targets.front();
  const FailureModel& model = t.model();
  const auto dir = detail::out_dir(cfg);
  detail::log(cfg, err, "estimate " + t.name + ": J=" + std::to_string(model.J()) +
                            " active=" + std::to_string(model.active().size()));

  const auto bounds = union_bounds(model);
  RandomStream rng(*cfg.seed);
  AdaptiveConfig acfg = detail::adaptive_config(cfg, method);
  acfg.record_weights = cfg.weights_history;

  std::string status = "ok";
  BenchResult r;
  r.method = to_string(method);
  r.samples = cfg.samples;
  std::optional<AdaptiveResult> adaptive;
  if (method == Method::mc) {
    r = run_plain_mc(model, cfg.samples, rng);
  } else if (model.certain_failure()) {
    status = "certain-failure";
    r.pi_hat = 1.0;
  } else if (model.all_vacuous()) {
    status = "all-vacuous";
  } else {
    adaptive = run_adaptive(model, acfg, rng);
    r.pi_hat = adaptive->estimate.mean;
    r.std_error = adaptive->estimate.std_error();
    r.avg_violated = adaptive->estimate.violated_mean;
  }
  if (status == "ok" && method == Method::mc && model.all_vacuous()) status = "all-vacuous";

  csv::Writer est({"method", "samples", "Pi_hat", "std", "avg_violated", "union_lower",
                   "union_upper", "status"});
  est.row({r.method, std::to_string(r.samples), detail::num(r.pi_hat), detail::num(r.std_error),
           detail::num(r.avg_violated), detail::num(bounds.lower), detail::num(bounds.upper), status});
  est.save((dir / "estimate.csv").string());

  csv::Writer weights({"row_label", "Pi_i", "x_initial", "x_final"});
  for (std::size_t j = 0; j < model.J(); ++j) {
    const auto idx = static_cast<Eigen::Index>(j);
    weights.row({model.labels()[j], detail::num(model.row(j).tail_prob),
                 adaptive ? detail::num(adaptive->x_initial(idx)) : "NA",
                 adaptive ? detail::num(adaptive->optimizer.weights.x(idx)) : "NA"});
  }
  weights.save((dir / "weights.csv").string());

  csv::Writer trace({"batch", "Pi_hat", "std", "V_hat", "eta", "avg_violated"});
  if (adaptive)
    for (const auto& row : adaptive->trace)
      trace.row({std::to_string(row.batch), detail::num(row.pi_hat), detail::num(row.std_error),
                 detail::num(row.v_hat), detail::num(row.eta), detail::num(row.avg_violated)});
  trace.save((dir / "trace.csv").string());

  if (cfg.weights_history && adaptive) {
    std::vector<std::string> header{"batch"};
    for (const auto& l : model.labels()) header.push_back(l);
    csv::Writer hist(header);
    for (std::size_t k = 0; k < adaptive->weight_history.size(); ++k) {
      std::vector<std::string> row{std::to_string(k)};
      for (Eigen::Index j = 0; j < adaptive->weight_history[k].size(); ++j)
        row.push_back(detail::num(adaptive->weight_history[k](j)));
      hist.row(row);
    }
    hist.save((dir / "weights_history.csv").string());
  }

  out << r.method << " " << t.name << " N=" << r.samples << " Pi_hat=" << detail::num(r.pi_hat)
      << " std=" << detail::num(r.std_error) << " union=[" << detail::num(bounds.lower) << ", "
      << detail::num(bounds.upper) << "] status=" << status << '\n';
  return kOk;
}

inline int cmd_benchmark(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  std::vector<Method> methods;
  if (cfg.methods.empty())
    methods = {Method::mc, Method::aloe, Method::md_var, Method::md_kl};
  for (const auto& m : cfg.methods) methods.push_back(parse_method(m));
  const auto targets = detail::build_targets(cfg);
  const auto dir = detail::out_dir(cfg);

  std::vector<std::pair<double, std::string>> oracles;
  for (const auto& t : targets) {
    detail::log(cfg, err, "oracle for " + t.name + " (theta " + detail::theta_field(t.theta) + ")");
    oracles.push_back(detail::oracle(t, cfg));
  }

  struct Cell {
    std::size_t target;
    Method method;
  };
  std::vector<Cell> cells;
  for (std::size_t i = 0; i < targets.size(); ++i)
    for (auto m : methods) cells.push_back({i, m});

  const std::size_t R = cfg.runs;
  std::vector<BenchResult> results(cells.size() * R);
  const Schedule schedule{64, std::max<std::size_t>(64, cfg.max_samples), false};
  parallel_for(results.size(), cfg.threads, [&](std::size_t k) {
    const auto& cell = cells[k / R];
    const std::size_t run = k % R;
    const auto& model = targets[cell.target].model();
    RandomStream rng(*cfg.seed, k / R + 1, run);
    const AdaptiveConfig acfg = detail::adaptive_config(cfg, cell.method);
    try {
      if (cfg.mode == "tolerance") {
        const double pi = oracles[cell.target].first;
        if (!(pi > 0.0)) throw NumericalError("oracle Pi is zero; stopping rule undefined");
        results[k] = samples_to_tolerance(model, acfg, pi, rng.next(), schedule);
      } else {
        results[k] = run_method(model, acfg, rng);
        results[k].stop_pass = stopping_rule_holds(results[k].pi_hat, results[k].std_error,
                                                   oracles[cell.target].first);
      }
    } catch (const Error& e) {
      results[k] = BenchResult{};
      results[k].method = to_string(cell.method);
      results[k].error = e.what();
    }
  });

  csv::Writer table({"case", "method", "theta_bound", "oracle_Pi", "N", "Pi_hat", "std",
                     "stop_pass", "wall_ms", "status"});
  csv::Writer histogram({"case", "method", "theta_bound", "run", "N", "Pi_hat", "std", "ratio",
                         "stop_pass"});
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const auto& t = targets[cells[c].target];
    const double pi = oracles[cells[c].target].first;
    const std::string method = to_string(cells[c].method);
    const std::string theta = detail::theta_field(t.theta);
    std::string status = "ok";
    std::vector<const BenchResult*> runs;
    for (std::size_t r = 0; r < R; ++r) {
      const auto& res = results[c * R + r];
      if (!res.error.empty()) {
        status = "error: " + res.error;
        continue;
      }
      runs.push_back(&res);
      histogram.row({t.name, method, theta, std::to_string(r), std::to_string(res.samples),
                     detail::num(res.pi_hat), detail::num(res.std_error),
                     pi > 0.0 ? detail::num(res.pi_hat / pi) : "NA", res.stop_pass ? "1" : "0"});
    }
    if (runs.empty()) {
      table.row({t.name, method, theta, detail::num(pi), "NA", "NA", "NA", "0", "NA", status});
      continue;
    }
    double wall = 0.0;
    for (const auto* r : runs) wall += r->wall_ms;
    if (cfg.mode == "tolerance") {
      // The run with the median sample count represents the cell.
      auto sorted = runs;
      std::stable_sort(sorted.begin(), sorted.end(),
                       [](const BenchResult* a, const BenchResult* b) { return a->samples < b->samples; });
      const auto* med = sorted[sorted.size() / 2];
      if (med->extrapolated) status = "extrapolated";
      table.row({t.name, method, theta, detail::num(pi), std::to_string(med->samples),
                 detail::num(med->pi_hat), detail::num(med->std_error), med->stop_pass ? "1" : "0",
                 detail::wall_field(cfg, wall / static_cast<double>(runs.size())), status});
    } else {
      double mean = 0.0, s = 0.0;
      std::size_t pass = 0;
      for (const auto* r : runs) {
        mean += r->pi_hat;
        s += r->std_error;
        pass += r->stop_pass ? 1 : 0;
      }
      const double n = static_cast<double>(runs.size());
      table.row({t.name, method, theta, detail::num(pi), std::to_string(cfg.samples),
                 detail::num(mean / n), detail::num(s / n), 2 * pass >= runs.size() ? "1" : "0",
                 detail::wall_field(cfg, wall / n), status});
    }
  }
  table.save((dir / "benchmark.csv").string());
  histogram.save((dir / "histogram.csv").string());

  nlohmann::json meta;
  meta["config"] = detail::config_json(cfg);
  meta["oracles"] = nlohmann::json::array();
  for (std::size_t i = 0; i < targets.size(); ++i)
    meta["oracles"].push_back({{"case", targets[i].name},
                               {"theta_bound", detail::theta_field(targets[i].theta)},
                               {"oracle_Pi", oracles[i].first},
                               {"source", oracles[i].second}});
  detail::write_json(dir / "benchmark_meta.json", meta);
  out << "benchmark: " << cells.size() << " cells x " << R << " runs -> "
      << (dir / "benchmark.csv").string() << '\n';
  return kOk;
}

inline int cmd_generate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto poly = generate_polytope(detail::synthetic_spec(cfg));
  const auto dir = detail::out_dir(cfg);
  csv::polytope_writer(poly.W, poly.b, poly.labels).save((dir / "polytope.csv").string());

  const auto model = poly.model();
  const auto bounds = union_bounds(model);
  detail::log(cfg, err, "quadrature oracle for " + poly.spec.name());
  nlohmann::json meta;
  meta["kind"] = to_string(poly.spec.kind);
  meta["J"] = poly.spec.J;
  meta["tau"] = poly.spec.tau;
  if (poly.spec.kind == PolytopeKind::degenerate) {
    meta["perturbation"] = poly.spec.perturbation;
    meta["seed"] = poly.spec.seed;
    meta["normalize"] = poly.spec.normalize;
  }
  meta["nominal"] = "standard normal, 2-D";
  meta["oracle_Pi"] = quadrature::exterior_probability(model);
  meta["oracle_source"] = "adaptive Gauss-Kronrod quadrature over the angle";
  meta["union_lower"] = bounds.lower;
  meta["union_upper"] = bounds.upper;
  const double tau = poly.spec.tau;
  if (poly.spec.kind == PolytopeKind::regular) {
    meta["reference_values"] = {{"circle_limit_exp(-tau^2/2)", std::exp(-0.5 * tau * tau)},
                                {"normal_tail_Phi(-tau)", normal::sf(tau)}};
  } else {
    meta["reference_values"] = {{"two_sided_tail_2Phi(-tau)", 2.0 * normal::sf(tau)}};
  }
  detail::write_json(dir / "metadata.json", meta);
  out << "generate: " << poly.spec.name() << " oracle_Pi=" << detail::num(meta["oracle_Pi"].get<double>())
      << '\n';
  return kOk;
}

inline int cmd_polytope_export(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.cases.size() != 1 || cfg.theta_max.size() > 1)
    throw ConfigError("polytope-export takes one --case and at most one --theta-max");
  const auto targets = detail::build_targets(cfg);
  const auto& t = targets.front();
  const auto& gm = *t.grid;
  const auto dir = detail::out_dir(cfg);
  detail::log(cfg, err, "export " + t.name);
  csv::polytope_writer(gm.polytope.W, gm.polytope.b, gm.polytope.label_strings())
      .save((dir / "polytope.csv").string());

  csv::Writer rows({"row_label", "beta", "Pi_i", "active"});
  for (std::size_t j = 0; j < gm.model.J(); ++j) {
    const auto& r = gm.model.row(j);
    rows.row({gm.model.labels()[j], detail::num(r.beta), detail::num(r.tail_prob),
              gm.model.is_active(j) ? "1" : "0"});
  }
  rows.save((dir / "rows.csv").string());

  const auto bounds = union_bounds(gm.model);
  nlohmann::json meta;
  meta["case"] = t.name;
  meta["buses"] = gm.grid.n();
  meta["lines"] = gm.grid.m();
  meta["slack_bus"] = gm.grid.buses[gm.grid.slack].id;
  meta["rows"] = gm.model.J();
  meta["active_rows"] = gm.model.active().size();
  meta["theta_bound"] = detail::theta_field(t.theta);
  meta["sigma_scale"] = cfg.sigma_scale.value_or(gm.grid.sigma_scale);
  meta["union_lower"] = bounds.lower;
  meta["union_upper"] = bounds.upper;
  std::vector<double> mean(gm.model.gaussian().mean().data(),
                           gm.model.gaussian().mean().data() + gm.model.gaussian().dim());
  meta["mean"] = mean;
  detail::write_json(dir / "metadata.json", meta);
  out << "polytope-export: " << t.name << " J=" << gm.model.J() << '\n';
  return kOk;
}

namespace detail {

/// Fill options not given on the command line from a JSON object whose keys
/// are the long flag names.
inline void apply_config_file(CLI::App& sub, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file '" + path + "'");
  nlohmann::json doc;
  try {
    f >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config file must hold a JSON object");
  const auto base = std::filesystem::path(path).parent_path();
  for (const auto& [key, value] : doc.items()) {
    if (key == "config") throw ConfigError("config files cannot nest");
    CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (!opt) throw ConfigError("config file: unknown key '" + key + "'");
    if (opt->count() > 0) continue;  // the command line wins
    auto as_text = [&](const nlohmann::json& v) -> std::string {
      if (v.is_string()) {
        std::string s = v.get<std::string>();
        if (key == "case" && std::filesystem::path(s).is_relative()) s = (base / s).string();
        return s;
      }
      if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
      if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
      if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
      if (v.is_number()) return csv::format_number(v.get<double>());
      throw ConfigError("config file: unsupported value for '" + key + "'");
    };
    if (value.is_array()) {
      std::vector<std::string> parts;
      for (const auto& v : value) parts.push_back(as_text(v));
      opt->add_result(parts);
    } else {
      opt->add_result(as_text(value));
    }
    try {
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw ConfigError("config file: bad value for '" + key + "': " + e.what());
    }
  }
}

}  // namespace detail

/// Parses arguments and runs the chosen command, mapping failures to exit codes.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  RunConfig cfg;
  CLI::App app{"Failure-probability estimation for DC power grids by mixture importance sampling"};
  app.require_subcommand(1);
  std::string config_path;
  std::uint64_t seed = 0;
  double sigma_scale = 0.0, epsilon = 0.0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON file whose keys mirror the long flags");
    sub->add_option("--out", cfg.out, "Output directory");
    sub->add_flag("--quiet", cfg.quiet, "Suppress log lines");
  };
  auto add_model = [&](CLI::App* sub) {
    sub->add_option("--case", cfg.cases, "Grid case JSON file")->delimiter(',');
    sub->add_option("--theta-max", cfg.theta_max, "Uniform angle bound override (radians)")
        ->delimiter(',');
    sub->add_option("--sigma-scale", sigma_scale, "Generator std as a fraction of |p_mean|");
  };
  auto add_synthetic = [&](CLI::App* sub) {
    sub->add_option("--synthetic", cfg.synthetic, "Synthetic polytope: regular|degenerate");
    sub->add_option("--faces", cfg.faces, "Number of faces J");
    sub->add_option("--tau", cfg.tau, "Face offset");
    sub->add_option("--perturbation", cfg.perturbation, "Degenerate-row perturbation");
    sub->add_flag("--normalize", cfg.normalize, "Rescale degenerate rows to unit norm");
  };
  auto add_sampler = [&](CLI::App* sub, bool many_methods) {
    sub->add_option("--method", cfg.methods, many_methods ? "Methods (comma list)" : "mc|aloe|md-var|md-kl")
        ->delimiter(',');
    sub->add_option("--samples", cfg.samples, "Sample budget N");
    sub->add_option("--batch", cfg.batch, "Samples per weight update");
    sub->add_option("--epsilon", epsilon, "Weight floor");
    sub->add_option("--eta0", cfg.eta0, "Step-size multiplier in (0, 1]");
    sub->add_option("--step-policy", cfg.step_policy, "online|bound");
  };

  auto* est = app.add_subcommand("estimate", "Estimate Pi for one case");
  add_common(est);
  add_model(est);
  add_synthetic(est);
  add_sampler(est, false);
  est->add_flag("--weights-history", cfg.weights_history, "Also write weights_history.csv");

  auto* bench = app.add_subcommand("benchmark", "Benchmark matrix over cases, bounds and methods");
  add_common(bench);
  add_model(bench);
  add_synthetic(bench);
  add_sampler(bench, true);
  bench->add_option("--runs", cfg.runs, "Repetitions per cell");
  bench->add_option("--mode", cfg.mode, "fixed|tolerance");
  bench->add_option("--max-samples", cfg.max_samples, "Cap of the doubling schedule");
  bench->add_option("--reference-samples", cfg.reference_samples, "Reference run length for grids");
  bench->add_option("--threads", cfg.threads, "Worker threads");
  bench->add_flag("--timing", cfg.timing, "Report wall time (otherwise NA)");

  auto* gen = app.add_subcommand("generate", "Write a synthetic polytope and its metadata");
  add_common(gen);
  add_synthetic(gen);

  auto* exp = app.add_subcommand("polytope-export", "Write the reliability polytope of a case");
  add_common(exp);
  add_model(exp);

  for (auto* sub : {est, bench, gen})
    sub->add_option("--seed", seed, "Random seed (required)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfig;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    cfg.command = sub->get_name();
    if (!config_path.empty()) detail::apply_config_file(*sub, config_path);
    if (auto* o = sub->get_option_no_throw("--seed"); o && o->count() > 0) cfg.seed = seed;
    if (auto* o = sub->get_option_no_throw("--sigma-scale"); o && o->count() > 0)
      cfg.sigma_scale = sigma_scale;
    if (auto* o = sub->get_option_no_throw("--epsilon"); o && o->count() > 0) cfg.epsilon = epsilon;
    detail::validate(cfg);
    if (cfg.command == "estimate") return cmd_estimate(cfg, out, err);
    if (cfg.command == "benchmark") return cmd_benchmark(cfg, out, err);
    if (cfg.command == "generate") return cmd_generate(cfg, out, err);
    return cmd_polytope_export(cfg, out, err);
  } catch (const ConfigError& e) {
    err << "gridrel: configuration error: " << e.what() << '\n';
    return kConfig;
  } catch (const CaseError& e) {
    err << "gridrel: case error: " << e.what() << '\n';
    return kCase;
  } catch (const NumericalError& e) {
    err << "gridrel: numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    err << "gridrel: " << e.what() << '\n';
    return kUnexpected;
  }
}

}  // namespace gridrel::cli
