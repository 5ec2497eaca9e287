#pragma once

// DC power-flow network model: case ingestion, network matrices and the
// reliability polytope {p : W p <= b}.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "gridrel/errors.hpp"
#include "gridrel/gaussian.hpp"

namespace gridrel {

/// Magnitude used for absent or infinite generation limits.
inline constexpr double kLimitSentinel = 1e6;

enum class BusKind { slack, generator, load };

inline std::string to_string(BusKind k) {
  switch (k) {
    case BusKind::slack: return "slack";
    case BusKind::generator: return "generator";
    case BusKind::load: return "load";
  }
  return "?";
}

struct Bus {
  int id = 0;
  BusKind kind = BusKind::load;
  double p_mean = 0.0;  // per-unit
  double p_min = -kLimitSentinel;
  double p_max = kLimitSentinel;
  bool lower_vacuous = false;
  bool upper_vacuous = false;
};

struct Line {
  int from = 0;
  int to = 0;
  double susceptance = 0.0;  // per-unit, > 0
  double theta_max = 0.0;    // radians, > 0
};

struct GridCase {
  std::string name;
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Line> lines;
  std::size_t slack = 0;     // position of the slack bus in `buses`
  double sigma_scale = 0.25;  // generator std = sigma_scale * |p_mean|
  std::string provenance;

  std::size_t n() const { return buses.size(); }
  std::size_t m() const { return lines.size(); }

  std::size_t index_of(int id) const {
    for (std::size_t i = 0; i < buses.size(); ++i)
      if (buses[i].id == id) return i;
    throw CaseError("unknown bus id " + std::to_string(id));
  }
};

namespace detail {

inline double required_number(const nlohmann::json& obj, const char* key,
                              const std::string& where) {
  if (!obj.contains(key)) throw CaseError(where + ": missing field '" + key + "'");
  const auto& v = obj.at(key);
  if (!v.is_number()) throw CaseError(where + ": field '" + key + "' must be a number");
  return v.get<double>();
}

/// A limit may be a number, null, absent, or the strings "inf"/"-inf".
inline std::optional<double> optional_limit(const nlohmann::json& obj, const char* key,
                                            const std::string& where) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  const auto& v = obj.at(key);
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "+inf" || s == "-inf") return std::nullopt;
    throw CaseError(where + ": field '" + key + "' has invalid value '" + s + "'");
  }
  if (!v.is_number()) throw CaseError(where + ": field '" + key + "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x) || std::abs(x) >= kLimitSentinel) return std::nullopt;
  return x;
}

}  // namespace detail

/// Parse and validate a case document.
inline GridCase load_case(const nlohmann::json& doc) {
  if (!doc.is_object()) throw CaseError("case document must be an object");
  GridCase gc;
  gc.name = doc.value("name", std::string{});
  if (doc.contains("base_mva")) gc.base_mva = detail::required_number(doc, "base_mva", "case");
  if (doc.contains("provenance") && doc.at("provenance").is_string())
    gc.provenance = doc.at("provenance").get<std::string>();
  if (doc.contains("sigma")) {
    const auto& s = doc.at("sigma");
    if (s.is_number()) {
      gc.sigma_scale = s.get<double>();
    } else if (s.is_object() && s.contains("scale")) {
      gc.sigma_scale = detail::required_number(s, "scale", "sigma");
    } else {
      throw CaseError("sigma: expected a number or an object with 'scale'");
    }
    if (!(gc.sigma_scale >= 0.0)) throw CaseError("sigma: scale must be non-negative");
  }

  if (!doc.contains("buses") || !doc.at("buses").is_array())
    throw CaseError("case: missing array 'buses'");
  if (!doc.contains("lines") || !doc.at("lines").is_array())
    throw CaseError("case: missing array 'lines'");

  std::map<int, std::size_t> position;
  std::vector<std::size_t> slack_positions;
  for (const auto& jb : doc.at("buses")) {
    const std::string where = "bus #" + std::to_string(gc.buses.size());
    if (!jb.is_object()) throw CaseError(where + ": must be an object");
    if (!jb.contains("id") || !jb.at("id").is_number_integer())
      throw CaseError(where + ": missing integer field 'id'");
    Bus b;
    b.id = jb.at("id").get<int>();
    const std::string at = "bus " + std::to_string(b.id);
    if (!jb.contains("kind") || !jb.at("kind").is_string())
      throw CaseError(at + ": missing string field 'kind'");
    const auto kind = jb.at("kind").get<std::string>();
    if (kind == "slack") b.kind = BusKind::slack;
    else if (kind == "generator" || kind == "gen") b.kind = BusKind::generator;
    else if (kind == "load") b.kind = BusKind::load;
    else throw CaseError(at + ": unknown kind '" + kind + "'");
    b.p_mean = detail::required_number(jb, "p_mean", at);
    const auto lo = detail::optional_limit(jb, "p_min", at);
    const auto hi = detail::optional_limit(jb, "p_max", at);
    b.lower_vacuous = !lo.has_value();
    b.upper_vacuous = !hi.has_value();
    b.p_min = lo.value_or(-kLimitSentinel);
    b.p_max = hi.value_or(kLimitSentinel);
    if (!std::isfinite(b.p_mean)) throw CaseError(at + ": p_mean must be finite");
    if (b.p_min > b.p_max) throw CaseError(at + ": p_min exceeds p_max");
    if (b.p_mean < b.p_min || b.p_mean > b.p_max)
      throw CaseError(at + ": p_mean outside [p_min, p_max]");
    if (!position.emplace(b.id, gc.buses.size()).second)
      throw CaseError("duplicate bus id " + std::to_string(b.id));
    if (b.kind == BusKind::slack) slack_positions.push_back(gc.buses.size());
    gc.buses.push_back(b);
  }
  if (gc.buses.size() < 2) throw CaseError("case needs at least 2 buses");
  if (slack_positions.empty()) throw CaseError("no slack bus");
  if (slack_positions.size() > 1)
    throw CaseError("multiple slack buses (ids " +
                    std::to_string(gc.buses[slack_positions[0]].id) + ", " +
                    std::to_string(gc.buses[slack_positions[1]].id) + ")");
  gc.slack = slack_positions.front();

  for (const auto& jl : doc.at("lines")) {
    const std::string where = "line #" + std::to_string(gc.lines.size());
    if (!jl.is_object()) throw CaseError(where + ": must be an object");
    Line l;
    for (const char* key : {"from", "to"})
      if (!jl.contains(key) || !jl.at(key).is_number_integer())
        throw CaseError(where + ": missing integer field '" + key + "'");
    l.from = jl.at("from").get<int>();
    l.to = jl.at("to").get<int>();
    const std::string at = where + " (" + std::to_string(l.from) + "-" + std::to_string(l.to) + ")";
    if (!position.contains(l.from)) throw CaseError(at + ": unknown bus " + std::to_string(l.from));
    if (!position.contains(l.to)) throw CaseError(at + ": unknown bus " + std::to_string(l.to));
    if (l.from == l.to) throw CaseError(at + ": self-loop");
    l.susceptance = detail::required_number(jl, "susceptance", at);
    if (!(l.susceptance > 0.0) || !std::isfinite(l.susceptance))
      throw CaseError(at + ": susceptance must be positive");
    l.theta_max = detail::required_number(jl, "theta_max", at);
    if (!(l.theta_max > 0.0) || !std::isfinite(l.theta_max))
      throw CaseError(at + ": theta_max must be positive");
    gc.lines.push_back(l);
  }
  if (gc.lines.empty()) throw CaseError("case needs at least 1 line");

  // Connectivity by BFS from the slack bus.
  std::vector<std::vector<std::size_t>> adj(gc.n());
  for (const auto& l : gc.lines) {
    adj[position[l.from]].push_back(position[l.to]);
    adj[position[l.to]].push_back(position[l.from]);
  }
  std::vector<bool> seen(gc.n(), false);
  std::queue<std::size_t> frontier;
  frontier.push(gc.slack);
  seen[gc.slack] = true;
  while (!frontier.empty()) {
    const auto u = frontier.front();
    frontier.pop();
    for (auto v : adj[u])
      if (!seen[v]) {
        seen[v] = true;
        frontier.push(v);
      }
  }
  for (std::size_t i = 0; i < gc.n(); ++i)
    if (!seen[i])
      throw CaseError("disconnected graph: bus " + std::to_string(gc.buses[i].id) +
                      " is not reachable from the slack bus");
  return gc;
}

inline GridCase load_case_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CaseError("cannot open case file '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw CaseError("case file '" + path + "': " + e.what());
  }
  return load_case(doc);
}

/// Replace every line's angle limit (the per-row bound sweeps of the grid tables).
inline GridCase with_theta_max(GridCase gc, double theta_max) {
  if (!(theta_max > 0.0)) throw ConfigError("theta_max override must be positive");
  for (auto& l : gc.lines) l.theta_max = theta_max;
  return gc;
}

struct NetworkMatrices {
  Eigen::MatrixXd incidence;       // A, m x n
  Eigen::MatrixXd laplacian;       // B, n x n
  Eigen::MatrixXd laplacian_pinv;  // B^dagger (Moore-Penrose)
  Eigen::MatrixXd slack_reduction;  // C
};

/// Moore-Penrose pseudo-inverse of a symmetric matrix.
inline Eigen::MatrixXd symmetric_pinv(const Eigen::MatrixXd& a, double rel_cutoff = 1e-9) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  const auto& lambda = eig.eigenvalues();
  const double cutoff = rel_cutoff * lambda.cwiseAbs().maxCoeff();
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(lambda.size());
  for (Eigen::Index i = 0; i < lambda.size(); ++i)
    if (std::abs(lambda(i)) > cutoff) inv(i) = 1.0 / lambda(i);
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

inline NetworkMatrices build_matrices(const GridCase& gc) {
  const auto n = static_cast<Eigen::Index>(gc.n());
  const auto m = static_cast<Eigen::Index>(gc.m());
  NetworkMatrices mats;
  mats.incidence = Eigen::MatrixXd::Zero(m, n);
  mats.laplacian = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto& l = gc.lines[static_cast<std::size_t>(k)];
    auto i = static_cast<Eigen::Index>(gc.index_of(l.from));
    auto j = static_cast<Eigen::Index>(gc.index_of(l.to));
    if (i > j) std::swap(i, j);
    mats.incidence(k, i) = 1.0;
    mats.incidence(k, j) = -1.0;
    mats.laplacian(i, i) += l.susceptance;
    mats.laplacian(j, j) += l.susceptance;
    mats.laplacian(i, j) -= l.susceptance;
    mats.laplacian(j, i) -= l.susceptance;
  }
  mats.laplacian_pinv = symmetric_pinv(mats.laplacian);

  // A connected Laplacian has exactly one zero eigenvalue.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(mats.laplacian, Eigen::EigenvaluesOnly);
  const auto& lambda = eig.eigenvalues();
  if (n > 1 && lambda(1) <= 1e-9 * lambda(n - 1))
    throw NumericalError("build_matrices: Laplacian has a repeated zero eigenvalue (disconnected)");

  const auto s = static_cast<Eigen::Index>(gc.slack);
  mats.slack_reduction = Eigen::MatrixXd::Identity(n, n);
  mats.slack_reduction(s, s) = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (i != s) {
      mats.slack_reduction(i, s) = -1.0;
      mats.slack_reduction(s, i) = -1.0;
    }
  return mats;
}

enum class RowKind { angle_upper, angle_lower, gen_upper, gen_lower };

struct RowLabel {
  RowKind kind = RowKind::angle_upper;
  std::size_t element = 0;  // line position for angle rows, bus position otherwise
  int bus_id = 0;           // bus id for generation rows
  bool vacuous = false;     // sentinel limit: kept for index stability only
  bool zero_row = false;

  std::string str() const {
    switch (kind) {
      case RowKind::angle_upper: return "angle+:L" + std::to_string(element);
      case RowKind::angle_lower: return "angle-:L" + std::to_string(element);
      case RowKind::gen_upper: return "gen+:B" + std::to_string(bus_id);
      case RowKind::gen_lower: return "gen-:B" + std::to_string(bus_id);
    }
    return "?";
  }
};

struct ReliabilityPolytope {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
  std::vector<RowLabel> labels;

  Eigen::Index J() const { return W.rows(); }
  Eigen::Index n() const { return W.cols(); }

  std::vector<std::string> label_strings() const {
    std::vector<std::string> out;
    out.reserve(labels.size());
    for (const auto& l : labels) out.push_back(l.str());
    return out;
  }

  bool contains(const Eigen::VectorXd& p) const { return ((W * p) - b).maxCoeff() <= 0.0; }
};

/// Rows (A B^+ C, -A B^+ C, C, -C) with bounds (theta, theta, p_max, -p_min).
///
/// The lower-limit block is stored as -C p <= -p_min so that every row reads
/// "omega^T p <= b" with a violation meaning omega^T p > b.
inline ReliabilityPolytope build_polytope(const NetworkMatrices& mats, const GridCase& gc) {
  const auto n = static_cast<Eigen::Index>(gc.n());
  const auto m = static_cast<Eigen::Index>(gc.m());
  const Eigen::MatrixXd angle = mats.incidence * mats.laplacian_pinv * mats.slack_reduction;

  ReliabilityPolytope poly;
  poly.W.resize(2 * m + 2 * n, n);
  poly.b.resize(2 * m + 2 * n);
  poly.labels.resize(static_cast<std::size_t>(2 * m + 2 * n));
  poly.W.topRows(m) = angle;
  poly.W.middleRows(m, m) = -angle;
  poly.W.middleRows(2 * m, n) = mats.slack_reduction;
  poly.W.bottomRows(n) = -mats.slack_reduction;

  for (Eigen::Index k = 0; k < m; ++k) {
    const double theta = gc.lines[static_cast<std::size_t>(k)].theta_max;
    poly.b(k) = theta;
    poly.b(m + k) = theta;
    poly.labels[static_cast<std::size_t>(k)] = {RowKind::angle_upper, static_cast<std::size_t>(k)};
    poly.labels[static_cast<std::size_t>(m + k)] = {RowKind::angle_lower, static_cast<std::size_t>(k)};
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& bus = gc.buses[static_cast<std::size_t>(i)];
    const auto up = static_cast<std::size_t>(2 * m + i);
    const auto lo = static_cast<std::size_t>(2 * m + n + i);
    poly.b(static_cast<Eigen::Index>(up)) = bus.upper_vacuous ? kLimitSentinel : bus.p_max;
    poly.b(static_cast<Eigen::Index>(lo)) = bus.lower_vacuous ? kLimitSentinel : -bus.p_min;
    poly.labels[up] = {RowKind::gen_upper, static_cast<std::size_t>(i), bus.id, bus.upper_vacuous};
    poly.labels[lo] = {RowKind::gen_lower, static_cast<std::size_t>(i), bus.id, bus.lower_vacuous};
  }
  const double scale = std::max(1.0, poly.W.cwiseAbs().maxCoeff());
  for (Eigen::Index r = 0; r < poly.J(); ++r)
    if (poly.W.row(r).cwiseAbs().maxCoeff() <= 1e-14 * scale) {
      poly.W.row(r).setZero();
      poly.labels[static_cast<std::size_t>(r)].zero_row = true;
    }
  return poly;
}

/// Mean of the fluctuation vector.
///
/// The slack coordinate is a deterministic placeholder pinned at zero: its
/// physical injection is reconstructed as -sum of the others by the slack
/// row of C, and the off-slack rows of C p then equal the raw injections.
inline Eigen::VectorXd fluctuation_mean(const GridCase& gc) {
  Eigen::VectorXd mu(static_cast<Eigen::Index>(gc.n()));
  for (std::size_t i = 0; i < gc.n(); ++i)
    mu(static_cast<Eigen::Index>(i)) = i == gc.slack ? 0.0 : gc.buses[i].p_mean;
  return mu;
}

/// Diagonal covariance: std = scale * |p_mean| on generator buses, zero on
/// loads and on the slack.
inline Eigen::MatrixXd grid_covariance(const GridCase& gc, double sigma_scale) {
  if (!(sigma_scale >= 0.0)) throw ConfigError("sigma scale must be non-negative");
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(gc.n()),
                                              static_cast<Eigen::Index>(gc.n()));
  for (std::size_t i = 0; i < gc.n(); ++i)
    if (gc.buses[i].kind == BusKind::generator) {
      const double sd = sigma_scale * std::abs(gc.buses[i].p_mean);
      cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = sd * sd;
    }
  return cov;
}

inline NominalGaussian grid_gaussian(const GridCase& gc, double sigma_scale) {
  return {fluctuation_mean(gc), grid_covariance(gc, sigma_scale)};
}

/// Direct physical check of a fluctuation vector: rebuild the balanced
/// injection, solve theta = B^+ p and test every limit.
inline bool physically_feasible(const GridCase& gc, const NetworkMatrices& mats,
                                const Eigen::VectorXd& p) {
  Eigen::VectorXd inj = p;
  const auto s = static_cast<Eigen::Index>(gc.slack);
  inj(s) = 0.0;
  inj(s) = -inj.sum();
  const Eigen::VectorXd theta = mats.laplacian_pinv * inj;
  for (std::size_t k = 0; k < gc.m(); ++k) {
    const auto& l = gc.lines[k];
    const auto i = static_cast<Eigen::Index>(gc.index_of(l.from));
    const auto j = static_cast<Eigen::Index>(gc.index_of(l.to));
    if (std::abs(theta(i) - theta(j)) > l.theta_max) return false;
  }
  for (std::size_t i = 0; i < gc.n(); ++i) {
    const auto& bus = gc.buses[i];
    const double x = inj(static_cast<Eigen::Index>(i));
    if (!bus.upper_vacuous && x > bus.p_max) return false;
    if (!bus.lower_vacuous && x < bus.p_min) return false;
  }
  return true;
}

}  // namespace gridrel
