#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "io.hpp"
#include "solver.hpp"
#include "tykhonov.hpp"

namespace hvi {

/// Configuration problem tied to a "section.key" name.
class ConfigError : public std::invalid_argument {
public:
  ConfigError(const std::string& key, const std::string& what) : std::invalid_argument(key + ": " + what), key_(key) {}
  const std::string& key() const { return key_; }

private:
  std::string key_;
};

enum class ExperimentKind { Solve, PenaltyCurve, ApproxSequence, Control, MuConvergence, OracleCheck, GAxioms };

inline const char* to_string(ExperimentKind k) {
  switch (k) {
  case ExperimentKind::Solve: return "solve";
  case ExperimentKind::PenaltyCurve: return "penalty_curve";
  case ExperimentKind::ApproxSequence: return "approx_sequence";
  case ExperimentKind::Control: return "control";
  case ExperimentKind::MuConvergence: return "mu_convergence";
  case ExperimentKind::OracleCheck: return "oracle_check";
  case ExperimentKind::GAxioms: return "g_axioms";
  }
  return "?";
}

inline bool is_randomized(ExperimentKind k) {
  return k == ExperimentKind::Control || k == ExperimentKind::MuConvergence || k == ExperimentKind::OracleCheck ||
         k == ExperimentKind::GAxioms;
}

/// Source term families over the rectangle:
///   constant     value
///   affine       value + slope_x x1 + slope_y x2
///   oscillation  value + amplitude sin(frequency pi x1 / alpha)
struct SourceSpec {
  std::string type = "constant";
  double value = 0.0, slope_x = 0.0, slope_y = 0.0, amplitude = 0.0;
  int frequency = 1;
};

/// Boundary profiles phi(x2) on Gamma2:
///   constant  value
///   affine    value + slope_y x2
///   sine      value + amplitude sin(pi x2 / beta)
///   datum     the Dirichlet trace b (cost targets only)
struct TraceSpec {
  std::string type = "constant";
  double value = 0.0, slope_y = 0.0, amplitude = 0.0;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Solve;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string out_dir = "out";
  bool dump_mesh = false;
  bool export_matrices = false;

  double alpha = 1.0, beta = 1.0;
  int nx = 8, ny = 8;

  std::string law = "zero";
  double flux = 0.0, robin = 0.0;               // linear: xi(r) = flux + robin r
  double law_a = 1.0, law_r0 = 0.5, law_drop = 0.0; // nonmonotone
  std::optional<double> smallness_target;       // tunes drop so alpha c0^2 c3^2 hits the target

  ConstraintMode mode = ConstraintMode::Exact;
  double lambda = 1.0;
  std::optional<double> p0_c, p2_c;

  SourceSpec source;
  TraceSpec boundary{"constant", 1.0, 0.0, 0.0};
  SolveOptions solve;

  std::vector<double> lambdas;
  SourceRule rule = SourceRule::Constant;
  std::vector<int> frequencies;
  double amplitude = 1.0;
  int count = 0;

  int mx = 2, my = 2;
  double a0 = 1.0, a2 = 1.0, mu = 0.0;
  TraceSpec target{"constant", 1.0, 0.0, 0.0};
  std::vector<double> planted;
  int starts = 8;
  double init_radius = 1.0;
  double ftol = 1e-8;

  std::vector<double> mus;
  std::optional<double> frozen_mu;

  int instances = 20;
  int trials = 1000;
  std::vector<ConstraintMode> g_modes{ConstraintMode::PenaltyDomain, ConstraintMode::PenaltyGamma2,
                                      ConstraintMode::PenaltyFull};
};

namespace detail {

class IniReader {
public:
  explicit IniReader(const boost::property_tree::ptree& tree) : tree_(tree) {}

  std::optional<std::string> raw(const std::string& key) {
    used_.insert(key);
    auto v = tree_.get_optional<std::string>(boost::property_tree::ptree::path_type(key, '.'));
    if (!v) return std::nullopt;
    std::string s = *v;
    const auto b = s.find_first_not_of(" \t"), e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }

  template <class T>
  void get(const std::string& key, T& out) {
    if (auto s = raw(key)) out = parse<T>(key, *s);
  }

  template <class T>
  void get(const std::string& key, std::optional<T>& out) {
    if (auto s = raw(key)) out = parse<T>(key, *s);
  }

  template <class T>
  void get_list(const std::string& key, std::vector<T>& out) {
    auto s = raw(key);
    if (!s) return;
    out.clear();
    std::stringstream ss(*s);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
      if (b == std::string::npos) throw ConfigError(key, "empty list entry");
      out.push_back(parse<T>(key, item.substr(b, e - b + 1)));
    }
  }

  /// Keys present in the file but never read.
  std::vector<std::string> unknown_keys() const {
    std::vector<std::string> out;
    for (const auto& [section, child] : tree_) {
      if (child.empty() && !child.data().empty()) {
        out.push_back(section);
        continue;
      }
      for (const auto& [key, value] : child)
        if (!used_.count(section + "." + key)) out.push_back(section + "." + key);
    }
    return out;
  }

private:
  template <class T>
  static T parse(const std::string& key, const std::string& s) {
    try {
      std::size_t pos = 0;
      if constexpr (std::is_same_v<T, std::string>) {
        return s;
      } else if constexpr (std::is_same_v<T, bool>) {
        if (s == "true" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "no") return false;
        throw ConfigError(key, "expected a boolean, got '" + s + "'");
      } else if constexpr (std::is_same_v<T, int>) {
        const int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing text");
        return v;
      } else if constexpr (std::is_same_v<T, std::uint64_t>) {
        if (!s.empty() && s[0] == '-') throw std::invalid_argument("negative");
        const auto v = std::stoull(s, &pos, 0);
        if (pos != s.size()) throw std::invalid_argument("trailing text");
        return static_cast<std::uint64_t>(v);
      } else {
        const double v = std::stod(s, &pos);
        if (pos != s.size() || !std::isfinite(v)) throw std::invalid_argument("not finite");
        return v;
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError(key, "cannot parse '" + s + "'");
    }
  }

  const boost::property_tree::ptree& tree_;
  std::set<std::string> used_;
};

inline ConstraintMode parse_mode(const std::string& key, const std::string& s) {
  for (auto m : {ConstraintMode::Exact, ConstraintMode::PenaltyDomain, ConstraintMode::PenaltyGamma2,
                 ConstraintMode::PenaltyFull})
    if (s == to_string(m)) return m;
  throw ConfigError(key, "unknown constraint mode '" + s + "'");
}

inline void read_trace(IniReader& r, const std::string& section, TraceSpec& t, bool allow_datum = false) {
  r.get(section + ".type", t.type);
  r.get(section + ".value", t.value);
  r.get(section + ".slope_y", t.slope_y);
  r.get(section + ".amplitude", t.amplitude);
  if (t.type != "constant" && t.type != "affine" && t.type != "sine" && !(allow_datum && t.type == "datum"))
    throw ConfigError(section + ".type", "unknown profile '" + t.type + "'");
}

} // namespace detail

inline std::vector<double> decade_schedule(int n) {
  std::vector<double> out;
  for (int k = 1; k <= n; ++k) out.push_back(std::pow(10.0, -k));
  return out;
}

/// Parse an INI experiment file. Throws ConfigError naming the offending key.
inline ExperimentConfig parse_config_text(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream is(text);
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("file", e.message() + " at line " + std::to_string(e.line()));
  }
  detail::IniReader r(tree);
  ExperimentConfig c;

  auto kind = r.raw("experiment.kind");
  if (!kind) throw ConfigError("experiment.kind", "missing");
  bool found = false;
  for (auto k : {ExperimentKind::Solve, ExperimentKind::PenaltyCurve, ExperimentKind::ApproxSequence,
                 ExperimentKind::Control, ExperimentKind::MuConvergence, ExperimentKind::OracleCheck,
                 ExperimentKind::GAxioms})
    if (*kind == to_string(k)) {
      c.kind = k;
      found = true;
    }
  if (!found) throw ConfigError("experiment.kind", "unknown experiment '" + *kind + "'");
  r.get("experiment.seed", c.seed);
  r.get("experiment.threads", c.threads);
  r.get("output.dir", c.out_dir);
  r.get("output.mesh_dump", c.dump_mesh);
  r.get("output.matrices", c.export_matrices);

  r.get("mesh.alpha", c.alpha);
  r.get("mesh.beta", c.beta);
  r.get("mesh.nx", c.nx);
  r.get("mesh.ny", c.ny);

  r.get("law.type", c.law);
  r.get("law.flux", c.flux);
  r.get("law.robin", c.robin);
  r.get("law.a", c.law_a);
  r.get("law.r0", c.law_r0);
  r.get("law.drop", c.law_drop);
  r.get("law.smallness_target", c.smallness_target);

  if (auto m = r.raw("problem.mode")) c.mode = detail::parse_mode("problem.mode", *m);
  r.get("problem.lambda", c.lambda);
  r.get("problem.p0_c", c.p0_c);
  r.get("problem.p2_c", c.p2_c);

  r.get("source.type", c.source.type);
  r.get("source.value", c.source.value);
  r.get("source.slope_x", c.source.slope_x);
  r.get("source.slope_y", c.source.slope_y);
  r.get("source.amplitude", c.source.amplitude);
  r.get("source.frequency", c.source.frequency);
  detail::read_trace(r, "boundary", c.boundary);

  r.get("solver.tol_vnorm", c.solve.tol);
  r.get("solver.max_outer", c.solve.max_outer);
  r.get("solver.omega", c.solve.inner.omega);
  bool psor_only = false;
  r.get("solver.psor_only", psor_only);
  c.solve.inner.use_newton = !psor_only;

  r.get_list("sequence.lambdas", c.lambdas);
  int decades = 0;
  r.get("sequence.lambda_decades", decades);
  if (decades > 0) {
    if (!c.lambdas.empty()) throw ConfigError("sequence.lambda_decades", "give either lambdas or lambda_decades");
    c.lambdas = decade_schedule(decades);
  }
  if (auto rule = r.raw("sequence.rule")) {
    if (*rule == "constant") c.rule = SourceRule::Constant;
    else if (*rule == "weak_oscillation") c.rule = SourceRule::WeakOscillation;
    else if (*rule == "strong_perturb") c.rule = SourceRule::StrongPerturb;
    else throw ConfigError("sequence.rule", "unknown rule '" + *rule + "'");
  }
  r.get_list("sequence.frequencies", c.frequencies);
  r.get("sequence.amplitude", c.amplitude);
  r.get("sequence.count", c.count);

  r.get("control.modes_x", c.mx);
  r.get("control.modes_y", c.my);
  r.get("control.a0", c.a0);
  r.get("control.a2", c.a2);
  r.get("control.mu", c.mu);
  r.get_list("control.planted", c.planted);
  r.get("control.starts", c.starts);
  r.get("control.init_radius", c.init_radius);
  r.get("control.ftol", c.ftol);
  detail::read_trace(r, "target", c.target, true);

  r.get_list("mu.values", c.mus);
  r.get("mu.frozen", c.frozen_mu);

  r.get("oracle.instances", c.instances);
  r.get("axioms.trials", c.trials);
  if (auto modes = r.raw("axioms.modes")) {
    c.g_modes.clear();
    std::stringstream ss(*modes);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
      c.g_modes.push_back(detail::parse_mode("axioms.modes", b == std::string::npos ? "" : item.substr(b, e - b + 1)));
    }
  }

  const auto unknown = r.unknown_keys();
  if (!unknown.empty()) throw ConfigError(unknown.front(), "unknown key");
  return c;
}

inline ExperimentConfig parse_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("file", "cannot open " + path.string());
  return parse_config_text(read_file(path));
}

inline std::function<double(const Point&)> source_function(const SourceSpec& s, double alpha) {
  if (s.type == "constant") return [v = s.value](const Point&) { return v; };
  if (s.type == "affine") return [s](const Point& p) { return s.value + s.slope_x * p.x + s.slope_y * p.y; };
  if (s.type == "oscillation")
    return [s, alpha](const Point& p) { return s.value + s.amplitude * std::sin(s.frequency * std::numbers::pi * p.x / alpha); };
  throw ConfigError("source.type", "unknown source '" + s.type + "' (constant, affine, oscillation)");
}

inline std::function<double(double)> trace_function(const TraceSpec& t, double beta) {
  if (t.type == "affine") return [t](double y) { return t.value + t.slope_y * y; };
  if (t.type == "sine") return [t, beta](double y) { return t.value + t.amplitude * std::sin(std::numbers::pi * y / beta); };
  return [v = t.value](double) { return v; };
}

/// Structural checks on the parsed values. Throws ConfigError.
inline void check_values(const ExperimentConfig& c) {
  if (!(c.alpha > 0.0)) throw ConfigError("mesh.alpha", "must be positive");
  if (!(c.beta > 0.0)) throw ConfigError("mesh.beta", "must be positive");
  if (c.nx < 1) throw ConfigError("mesh.nx", "must be a positive integer");
  if (c.ny < 1) throw ConfigError("mesh.ny", "must be a positive integer");
  if (c.threads < 1) throw ConfigError("experiment.threads", "must be at least 1");
  if (c.law != "zero" && c.law != "linear" && c.law != "nonmonotone")
    throw ConfigError("law.type", "unknown law '" + c.law + "' (zero, linear, nonmonotone)");
  if (c.law == "nonmonotone" && !c.smallness_target && !(c.law_drop > 0.0))
    throw ConfigError("law.drop", "nonmonotone law needs drop > 0 or smallness_target");
  if (uses_p0(c.mode) && !c.p0_c)
    throw ConfigError("problem.p0_c", std::string("missing penalty law p0 for ") + to_string(c.mode) + " mode");
  if (uses_p2(c.mode) && !c.p2_c)
    throw ConfigError("problem.p2_c", std::string("missing penalty law p2 for ") + to_string(c.mode) + " mode");
  if (!uses_p0(c.mode) && c.p0_c)
    throw ConfigError("problem.p0_c", std::string(to_string(c.mode)) + " mode takes no p0 penalty");
  if (!uses_p2(c.mode) && c.p2_c)
    throw ConfigError("problem.p2_c", std::string(to_string(c.mode)) + " mode takes no p2 penalty");
  if (!(c.solve.tol > 0.0)) throw ConfigError("solver.tol_vnorm", "must be positive");
  if (c.solve.max_outer < 1) throw ConfigError("solver.max_outer", "must be at least 1");
  if (!(c.solve.inner.omega > 0.0 && c.solve.inner.omega < 2.0)) throw ConfigError("solver.omega", "must lie in (0, 2)");
  source_function(c.source, c.alpha);
  if (is_randomized(c.kind) && !c.seed) throw ConfigError("experiment.seed", "required for a randomized experiment");

  switch (c.kind) {
  case ExperimentKind::PenaltyCurve:
    if (c.mode == ConstraintMode::Exact) throw ConfigError("problem.mode", "penalty_curve needs a penalty mode");
    if (c.lambdas.empty()) throw ConfigError("sequence.lambdas", "penalty_curve needs a lambda schedule");
    break;
  case ExperimentKind::ApproxSequence: {
    const int n = c.count > 0 ? c.count
                              : static_cast<int>(c.mode == ConstraintMode::Exact ? c.frequencies.size() : c.lambdas.size());
    if (n < 3) throw ConfigError("sequence.count", "approx_sequence needs at least 3 terms");
    break;
  }
  case ExperimentKind::Control:
  case ExperimentKind::MuConvergence:
    if (c.mx < 1 || c.my < 1 || c.mx * c.my > 12) throw ConfigError("control.modes_x", "need 1 <= modes_x*modes_y <= 12");
    if (!(c.a0 > 0.0)) throw ConfigError("control.a0", "must be positive");
    if (!(c.a2 > 0.0)) throw ConfigError("control.a2", "must be positive");
    if (c.starts < 1) throw ConfigError("control.starts", "must be at least 1");
    if (!c.planted.empty() && static_cast<int>(c.planted.size()) != c.mx * c.my)
      throw ConfigError("control.planted", "needs one coefficient per basis function");
    if (c.kind == ExperimentKind::MuConvergence) {
      if (c.mode == ConstraintMode::Exact) throw ConfigError("problem.mode", "mu_convergence needs a penalty mode");
      if (c.mus.empty()) throw ConfigError("mu.values", "missing");
      if (c.mus.size() != c.lambdas.size()) throw ConfigError("mu.values", "needs as many entries as sequence.lambdas");
    }
    break;
  case ExperimentKind::OracleCheck:
    if (c.mode != ConstraintMode::Exact) throw ConfigError("problem.mode", "oracle_check runs in exact mode");
    if (c.law == "nonmonotone") throw ConfigError("law.type", "oracle_check needs a convex law");
    if (c.instances < 1) throw ConfigError("oracle.instances", "must be at least 1");
    break;
  case ExperimentKind::GAxioms:
    if (c.trials < 1) throw ConfigError("axioms.trials", "must be at least 1");
    break;
  default: break;
  }
}

inline BoundaryLaw make_law(const ExperimentConfig& c, const DiscreteConstants& k) {
  if (c.law == "linear") return law_linear(c.flux, c.robin);
  if (c.law == "nonmonotone") {
    const double drop = c.smallness_target ? *c.smallness_target / (k.c0 * k.c0 * k.c3 * k.c3) : c.law_drop;
    return law_nonmonotone(c.law_a, c.law_r0, drop);
  }
  return law_zero();
}

/// The state problem described by the configuration (mesh, law, mode, data).
inline HviProblem build_problem(const ExperimentConfig& c, ConstraintMode mode) {
  HviProblem p;
  p.disc = discretize(build_rect_mesh(c.alpha, c.beta, c.nx, c.ny));
  p.f = interpolate(p.mesh(), source_function(c.source, c.alpha));
  p.datum = dirichlet_example(trace_function(c.boundary, c.beta), p.mesh());
  p.law = make_law(c, p.disc->constants);
  p.mode = mode;
  p.lambda = c.lambda;
  if (uses_p0(mode)) p.p0 = penalty_p0(c.p0_c.value_or(1.0));
  if (uses_p2(mode)) p.p2 = penalty_p2(c.p2_c.value_or(1.0));
  return p;
}

inline HviProblem build_problem(const ExperimentConfig& c) { return build_problem(c, c.mode); }

struct Diagnostics {
  bool ok = true;
  std::vector<std::string> messages;
  Summary resolved;
};

inline Summary resolved_settings(const ExperimentConfig& c) {
  auto num = [](double v) { return format_double(v); };
  Summary s{{"experiment.kind", to_string(c.kind)},
            {"experiment.seed", c.seed ? std::to_string(*c.seed) : "none"},
            {"experiment.threads", std::to_string(c.threads)},
            {"mesh.alpha", num(c.alpha)},
            {"mesh.beta", num(c.beta)},
            {"mesh.nx", std::to_string(c.nx)},
            {"mesh.ny", std::to_string(c.ny)},
            {"law.type", c.law},
            {"problem.mode", to_string(c.mode)},
            {"problem.lambda", num(c.lambda)},
            {"source.type", c.source.type},
            {"boundary.type", c.boundary.type},
            {"solver.tol_vnorm", num(c.solve.tol)},
            {"solver.max_outer", std::to_string(c.solve.max_outer)},
            {"solver.omega", num(c.solve.inner.omega)}};
  if (c.p0_c) s.emplace_back("problem.p0_c", num(*c.p0_c));
  if (c.p2_c) s.emplace_back("problem.p2_c", num(*c.p2_c));
  return s;
}

/// Full consistency report without running solves; includes the smallness
/// check with the discrete constants of the configured mesh.
inline Diagnostics validate_config(const ExperimentConfig& c) {
  Diagnostics d;
  try {
    check_values(c);
    const HviProblem p = build_problem(c);
    d.resolved = resolved_settings(c);
    d.resolved.emplace_back("constants.c0", format_double(p.disc->constants.c0));
    d.resolved.emplace_back("constants.c3", format_double(p.disc->constants.c3));
    d.resolved.emplace_back("smallness_product", format_double(p.smallness_product()));
    validate(p);
  } catch (const ConfigError& e) {
    d.ok = false;
    d.messages.push_back(e.what());
  } catch (const ProblemError& e) {
    d.ok = false;
    d.messages.push_back(std::string("problem: ") + e.what());
  } catch (const std::exception& e) {
    d.ok = false;
    d.messages.push_back(std::string("error: ") + e.what());
  }
  if (d.ok) d.messages.push_back("ok");
  return d;
}

inline Diagnostics validate_config_file(const std::filesystem::path& path) {
  try {
    return validate_config(parse_config(path));
  } catch (const ConfigError& e) {
    Diagnostics d;
    d.ok = false;
    d.messages.push_back(e.what());
    return d;
  }
}

} // namespace hvi
