#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "config.hpp"
#include "control.hpp"
#include "io.hpp"
#include "oracle.hpp"
#include "solver.hpp"
#include "tykhonov.hpp"

namespace hvi {

struct ExperimentResult {
  std::filesystem::path dir;
  std::vector<std::filesystem::path> files; // every artifact except the manifest
  Summary summary;
  bool ok = true;        // false when the experiment ran but its data was rejected
  std::string message;
};

namespace detail {

class ArtifactWriter {
public:
  explicit ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

  void table(const std::string& name, const CsvTable& t) {
    t.write(dir_ / name);
    files_.push_back(dir_ / name);
  }

  /// Two-column whitespace plot data.
  void plot(const std::string& name, const std::string& xlabel, const std::string& ylabel, const std::vector<double>& x,
            const std::vector<double>& y) {
    std::string text = "# " + xlabel + " " + ylabel + "\n";
    for (std::size_t k = 0; k < x.size(); ++k) text += format_double(x[k]) + " " + format_double(y[k]) + "\n";
    text_file(name, text);
  }

  void text_file(const std::string& name, const std::string& text) {
    CsvTable::write_text(dir_ / name, text);
    files_.push_back(dir_ / name);
  }

  void add(const std::vector<std::filesystem::path>& paths) { files_.insert(files_.end(), paths.begin(), paths.end()); }

  const std::filesystem::path& dir() const { return dir_; }
  const std::vector<std::filesystem::path>& files() const { return files_; }

private:
  std::filesystem::path dir_;
  std::vector<std::filesystem::path> files_;
};

inline std::string yes_no(bool b) { return b ? "true" : "false"; }

inline void run_solve(const ExperimentConfig& c, ArtifactWriter& w, ExperimentResult& res) {
  const HviProblem p = build_problem(c);
  const SolveReport rep = solve(p, c.solve);
  w.table("solution.csv", field_table(p.mesh(), rep.solution, "u"));
  CsvTable conv({"iter", "increment", "contraction"});
  std::vector<double> it, inc;
  for (std::size_t k = 0; k < rep.increments.size(); ++k) {
    const double q = k == 0 ? 0.0 : rep.contraction_estimates[k - 1];
    conv.add({static_cast<long long>(k + 1), rep.increments[k], q});
    it.push_back(static_cast<double>(k + 1));
    inc.push_back(rep.increments[k]);
  }
  w.table("convergence.csv", conv);
  w.plot("increments.dat", "iter", "increment", it, inc);
  double tail = 0.0;
  for (std::size_t k = rep.contraction_estimates.size() / 2; k < rep.contraction_estimates.size(); ++k)
    tail = std::max(tail, rep.contraction_estimates[k]);
  res.summary.emplace_back("smallness_product", format_double(p.smallness_product()));
  res.summary.emplace_back("outer_iters", std::to_string(rep.outer_iters));
  res.summary.emplace_back("final_increment", format_double(rep.final_increment));
  res.summary.emplace_back("residual", format_double(rep.residual));
  res.summary.emplace_back("tail_contraction_max", format_double(tail));
  res.summary.emplace_back("u_max", format_double(rep.solution.maxCoeff()));
  res.summary.emplace_back("u_min", format_double(rep.solution.minCoeff()));
}

inline void run_penalty_curve(const ExperimentConfig& c, ArtifactWriter& w, ExperimentResult& res) {
  const HviProblem p = build_problem(c);
  const PenaltyCurve curve = penalty_convergence_curve(p, c.lambdas, c.solve, c.threads);
  CsvTable t({"lambda", "error_v", "negative_part", "gamma2_mismatch", "outer_iters"});
  std::vector<double> lam, err;
  for (const auto& r : curve.rows) {
    t.add({r.lambda, r.error, r.negative_part, r.gamma2_mismatch, static_cast<long long>(r.outer_iters)});
    lam.push_back(r.lambda);
    err.push_back(r.error);
  }
  w.table("penalty_curve.csv", t);
  w.plot("penalty_curve.dat", "lambda", "error_v", lam, err);
  w.table("reference.csv", field_table(p.mesh(), curve.reference, "u"));
  res.summary.emplace_back("floor", format_double(curve.floor));
  res.summary.emplace_back("decreasing_until_floor", yes_no(decreasing_until(err, curve.floor)));
  res.summary.emplace_back("decay_ok", yes_no(curve.decay_ok));
  res.summary.emplace_back("final_error", format_double(curve.rows.back().error));
  res.summary.emplace_back("final_negative_part", format_double(curve.rows.back().negative_part));
  res.summary.emplace_back("final_gamma2_mismatch", format_double(curve.rows.back().gamma2_mismatch));
}

inline void run_approx_sequence(const ExperimentConfig& c, ArtifactWriter& w, ExperimentResult& res) {
  ApproxSequenceSpec s;
  s.base = build_problem(c);
  s.target_f = s.base.f;
  s.lambdas = c.lambdas;
  s.rule = c.rule;
  s.frequencies = c.frequencies;
  s.amplitude = c.amplitude;
  s.threads = c.threads;
  const int n = c.count > 0 ? c.count
                            : static_cast<int>(c.mode == ConstraintMode::Exact ? c.frequencies.size() : c.lambdas.size());
  const ConvergenceRecord rec = run_approximating_sequence(s, n, c.solve);
  CsvTable t({"n", "frequency", "lambda", "weak_gap", "strong_gap", "error_v"});
  std::vector<double> idx, err;
  for (const auto& r : rec.rows) {
    t.add({static_cast<long long>(r.n), static_cast<long long>(r.frequency), r.lambda, r.weak_gap, r.strong_gap, r.error});
    idx.push_back(r.n);
    err.push_back(r.error);
  }
  w.table("sequence.csv", t);
  w.plot("sequence.dat", "n", "error_v", idx, err);
  res.summary.emplace_back("rule", to_string(c.rule));
  res.summary.emplace_back("approximating", yes_no(rec.approximating));
  if (!rec.approximating) {
    res.summary.emplace_back("reason", rec.reason);
    res.ok = false;
    res.message = rec.reason;
    return;
  }
  res.summary.emplace_back("terms", std::to_string(rec.rows.size()));
  res.summary.emplace_back("floor", format_double(rec.floor));
  res.summary.emplace_back("first_error", format_double(rec.rows.front().error));
  res.summary.emplace_back("final_error", format_double(rec.final_error));
  res.summary.emplace_back("first_weak_gap", format_double(rec.rows.front().weak_gap));
  res.summary.emplace_back("final_weak_gap", format_double(rec.rows.back().weak_gap));
  res.summary.emplace_back("first_strong_gap", format_double(rec.rows.front().strong_gap));
  res.summary.emplace_back("final_strong_gap", format_double(rec.rows.back().strong_gap));
  res.summary.emplace_back("monotone_tail", yes_no(rec.monotone_tail));
  res.summary.emplace_back("success", yes_no(rec.success));
}

} // namespace detail

/// Control problem described by the configuration. With planted coefficients
/// the target trace is the state produced by the planted control.
inline ControlProblem build_control_problem(const ExperimentConfig& c) {
  ControlProblem q;
  q.state = build_problem(c);
  q.param = cosine_basis(q.state.mesh(), c.mx, c.my);
  q.cost.a0 = c.a0;
  q.cost.a2 = c.a2;
  q.cost.mu = c.mu;
  if (c.target.type == "datum") {
    q.cost.phi = q.state.datum.b;
  } else {
    const auto t = trace_function(c.target, c.beta);
    q.cost.phi = interpolate(q.state.mesh(), [&](const Point& x) { return t(x.y); });
  }
  if (!c.planted.empty()) {
    const Vec theta = Eigen::Map<const Vec>(c.planted.data(), static_cast<Eigen::Index>(c.planted.size()));
    q.cost.phi = evaluate_control(q, theta, c.solve).u;
  }
  return q;
}

inline ControlOptions control_options(const ExperimentConfig& c) {
  ControlOptions o;
  o.starts = c.starts;
  o.seed = c.seed.value_or(1);
  o.init_radius = c.init_radius;
  o.nm.ftol = c.ftol;
  o.solve = c.solve;
  o.threads = c.threads;
  return o;
}

/// Seeded random obstacle instance: nodal f in [-10, 10], trace rows in [0, 2].
inline HviProblem random_oracle_instance(const HviProblem& base, std::uint64_t seed, int k) {
  CounterRng rng(seed, 0x0a11ce00ULL + static_cast<std::uint64_t>(k));
  HviProblem p = base;
  for (Eigen::Index i = 0; i < p.f.size(); ++i) p.f[i] = rng.uniform(-10.0, 10.0);
  std::vector<double> rows(static_cast<std::size_t>(p.mesh().ny + 1));
  for (auto& r : rows) r = rng.uniform(0.0, 2.0);
  p.datum = dirichlet_from_trace(p.mesh(), rows);
  return p;
}

namespace detail {

inline void write_opt_report(const ControlProblem& q, const OptReport& r, ArtifactWriter& w, ExperimentResult& res,
                             const std::string& prefix) {
  std::vector<std::string> head{"start", "cost", "iterations", "evaluations", "failed"};
  for (int j = 0; j < q.param.size(); ++j) head.push_back("theta" + std::to_string(j));
  CsvTable starts(head);
  for (std::size_t s = 0; s < r.starts.size(); ++s) {
    const auto& rec = r.starts[s];
    std::vector<Cell> row{static_cast<long long>(s), rec.cost, static_cast<long long>(rec.iterations),
                          static_cast<long long>(rec.evaluations), std::string(rec.failed ? rec.error : "")};
    for (int j = 0; j < q.param.size(); ++j) row.emplace_back(rec.failed ? std::nan("") : rec.final[j]);
    starts.add(std::move(row));
  }
  w.table(prefix + "starts.csv", starts);
  CsvTable trace({"start", "iter", "best_cost"});
  std::vector<double> x, y;
  for (const auto& t : r.trace) {
    trace.add({static_cast<long long>(t.start), static_cast<long long>(t.iter), t.cost});
    if (t.start == r.best_start) {
      x.push_back(t.iter);
      y.push_back(t.cost);
    }
  }
  w.table(prefix + "trace.csv", trace);
  w.plot(prefix + "trace.dat", "iter", "best_cost", x, y);
  CsvTable field({"node", "x", "y", "u", "f"});
  const auto& mesh = q.state.mesh();
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    field.add({static_cast<long long>(i), mesh.nodes[i].x, mesh.nodes[i].y, r.best_u[k], r.best_f[k]});
  }
  w.table(prefix + "control.csv", field);
  res.summary.emplace_back(prefix + "best_cost", format_double(r.best_cost));
  res.summary.emplace_back(prefix + "best_start", std::to_string(r.best_start));
  for (int j = 0; j < q.param.size(); ++j)
    res.summary.emplace_back(prefix + "theta" + std::to_string(j), format_double(r.best_theta[j]));
  res.summary.emplace_back(prefix + "admissibility_residual", format_double(r.admissibility_residual));
  res.summary.emplace_back(prefix + "visited", std::to_string(r.visited));
  res.summary.emplace_back(prefix + "min_coercivity_slack", format_double(r.min_coercivity_slack));
}

inline void run_control(const ExperimentConfig& c, ArtifactWriter& w, ExperimentResult& res) {
  const ControlProblem q = build_control_problem(c);
  res.summary.emplace_back("gram_condition", format_double(gram_condition(q.param, q.state.ops())));
  const OptReport r = solve_control(q, control_options(c));
  write_opt_report(q, r, w, res, "");
}

inline void write_mu_table(const MuConvergence& mc, ArtifactWriter& w, const std::string& stem) {
  CsvTable t({"n", "mu", "lambda", "value", "value_gap", "cost_gap", "state_gap", "control_gap"});
  std::vector<double> x, y;
  for (const auto& r : mc.rows) {
    t.add({static_cast<long long>(r.n), r.mu, r.lambda, r.value, r.value_gap, r.cost_gap, r.state_gap, r.control_gap});
    x.push_back(r.n);
    y.push_back(r.value_gap);
  }
  w.table(stem + ".csv", t);
  w.plot(stem + ".dat", "n", "value_gap", x, y);
}

inline void run_mu_convergence(const ExperimentConfig& c, ArtifactWriter& w, ExperimentResult& res) {
  const ControlProblem q = build_control_problem(c);
  const ControlOptions opt = control_options(c);
  const MuConvergence mc = mu_convergence(q, c.mus, c.lambdas, opt);
  write_mu_table(mc, w, "mu_convergence");
  res.summary.emplace_back("reference_cost", format_double(mc.reference_cost));
  res.summary.emplace_back("monotone", yes_no(mc.monotone));
  res.summary.emplace_back("final_gap", format_double(mc.final_gap));
  if (c.frozen_mu) {
    const MuConvergence frozen = mu_convergence(q, std::vector<double>(c.mus.size(), *c.frozen_mu), c.lambdas, opt);
    write_mu_table(frozen, w, "mu_frozen");
    res.summary.emplace_back("frozen_mu", format_double(*c.frozen_mu));
    res.summary.emplace_back("frozen_final_gap", format_double(frozen.final_gap));
  }
}

inline void run_oracle_check(const ExperimentConfig& c, ArtifactWriter& w, ExperimentResult& res) {
  const HviProblem base = build_problem(c);
  std::vector<double> diff(static_cast<std::size_t>(c.instances));
  std::vector<long long> active(diff.size()), iters(diff.size());
  parallel_for(diff.size(), c.threads, [&](std::size_t k) {
    const HviProblem p = random_oracle_instance(base, *c.seed, static_cast<int>(k));
    const OracleResult o = brute_force_oracle(p);
    const SolveReport rep = solve(p, c.solve);
    diff[k] = (rep.solution - o.solution).lpNorm<Eigen::Infinity>();
    active[k] = static_cast<long long>(o.active.size());
    iters[k] = rep.outer_iters;
  });
  CsvTable t({"instance", "max_abs_diff", "active_nodes", "outer_iters"});
  std::vector<double> x;
  for (std::size_t k = 0; k < diff.size(); ++k) {
    t.add({static_cast<long long>(k), diff[k], active[k], iters[k]});
    x.push_back(static_cast<double>(k));
  }
  w.table("oracle.csv", t);
  w.plot("oracle.dat", "instance", "max_abs_diff", x, diff);
  res.summary.emplace_back("instances", std::to_string(c.instances));
  res.summary.emplace_back("max_abs_diff", format_double(*std::max_element(diff.begin(), diff.end())));
}

inline void run_g_axioms(const ExperimentConfig& c, ArtifactWriter& w, ExperimentResult& res) {
  CsvTable t({"mode", "trials", "sign_violations", "monotonicity_violations", "witness_checks", "witness_violations",
              "detections"});
  std::string examples;
  long violations = 0;
  for (ConstraintMode mode : c.g_modes) {
    if (mode == ConstraintMode::Exact) throw ConfigError("axioms.modes", "exact mode has no penalty operator");
    const HviProblem p = build_problem(c, mode);
    const GAxiomReport r = check_G_axioms(p, c.trials, *c.seed);
    t.add({std::string(to_string(mode)), static_cast<long long>(r.trials), static_cast<long long>(r.sign_violations),
           static_cast<long long>(r.monotonicity_violations), static_cast<long long>(r.witness_checks),
           static_cast<long long>(r.witness_violations), static_cast<long long>(r.detections)});
    violations += r.sign_violations + r.monotonicity_violations + r.witness_violations;
    for (const auto& e : r.counterexamples) examples += std::string(to_string(mode)) + ": " + e + "\n";
  }
  w.table("g_axioms.csv", t);
  if (!examples.empty()) w.text_file("counterexamples.txt", examples);
  res.summary.emplace_back("violations", std::to_string(violations));
}

} // namespace detail

/// Run a validated configuration, writing every artifact under c.out_dir.
/// Throws ConfigError, ProblemError or NumericError on failure.
inline ExperimentResult run_experiment(const ExperimentConfig& c) {
  check_values(c);
  validate(build_problem(c));
  detail::ArtifactWriter w(c.out_dir);
  ExperimentResult res;
  res.dir = c.out_dir;
  res.summary = resolved_settings(c);
  switch (c.kind) {
  case ExperimentKind::Solve: detail::run_solve(c, w, res); break;
  case ExperimentKind::PenaltyCurve: detail::run_penalty_curve(c, w, res); break;
  case ExperimentKind::ApproxSequence: detail::run_approx_sequence(c, w, res); break;
  case ExperimentKind::Control: detail::run_control(c, w, res); break;
  case ExperimentKind::MuConvergence: detail::run_mu_convergence(c, w, res); break;
  case ExperimentKind::OracleCheck: detail::run_oracle_check(c, w, res); break;
  case ExperimentKind::GAxioms: detail::run_g_axioms(c, w, res); break;
  }
  if (c.dump_mesh) w.add(dump_mesh(build_rect_mesh(c.alpha, c.beta, c.nx, c.ny), w.dir()));
  if (c.export_matrices) {
    const FeOperators ops = assemble(build_rect_mesh(c.alpha, c.beta, c.nx, c.ny));
    w.text_file("stiffness.coo", coo_text(ops.stiffness));
    w.text_file("mass.coo", coo_text(ops.mass));
    w.text_file("gamma2_mass.coo", coo_text(ops.gamma2_mass));
    w.text_file("gamma3_mass.coo", coo_text(ops.gamma3_mass));
  }
  res.summary.emplace_back("status", res.ok ? "ok" : "rejected");
  w.text_file("summary.txt", summary_text(res.summary));
  res.files = w.files();
  write_manifest(w.dir(), res.files);
  return res;
}

} // namespace hvi
