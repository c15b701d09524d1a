#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "errors.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "solver.hpp"
#include "tykhonov.hpp"

namespace hvi {

/// L_mu(u, f) = a0 |f|^2_L2(D) + a2 |u - omega(mu) phi|^2_L2(Gamma2).
struct CostSpec {
  double a0 = 1.0;
  double a2 = 1.0;
  FeField phi; // target trace; only Gamma2 values matter
  std::function<double(double)> omega = [](double mu) { return 1.0 + mu; };
  double mu = 0.0;
};

inline void validate(const CostSpec& c, Eigen::Index n) {
  if (!(c.a0 > 0.0)) throw ProblemError("cost: a0 must be positive");
  if (!(c.a2 > 0.0)) throw ProblemError("cost: a2 must be positive");
  if (c.phi.size() != n) throw ProblemError("cost: target trace size does not match the mesh");
  if (!c.omega || c.omega(0.0) != 1.0) throw ProblemError("cost: omega(0) must equal 1");
  if (!(c.mu >= 0.0)) throw ProblemError("cost: mu must be nonnegative");
}

inline double control_energy(const FeOperators& ops, const FeField& f) { return quad_form(ops.mass, f); }

inline double eval_cost(const CostSpec& c, const FeOperators& ops, const FeField& u, const FeField& f) {
  const FeField d = u - c.omega(c.mu) * c.phi;
  return c.a0 * control_energy(ops, f) + c.a2 * quad_form(ops.gamma2_mass, d);
}

/// Controls f = sum_j theta_j psi_j on a fixed basis.
struct ControlParam {
  std::vector<FeField> basis;

  int size() const { return static_cast<int>(basis.size()); }

  FeField field(const Vec& theta) const {
    if (theta.size() != size()) throw std::invalid_argument("control: coefficient count does not match the basis");
    FeField f = FeField::Zero(basis.empty() ? 0 : basis.front().size());
    for (int j = 0; j < size(); ++j) f += theta[j] * basis[static_cast<std::size_t>(j)];
    return f;
  }
};

inline Eigen::MatrixXd gram_matrix(const ControlParam& param, const FeOperators& ops) {
  const int m = param.size();
  Eigen::MatrixXd g(m, m);
  for (int i = 0; i < m; ++i) {
    const FeField mi = ops.mass * param.basis[static_cast<std::size_t>(i)];
    for (int j = 0; j < m; ++j) g(i, j) = mi.dot(param.basis[static_cast<std::size_t>(j)]);
  }
  return g;
}

inline double gram_condition(const ControlParam& param, const FeOperators& ops) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram_matrix(param, ops));
  const double lo = es.eigenvalues().minCoeff();
  return lo > 0.0 ? es.eigenvalues().maxCoeff() / lo : std::numeric_limits<double>::infinity();
}

inline void validate(const ControlParam& param, const FeOperators& ops) {
  if (param.size() == 0) throw ProblemError("control basis is empty");
  if (param.size() > 12) throw ProblemError("control basis has more than 12 functions");
  for (const auto& psi : param.basis)
    if (psi.size() != static_cast<Eigen::Index>(ops.size())) throw ProblemError("control basis function size does not match the mesh");
  const double cond = gram_condition(param, ops);
  if (!(cond < 1e8)) throw ProblemError("control basis is nearly dependent: Gram condition " + std::to_string(cond));
}

/// Tensor cosines cos(i pi x1/alpha) cos(j pi x2/beta), 0 <= i < mx, 0 <= j < my.
inline ControlParam cosine_basis(const TriMesh& mesh, int mx, int my) {
  if (mx < 1 || my < 1 || mx * my > 12) throw std::invalid_argument("cosine_basis: need 1 <= mx*my <= 12");
  ControlParam p;
  for (int j = 0; j < my; ++j)
    for (int i = 0; i < mx; ++i)
      p.basis.push_back(interpolate(mesh, [&](const Point& x) {
        return std::cos(i * std::numbers::pi * x.x / mesh.alpha) * std::cos(j * std::numbers::pi * x.y / mesh.beta);
      }));
  return p;
}

struct NelderMeadOptions {
  double ftol = 1e-8;         // stop when cost spread <= ftol |f_best| + atol
  double atol = 1e-14;
  double xtol = 1e-12;        // ... or when the simplex collapses below xtol
  double initial_step = 0.25;
  int max_evals = 20000;
  int max_restarts = 30;
};

struct NelderMeadResult {
  Vec x;
  double fx = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::vector<double> best_trace; // best-so-far cost per iteration
};

/// Nelder-Mead simplex search with standard coefficients, restarted from the
/// best vertex until a restart no longer improves the cost.
template <class F>
NelderMeadResult nelder_mead(F&& fn, const Vec& x0, const NelderMeadOptions& opt = {}) {
  const auto n = x0.size();
  NelderMeadResult res;
  auto eval = [&](const Vec& x) {
    ++res.evaluations;
    return fn(x);
  };
  res.x = x0;
  res.fx = eval(x0);
  res.best_trace.push_back(res.fx);
  double step = opt.initial_step;

  for (int restart = 0; restart <= opt.max_restarts; ++restart) {
    const double start_best = res.fx;
    std::vector<Vec> pts(static_cast<std::size_t>(n + 1), res.x);
    std::vector<double> val(static_cast<std::size_t>(n + 1), res.fx);
    for (Eigen::Index i = 0; i < n; ++i) {
      pts[static_cast<std::size_t>(i + 1)][i] += step;
      val[static_cast<std::size_t>(i + 1)] = eval(pts[static_cast<std::size_t>(i + 1)]);
    }
    std::vector<std::size_t> order(pts.size());
    bool settled = false;
    while (res.evaluations < opt.max_evals) {
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return val[a] < val[b]; });
      const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];
      if (val[best] < res.fx) {
        res.fx = val[best];
        res.x = pts[best];
      }
      ++res.iterations;
      res.best_trace.push_back(res.fx);

      double diam = 0.0;
      for (const auto& p : pts) diam = std::max(diam, (p - pts[best]).lpNorm<Eigen::Infinity>());
      if (val[worst] - val[best] <= opt.ftol * std::abs(val[best]) + opt.atol || diam <= opt.xtol) {
        settled = true;
        break;
      }

      Vec centroid = Vec::Zero(n);
      for (std::size_t i = 0; i < pts.size(); ++i)
        if (i != worst) centroid += pts[i];
      centroid /= static_cast<double>(n);

      const Vec xr = centroid + (centroid - pts[worst]);
      const double fr = eval(xr);
      if (fr < val[best]) {
        const Vec xe = centroid + 2.0 * (centroid - pts[worst]);
        const double fe = eval(xe);
        if (fe < fr) {
          pts[worst] = xe;
          val[worst] = fe;
        } else {
          pts[worst] = xr;
          val[worst] = fr;
        }
        continue;
      }
      if (fr < val[second]) {
        pts[worst] = xr;
        val[worst] = fr;
        continue;
      }
      const bool outside = fr < val[worst];
      const Vec xc = outside ? Vec(centroid + 0.5 * (xr - centroid)) : Vec(centroid + 0.5 * (pts[worst] - centroid));
      const double fc = eval(xc);
      if (fc < (outside ? fr : val[worst])) {
        pts[worst] = xc;
        val[worst] = fc;
        continue;
      }
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i == best) continue;
        pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
        val[i] = eval(pts[i]);
      }
    }
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (val[i] < res.fx) {
        res.fx = val[i];
        res.x = pts[i];
      }
    if (!settled) break; // evaluation budget exhausted
    if (start_best - res.fx <= opt.ftol * std::abs(res.fx) + opt.atol) {
      res.converged = true;
      break;
    }
    step = std::max(opt.xtol * 100.0, 0.5 * step);
  }
  res.best_trace.push_back(res.fx);
  return res;
}

/// Problem Q over the control subspace: the state template fixes mesh,
/// datum, law and mode; its source is replaced by the control.
struct ControlProblem {
  HviProblem state;
  CostSpec cost;
  ControlParam param;
};

struct ControlOptions {
  int starts = 8;
  std::uint64_t seed = 1;
  double init_radius = 1.0;
  NelderMeadOptions nm;
  SolveOptions solve;
  int threads = 1;
};

struct StartRecord {
  Vec initial;
  Vec final;
  double cost = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int evaluations = 0;
  bool failed = false;
  std::string error;
  FeField u, f;
};

struct TracePoint {
  int start = 0;
  int iter = 0;
  double cost = 0.0; // best so far
};

struct OptReport {
  FeField best_u, best_f;
  Vec best_theta;
  double best_cost = std::numeric_limits<double>::infinity();
  int best_start = -1;
  std::vector<StartRecord> starts;
  std::vector<TracePoint> trace;
  double admissibility_residual = 0.0;
  long visited = 0;
  double min_coercivity_slack = std::numeric_limits<double>::infinity(); // min of L - a0 |f|^2
};

inline void validate(const ControlProblem& q) {
  validate(q.cost, static_cast<Eigen::Index>(q.state.mesh().num_nodes()));
  validate(q.param, q.state.ops());
  HviProblem probe = q.state;
  probe.f = q.param.field(Vec::Zero(q.param.size()));
  validate(probe);
}

/// State solve and cost at theta.
struct ControlEvaluation {
  FeField u, f;
  double cost = 0.0;
  double residual = 0.0;
};

inline ControlEvaluation evaluate_control(const ControlProblem& q, const Vec& theta, const SolveOptions& opt = {}) {
  HviProblem p = q.state;
  p.f = q.param.field(theta);
  const SolveReport rep = solve(p, opt);
  ControlEvaluation ev{rep.solution, p.f, 0.0, rep.residual};
  ev.cost = eval_cost(q.cost, p.ops(), ev.u, ev.f);
  return ev;
}

/// Multi-start simplex search for the best admissible pair.
inline OptReport solve_control(const ControlProblem& q, const ControlOptions& opt = {}) {
  validate(q);
  if (opt.starts < 1) throw std::invalid_argument("solve_control: need at least one start");
  const int m = q.param.size();
  OptReport rep;
  rep.starts.resize(static_cast<std::size_t>(opt.starts));
  std::vector<std::vector<double>> traces(rep.starts.size());
  std::vector<long> visited(rep.starts.size(), 0);
  std::vector<double> slack(rep.starts.size(), std::numeric_limits<double>::infinity());

  parallel_for(rep.starts.size(), opt.threads, [&](std::size_t s) {
    StartRecord& rec = rep.starts[s];
    CounterRng rng(opt.seed, 0x5eed0000ULL + s);
    rec.initial = Vec(m);
    for (int j = 0; j < m; ++j) rec.initial[j] = rng.uniform(-opt.init_radius, opt.init_radius);
    auto objective = [&](const Vec& theta) {
      const ControlEvaluation ev = evaluate_control(q, theta, opt.solve);
      ++visited[s];
      slack[s] = std::min(slack[s], ev.cost - q.cost.a0 * control_energy(q.state.ops(), ev.f));
      return ev.cost;
    };
    try {
      const NelderMeadResult nm = nelder_mead(objective, rec.initial, opt.nm);
      rec.final = nm.x;
      rec.cost = nm.fx;
      rec.iterations = nm.iterations;
      rec.evaluations = nm.evaluations;
      traces[s] = nm.best_trace;
      const ControlEvaluation ev = evaluate_control(q, nm.x, opt.solve);
      rec.u = ev.u;
      rec.f = ev.f;
    } catch (const NumericError& e) {
      rec.failed = true;
      rec.error = e.what();
    }
  });

  for (std::size_t s = 0; s < rep.starts.size(); ++s) {
    rep.visited += visited[s];
    rep.min_coercivity_slack = std::min(rep.min_coercivity_slack, slack[s]);
    for (std::size_t k = 0; k < traces[s].size(); ++k)
      rep.trace.push_back({static_cast<int>(s), static_cast<int>(k), traces[s][k]});
    const auto& rec = rep.starts[s];
    if (!rec.failed && rec.cost < rep.best_cost) {
      rep.best_cost = rec.cost;
      rep.best_start = static_cast<int>(s);
    }
  }
  if (rep.best_start < 0) throw NumericError("solve_control: every start failed (" + rep.starts.front().error + ")");
  const auto& best = rep.starts[static_cast<std::size_t>(rep.best_start)];
  rep.best_theta = best.final;
  rep.best_u = best.u;
  rep.best_f = best.f;
  rep.admissibility_residual = evaluate_control(q, best.final, opt.solve).residual;
  return rep;
}

struct MuRow {
  int n = 0;
  double mu = 0.0;
  double lambda = 0.0;
  double value = 0.0;       // L_mu_n(u_n*, f_n*)
  double value_gap = 0.0;   // |L_mu_n(u_n*, f_n*) - L(u*, f*)|
  double cost_gap = 0.0;    // L(u_n*, f_n*) - L(u*, f*)
  double state_gap = 0.0;   // |u_n* - u*|_V
  double control_gap = 0.0; // |f_n* - f*|_L2
};

struct MuConvergence {
  double reference_cost = 0.0;
  FeField reference_u, reference_f;
  std::vector<MuRow> rows;
  bool monotone = false; // value gaps strictly decreasing
  double final_gap = 0.0;
};

/// Perturbed control problems (L_mu_n over the penalized admissible set with
/// lambda_n) against the reference problem (mu = 0, exact state).
inline MuConvergence mu_convergence(const ControlProblem& q, const std::vector<double>& mus,
                                    const std::vector<double>& lambdas, const ControlOptions& opt = {}) {
  if (mus.size() != lambdas.size() || mus.empty()) throw std::invalid_argument("mu_convergence: need matching mu and lambda lists");
  if (q.state.mode == ConstraintMode::Exact) throw std::invalid_argument("mu_convergence: the state template needs a penalty mode");
  MuConvergence out;
  ControlProblem ref = q;
  ref.state = exact_version(q.state);
  ref.cost.mu = 0.0;
  const OptReport r0 = solve_control(ref, opt);
  out.reference_cost = r0.best_cost;
  out.reference_u = r0.best_u;
  out.reference_f = r0.best_f;
  const auto& ops = q.state.ops();
  CostSpec plain = q.cost;
  plain.mu = 0.0;

  for (std::size_t n = 0; n < mus.size(); ++n) {
    ControlProblem qn = q;
    qn.cost.mu = mus[n];
    qn.state.lambda = lambdas[n];
    const OptReport r = solve_control(qn, opt);
    MuRow row;
    row.n = static_cast<int>(n) + 1;
    row.mu = mus[n];
    row.lambda = lambdas[n];
    row.value = r.best_cost;
    row.value_gap = std::abs(r.best_cost - out.reference_cost);
    row.cost_gap = eval_cost(plain, ops, r.best_u, r.best_f) - out.reference_cost;
    row.state_gap = v_norm(ops, r.best_u - out.reference_u);
    row.control_gap = l2_norm(ops, r.best_f - out.reference_f);
    out.rows.push_back(row);
  }
  out.monotone = true;
  for (std::size_t k = 1; k < out.rows.size(); ++k)
    if (!(out.rows[k].value_gap < out.rows[k - 1].value_gap)) out.monotone = false;
  out.final_gap = out.rows.back().value_gap;
  return out;
}

struct SolutionSetProbe {
  OptReport report;
  std::vector<int> near_optimal; // start indices within 1e-6 relative cost of the best
  std::vector<int> cluster;      // cluster label per near-optimal start
  int clusters = 0;
  double diameter = 0.0;         // in the V x L2 norm
  double f_bound = 0.0;          // sqrt((best + 1e-6) / a0)
  bool coercivity_ok = true;
};

inline SolutionSetProbe solution_set_probe(const ControlProblem& q, const ControlOptions& opt = {},
                                           double cluster_radius = 1e-3) {
  SolutionSetProbe out;
  out.report = solve_control(q, opt);
  const auto& ops = q.state.ops();
  const double best = out.report.best_cost;
  for (std::size_t s = 0; s < out.report.starts.size(); ++s) {
    const auto& rec = out.report.starts[s];
    if (!rec.failed && rec.cost - best <= 1e-6 * std::abs(best) + 1e-14) out.near_optimal.push_back(static_cast<int>(s));
  }
  auto dist = [&](int a, int b) {
    const auto& ra = out.report.starts[static_cast<std::size_t>(a)];
    const auto& rb = out.report.starts[static_cast<std::size_t>(b)];
    const double du = v_norm(ops, ra.u - rb.u), df = l2_norm(ops, ra.f - rb.f);
    return std::sqrt(du * du + df * df);
  };
  const std::size_t k = out.near_optimal.size();
  out.cluster.assign(k, -1);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) out.diameter = std::max(out.diameter, dist(out.near_optimal[i], out.near_optimal[j]));
  }
  // single-linkage clustering
  for (std::size_t i = 0; i < k; ++i) {
    if (out.cluster[i] >= 0) continue;
    std::vector<std::size_t> stack{i};
    out.cluster[i] = out.clusters;
    while (!stack.empty()) {
      const std::size_t a = stack.back();
      stack.pop_back();
      for (std::size_t b = 0; b < k; ++b)
        if (out.cluster[b] < 0 && dist(out.near_optimal[a], out.near_optimal[b]) <= cluster_radius) {
          out.cluster[b] = out.clusters;
          stack.push_back(b);
        }
    }
    ++out.clusters;
  }
  out.f_bound = std::sqrt((best + 1e-6) / q.cost.a0);
  for (int s : out.near_optimal) {
    const auto& rec = out.report.starts[static_cast<std::size_t>(s)];
    if (q.cost.a0 * control_energy(ops, rec.f) > best + 1e-6) out.coercivity_ok = false;
  }
  return out;
}

struct QuadraticReference {
  Vec theta;
  double cost = 0.0;
  FeField u, f;
};

/// Minimizer of the cost when the control-to-state map is affine (affine
/// convex law, constraints inactive): u(theta) = u0 + Z theta gives the normal
/// equations (a0 G + a2 Z^T B2 Z) theta = a2 Z^T B2 (omega phi - u0). The
/// affine model is verified by a state solve at the minimizer.
inline QuadraticReference control_normal_equations(const ControlProblem& q, const SolveOptions& opt = {}) {
  validate(q);
  if (!q.state.law.affine || q.state.law.alpha_jnu != 0.0)
    throw std::invalid_argument("control_normal_equations: needs an affine convex boundary law");
  const int m = q.param.size();
  const auto& ops = q.state.ops();
  const FeField u0 = evaluate_control(q, Vec::Zero(m), opt).u;
  std::vector<FeField> z;
  for (int j = 0; j < m; ++j) z.push_back(evaluate_control(q, Vec::Unit(m, j), opt).u - u0);
  const FeField target = q.cost.omega(q.cost.mu) * q.cost.phi - u0;
  const Eigen::MatrixXd g = gram_matrix(q.param, ops);
  Eigen::MatrixXd h = q.cost.a0 * g;
  Vec rhs(m);
  for (int i = 0; i < m; ++i) {
    const FeField bz = ops.gamma2_mass * z[static_cast<std::size_t>(i)];
    rhs[i] = q.cost.a2 * bz.dot(target);
    for (int j = 0; j < m; ++j) h(i, j) += q.cost.a2 * bz.dot(z[static_cast<std::size_t>(j)]);
  }
  QuadraticReference out;
  out.theta = h.ldlt().solve(rhs);
  const ControlEvaluation ev = evaluate_control(q, out.theta, opt);
  FeField model = u0;
  for (int j = 0; j < m; ++j) model += out.theta[j] * z[static_cast<std::size_t>(j)];
  if (v_norm(ops, ev.u - model) > 1e-8 * std::max(1.0, v_norm(ops, ev.u)))
    throw NumericError("control_normal_equations: control-to-state map is not affine on this instance");
  out.u = ev.u;
  out.f = ev.f;
  out.cost = ev.cost;
  return out;
}

} // namespace hvi
