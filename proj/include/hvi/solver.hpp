#pragma once

#include <Eigen/SparseCholesky>

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "inner.hpp"
#include "problem.hpp"
#include "rng.hpp"

namespace hvi {

struct SolveOptions {
  double tol = 1e-10; // outer increment tolerance in the V-norm
  int max_outer = 200;
  InnerOptions inner;
  std::optional<FeField> initial; // defaults to the lifting clamped at zero
};

struct SolveReport {
  FeField solution;
  int outer_iters = 0;
  std::vector<double> contraction_estimates; // q_k = |u^{k+1}-u^k| / |u^k-u^{k-1}|
  std::vector<double> increments;
  double final_increment = 0.0;
  InnerStats inner_stats;
  double residual = 0.0; // optimality residual at the fixed point, V-dual norm
};

/// Starting point: the given field (or the lifting clamped at zero) with the
/// mode's prescribed values imposed.
inline FeField initial_guess(const HviProblem& p, const DofLayout& lay, const std::optional<FeField>& init) {
  FeField u = init ? *init : FeField(p.datum.lifting.cwiseMax(0.0));
  for (std::size_t i = 0; i < lay.is_unknown.size(); ++i)
    if (!lay.is_unknown[i]) u[static_cast<Eigen::Index>(i)] = lay.fixed[static_cast<Eigen::Index>(i)];
  for (int i : lay.unknowns)
    if (lay.bounded[i]) u[i] = std::max(u[i], 0.0);
  return u;
}

/// KKT residual of the discrete inequality at u with xi = subgrad(u): the
/// nodal natural residual (in force units) measured in the dual of V_h.
inline double optimality_residual(const HviProblem& p, const DofLayout& lay, const FeField& u) {
  const auto& ops = p.ops();
  const auto& mesh = p.mesh();
  const double inv_lambda = (p.mode == ConstraintMode::Exact) ? 0.0 : 1.0 / p.lambda;
  FeField g = ops.stiffness * u - ops.mass * p.f + inv_lambda * penalty_vector(p, u);
  for (int i : lay.unknowns)
    if (ops.gamma3_weights[i] > 0.0)
      g[i] += ops.gamma3_weights[i] * p.law.subgrad(mesh.nodes[static_cast<std::size_t>(i)], u[i]);
  Vec rho(static_cast<Eigen::Index>(lay.unknowns.size()));
  for (std::size_t k = 0; k < lay.unknowns.size(); ++k) {
    const int i = lay.unknowns[k];
    double r = g[i];
    if (lay.bounded[i]) {
      const double d = ops.stiffness.coeff(i, i);
      r = d * (u[i] - std::max(0.0, u[i] - g[i] / d));
    }
    rho[static_cast<Eigen::Index>(k)] = r;
  }
  if (rho.size() == 0) return 0.0;
  Eigen::SimplicialLDLT<SpMat> h(detail::restrict_matrix(ops.h1, lay.unknowns));
  return std::sqrt(std::max(0.0, rho.dot(h.solve(rho))));
}

/// Solve the discrete (penalized) hemivariational inequality by a Banach
/// fixed-point loop around convex subproblems. Only the nonmonotone part
/// -alpha_jnu * r of the boundary subgradient lags one iteration, so the
/// iteration map contracts with factor about alpha_jnu c0^2 c3^2.
inline SolveReport solve(const HviProblem& p, const SolveOptions& opt = {}) {
  validate(p);
  if (!(opt.tol > 0.0)) throw std::invalid_argument("solve: tol must be positive");
  const DofLayout lay = make_layout(p.mesh(), p.datum, p.mode);
  ConvexStep step(p, lay);

  SolveReport rep;
  FeField u = initial_guess(p, lay, opt.initial);
  double prev_inc = 0.0;
  for (int k = 1; k <= opt.max_outer; ++k) {
    step.set_previous(u);
    FeField next = u;
    try {
      step.solve(next, opt.inner, rep.inner_stats);
    } catch (const NumericError& e) {
      throw NumericError(std::string("outer iteration ") + std::to_string(k) + ": " + e.what());
    }
    const double inc = v_norm(p.ops(), next - u);
    rep.increments.push_back(inc);
    if (k > 1 && prev_inc > 0.0) rep.contraction_estimates.push_back(inc / prev_inc);
    prev_inc = inc;
    u = std::move(next);
    rep.outer_iters = k;
    rep.final_increment = inc;
    if (inc <= opt.tol) {
      rep.solution = std::move(u);
      rep.residual = optimality_residual(p, lay, rep.solution);
      return rep;
    }
  }
  std::ostringstream msg;
  msg << "outer fixed-point loop did not converge in " << opt.max_outer
      << " iterations (last increment " << prev_inc << ")";
  throw NonConvergence(msg.str(), rep.contraction_estimates);
}

/// Discrete inequality check for a candidate u: the smallest value over the
/// given test fields v of
///   a(u,v-u) + (1/lambda)<Gu,v-u> + sum_i w_i j0(u_i; v_i-u_i) - (f,v-u).
inline double inequality_margin(const HviProblem& p, const FeField& u, const std::vector<FeField>& tests) {
  const auto& ops = p.ops();
  const auto& mesh = p.mesh();
  const FeField su = ops.stiffness * u;
  const FeField mf = ops.mass * p.f;
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& v : tests) {
    const FeField d = v - u;
    double val = su.dot(d) - mf.dot(d);
    if (p.mode != ConstraintMode::Exact) val += apply_penalty_G(p, u, d) / p.lambda;
    for (Eigen::Index i = 0; i < u.size(); ++i)
      if (ops.gamma3_weights[i] > 0.0)
        val += ops.gamma3_weights[i] * p.law.dir_deriv(mesh.nodes[static_cast<std::size_t>(i)], u[i], d[i]);
    worst = std::min(worst, val);
  }
  return worst;
}

struct GAxiomReport {
  int trials = 0;
  int sign_violations = 0;         // <Gu, v-u> > tol for u in K~, v in K
  int monotonicity_violations = 0; // <Gu - Gw, u - w> < -tol
  int witness_checks = 0;          // trials where <Gu, v-u> = 0 on the whole spanning family
  int witness_violations = 0;      // ... but u is not in K
  int detections = 0;              // u outside K caught by a nonzero pairing
  std::vector<std::string> counterexamples;

  bool ok() const { return sign_violations == 0 && monotonicity_violations == 0 && witness_violations == 0; }
};

namespace detail {

inline FeField sample_K(const TriMesh& mesh, const DirichletDatum& datum, CounterRng& rng) {
  FeField v = FeField::Zero(static_cast<Eigen::Index>(mesh.num_nodes()));
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    switch (mesh.roles[i]) {
    case NodeRole::Gamma1: v[k] = 0.0; break;
    case NodeRole::Gamma2: v[k] = datum.b[k]; break;
    default: v[k] = rng.uniform() < 0.25 ? 0.0 : rng.uniform(0.0, 2.0); break;
    }
  }
  return v;
}

/// Random element of the mode's K~_h. Each node deviates from K with
/// probability `spread` so both feasible and infeasible fields occur.
inline FeField sample_relaxed(const TriMesh& mesh, const DirichletDatum& datum, ConstraintMode mode,
                              CounterRng& rng, double spread) {
  FeField u = sample_K(mesh, datum, rng);
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    if (mesh.roles[i] == NodeRole::Gamma1 || rng.uniform() >= spread) continue;
    const bool on_g2 = mesh.roles[i] == NodeRole::Gamma2;
    if (on_g2 && fixes_gamma2(mode)) continue;
    const double delta = rng.uniform(-2.0, 2.0);
    u[k] = has_obstacle(mode) ? std::max(0.0, u[k] + delta) : u[k] + delta;
  }
  return u;
}

} // namespace detail

/// Randomized check of the penalty-operator axioms on the discrete sets:
/// monotonicity, the sign condition <Gu, v-u> <= 0 for u in K~, v in K, and
/// the implication "<Gu, v-u> = 0 for all v in K  =>  u in K", tested on the
/// spanning family {v0} + {v0 + e_i} of K around a base point v0.
inline GAxiomReport check_G_axioms(const HviProblem& p, int trials, std::uint64_t seed, double tol = 1e-10) {
  if (p.mode == ConstraintMode::Exact) throw std::logic_error("check_G_axioms: exact mode has no penalty operator");
  validate(p);
  const auto& mesh = p.mesh();
  const auto& datum = p.datum;
  CounterRng rng(seed, 0x6a);

  GAxiomReport rep;
  std::vector<int> constrained;
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i)
    if (mesh.roles[i] != NodeRole::Gamma1 && mesh.roles[i] != NodeRole::Gamma2)
      constrained.push_back(static_cast<int>(i));

  auto describe = [](const char* what, int trial, double value) {
    std::ostringstream os;
    os << what << " at trial " << trial << ": value " << value;
    return os.str();
  };

  for (int t = 0; t < trials; ++t) {
    ++rep.trials;
    // alternate feasible and perturbed samples so the witness implication is
    // exercised from both sides
    const double spread = (t % 3 == 0) ? 0.0 : (t % 3 == 1 ? 0.1 : 0.5);
    const FeField u = detail::sample_relaxed(mesh, datum, p.mode, rng, spread);
    const FeField w = detail::sample_relaxed(mesh, datum, p.mode, rng, 0.5);
    const FeField v = detail::sample_K(mesh, datum, rng);

    const double sign = apply_penalty_G(p, u, v - u);
    if (sign > tol) {
      ++rep.sign_violations;
      rep.counterexamples.push_back(describe("sign condition", t, sign));
    }
    const double mono = apply_penalty_G(p, u, u - w) - apply_penalty_G(p, w, u - w);
    if (mono < -tol) {
      ++rep.monotonicity_violations;
      rep.counterexamples.push_back(describe("monotonicity", t, mono));
    }

    // spanning family of K around v
    bool all_zero = std::abs(sign) <= tol;
    for (std::size_t k = 0; k < constrained.size() && all_zero; ++k) {
      FeField vk = v;
      vk[constrained[k]] += 1.0;
      all_zero = std::abs(apply_penalty_G(p, u, vk - u)) <= tol;
    }
    const bool feasible = in_K(mesh, datum, u, 1e-12);
    if (all_zero) {
      ++rep.witness_checks;
      if (!feasible) {
        ++rep.witness_violations;
        rep.counterexamples.push_back(describe("witness implication (u not in K)", t, 0.0));
      }
    } else if (!feasible) {
      ++rep.detections;
    }
  }
  return rep;
}

} // namespace hvi
