#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "errors.hpp"
#include "problem.hpp"

namespace hvi {

struct OracleResult {
  FeField solution;
  FeField multiplier;       // nodal multiplier of u >= 0 (zero off the active set)
  std::vector<int> active;  // active node indices
  int candidates_passing = 0;
};

/// Exhaustive active-set solver for the exact-mode obstacle problem with an
/// affine, monotone boundary law. Every subset of the constrained nodes is
/// tried as the active set; the dense linear system on the complement is
/// solved and the candidate satisfying primal (u >= 0) and dual (multiplier
/// >= 0) feasibility is returned. Independent of the iterative solver path.
inline OracleResult brute_force_oracle(const HviProblem& p, double feas_tol = 1e-12) {
  validate(p);
  if (p.mode != ConstraintMode::Exact) throw std::invalid_argument("brute_force_oracle: exact mode only");
  if (!p.law.affine || p.law.alpha_jnu != 0.0)
    throw std::invalid_argument("brute_force_oracle: needs an affine convex boundary law");
  const auto& mesh = p.mesh();
  const auto& ops = p.ops();
  const auto n = static_cast<Eigen::Index>(mesh.num_nodes());

  std::vector<int> free_nodes;
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i)
    if (mesh.roles[i] == NodeRole::Interior || mesh.roles[i] == NodeRole::Gamma3)
      free_nodes.push_back(static_cast<int>(i));
  const int m = static_cast<int>(free_nodes.size());
  if (m > 14) throw std::invalid_argument("brute_force_oracle: at most 14 constrained nodes, got " + std::to_string(m));

  const Eigen::MatrixXd s_full = Eigen::MatrixXd(ops.stiffness);
  const Eigen::MatrixXd m_full = Eigen::MatrixXd(ops.mass);
  FeField fixed = FeField::Zero(n);
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i)
    if (mesh.roles[i] == NodeRole::Gamma2) fixed[static_cast<Eigen::Index>(i)] = p.datum.b[static_cast<Eigen::Index>(i)];

  // reduced system  A u = r  on the free nodes, with xi(r) = xi0 + k r
  Eigen::MatrixXd a(m, m);
  Eigen::VectorXd rhs(m);
  const Eigen::VectorXd load = m_full * p.f - s_full * fixed;
  for (int r = 0; r < m; ++r) {
    const int i = free_nodes[r];
    const Point& x = mesh.nodes[static_cast<std::size_t>(i)];
    for (int c = 0; c < m; ++c) a(r, c) = s_full(i, free_nodes[c]);
    const double w = ops.gamma3_weights[i];
    const double xi0 = p.law.subgrad(x, 0.0);
    const double k = p.law.subgrad(x, 1.0) - xi0;
    a(r, r) += w * k;
    rhs[r] = load[i] - w * xi0;
  }

  OracleResult best;
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    std::vector<int> inactive;
    for (int r = 0; r < m; ++r)
      if (!(mask & (1u << r))) inactive.push_back(r);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(m);
    if (!inactive.empty()) {
      const auto ni = static_cast<Eigen::Index>(inactive.size());
      Eigen::MatrixXd aii(ni, ni);
      Eigen::VectorXd ri(ni);
      for (Eigen::Index r = 0; r < ni; ++r) {
        ri[r] = rhs[inactive[r]];
        for (Eigen::Index c = 0; c < ni; ++c) aii(r, c) = a(inactive[r], inactive[c]);
      }
      const Eigen::VectorXd ui = aii.ldlt().solve(ri);
      for (Eigen::Index r = 0; r < ni; ++r) u[inactive[r]] = ui[r];
    }
    const Eigen::VectorXd mult = a * u - rhs;
    bool ok = true;
    for (int r = 0; r < m && ok; ++r) {
      if (mask & (1u << r))
        ok = mult[r] >= -feas_tol;
      else
        ok = u[r] >= -feas_tol;
    }
    if (!ok) continue;
    ++best.candidates_passing;
    if (best.candidates_passing > 1) {
      const double diff = (detail::gather(best.solution, free_nodes) - u).lpNorm<Eigen::Infinity>();
      if (diff > 1e-8) throw NumericError("brute_force_oracle: two feasible active sets disagree");
      continue;
    }
    best.solution = fixed;
    best.multiplier = FeField::Zero(n);
    for (int r = 0; r < m; ++r) {
      best.solution[free_nodes[r]] = u[r];
      if (mask & (1u << r)) {
        best.multiplier[free_nodes[r]] = mult[r];
        best.active.push_back(free_nodes[r]);
      }
    }
  }
  if (best.candidates_passing == 0)
    throw NumericError("brute_force_oracle: no active set is primal and dual feasible");
  return best;
}

} // namespace hvi
