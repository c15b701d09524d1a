#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "errors.hpp"
#include "fem.hpp"
#include "geometry.hpp"
#include "laws.hpp"

namespace hvi {

/// Mesh, assembled operators and discrete constants, computed once and shared
/// read-only between problems on the same mesh.
struct Discretization {
  TriMesh mesh;
  FeOperators ops;
  DiscreteConstants constants;
};

inline std::shared_ptr<const Discretization> discretize(TriMesh mesh) {
  auto d = std::make_shared<Discretization>();
  d->ops = assemble(mesh);
  d->constants = discrete_constants(d->ops);
  d->mesh = std::move(mesh);
  return d;
}

/// Which constraint set and penalty operator define the inequality.
///   Exact          K  = {v >= 0 in D, v = b on Gamma2}, G = 0
///   PenaltyDomain  K~ = {v = b on Gamma2},            G from p0 on D
///   PenaltyGamma2  K~ = {v >= 0 in D},                G from p2 on Gamma2
///   PenaltyFull    K~ = V,                            G from both
enum class ConstraintMode { Exact, PenaltyDomain, PenaltyGamma2, PenaltyFull };

inline const char* to_string(ConstraintMode m) {
  switch (m) {
  case ConstraintMode::Exact: return "exact";
  case ConstraintMode::PenaltyDomain: return "penalty_domain";
  case ConstraintMode::PenaltyGamma2: return "penalty_gamma2";
  case ConstraintMode::PenaltyFull: return "penalty_full";
  }
  return "?";
}

inline bool uses_p0(ConstraintMode m) {
  return m == ConstraintMode::PenaltyDomain || m == ConstraintMode::PenaltyFull;
}
inline bool uses_p2(ConstraintMode m) {
  return m == ConstraintMode::PenaltyGamma2 || m == ConstraintMode::PenaltyFull;
}
inline bool has_obstacle(ConstraintMode m) {
  return m == ConstraintMode::Exact || m == ConstraintMode::PenaltyGamma2;
}
inline bool fixes_gamma2(ConstraintMode m) {
  return m == ConstraintMode::Exact || m == ConstraintMode::PenaltyDomain;
}

struct HviProblem {
  std::shared_ptr<const Discretization> disc;
  FeField f; // nodal source, paired through the mass matrix
  DirichletDatum datum;
  BoundaryLaw law;
  ConstraintMode mode = ConstraintMode::Exact;
  std::optional<PenaltyLaw> p0;
  std::optional<PenaltyLaw> p2;
  double lambda = 1.0;

  const TriMesh& mesh() const { return disc->mesh; }
  const FeOperators& ops() const { return disc->ops; }

  /// alpha_jnu * c0_h^2 * c3_h^2; must stay below one.
  double smallness_product() const {
    const auto& c = disc->constants;
    return law.alpha_jnu * c.c0 * c.c0 * c.c3 * c.c3;
  }
};

/// Throws ProblemError naming the first violated structural requirement.
inline void validate(const HviProblem& p) {
  if (!p.disc) throw ProblemError("problem has no discretization");
  const auto n = static_cast<Eigen::Index>(p.mesh().num_nodes());
  if (p.f.size() != n) throw ProblemError("source field size does not match the mesh");
  if (p.datum.b.size() != n || p.datum.lifting.size() != n)
    throw ProblemError("Dirichlet datum size does not match the mesh");
  if (!p.law.subgrad) throw ProblemError("boundary law is empty");
  switch (p.mode) {
  case ConstraintMode::Exact:
    if (p.p0 || p.p2) throw ProblemError("exact mode takes no penalty laws");
    break;
  case ConstraintMode::PenaltyDomain:
    if (!p.p0) throw ProblemError("missing penalty law p0 for penalty_domain mode");
    if (p.p2) throw ProblemError("penalty_domain mode takes only p0");
    break;
  case ConstraintMode::PenaltyGamma2:
    if (!p.p2) throw ProblemError("missing penalty law p2 for penalty_gamma2 mode");
    if (p.p0) throw ProblemError("penalty_gamma2 mode takes only p2");
    break;
  case ConstraintMode::PenaltyFull:
    if (!p.p0 || !p.p2) throw ProblemError("missing penalty law: penalty_full mode needs p0 and p2");
    break;
  }
  if (p.p0 && p.p0->kind != PenaltyKind::DomainNonneg) throw ProblemError("p0 must be a domain penalty");
  if (p.p2 && p.p2->kind != PenaltyKind::BoundaryEq) throw ProblemError("p2 must be a boundary penalty");
  if (p.mode != ConstraintMode::Exact && !(p.lambda > 0.0))
    throw ProblemError("penalty parameter lambda must be positive");
  const double prod = p.smallness_product();
  if (!(prod < 1.0))
    throw ProblemError("smallness condition violated: alpha_jnu*c0^2*c3^2 = " + std::to_string(prod) +
                       " >= 1");
}

/// Unknowns of the discrete problem for a mode: every node that is neither on
/// Gamma1 nor (when the mode fixes it) on Gamma2, plus whether it carries the
/// bound u >= 0.
struct DofLayout {
  std::vector<int> unknowns;
  std::vector<char> bounded; // per node
  FeField fixed;             // prescribed values at non-unknown nodes
  std::vector<char> is_unknown;
};

inline DofLayout make_layout(const TriMesh& mesh, const DirichletDatum& datum, ConstraintMode mode) {
  const auto n = mesh.num_nodes();
  DofLayout lay;
  lay.bounded.assign(n, 0);
  lay.is_unknown.assign(n, 0);
  lay.fixed = FeField::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const NodeRole r = mesh.roles[i];
    if (r == NodeRole::Gamma1) continue;
    if (r == NodeRole::Gamma2 && fixes_gamma2(mode)) {
      lay.fixed[static_cast<Eigen::Index>(i)] = datum.b[static_cast<Eigen::Index>(i)];
      continue;
    }
    lay.unknowns.push_back(static_cast<int>(i));
    lay.is_unknown[i] = 1;
    lay.bounded[i] = has_obstacle(mode) ? 1 : 0;
  }
  return lay;
}

/// Lumped pairing <G u, v>. Throws std::logic_error in exact mode.
inline double apply_penalty_G(const HviProblem& p, const FeField& u, const FeField& v) {
  if (p.mode == ConstraintMode::Exact) throw std::logic_error("apply_penalty_G: exact mode has no penalty operator");
  const auto& mesh = p.mesh();
  const auto& ops = p.ops();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const Point& x = mesh.nodes[static_cast<std::size_t>(i)];
    if (uses_p0(p.mode)) acc += ops.lumped_mass[i] * p.p0->value(x, u[i]) * v[i];
    if (uses_p2(p.mode) && ops.gamma2_weights[i] > 0.0)
      acc += ops.gamma2_weights[i] * p.p2->value(x, u[i] - p.datum.b[i]) * v[i];
  }
  return acc;
}

/// Nodal vector of G u (the functional v -> <G u, v> in nodal form).
inline FeField penalty_vector(const HviProblem& p, const FeField& u) {
  const auto& mesh = p.mesh();
  const auto& ops = p.ops();
  FeField g = FeField::Zero(u.size());
  if (p.mode == ConstraintMode::Exact) return g;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const Point& x = mesh.nodes[static_cast<std::size_t>(i)];
    if (uses_p0(p.mode)) g[i] += ops.lumped_mass[i] * p.p0->value(x, u[i]);
    if (uses_p2(p.mode) && ops.gamma2_weights[i] > 0.0)
      g[i] += ops.gamma2_weights[i] * p.p2->value(x, u[i] - p.datum.b[i]);
  }
  return g;
}

/// u in K_h: zero on Gamma1, equal to b on Gamma2, nodally nonnegative.
inline bool in_K(const TriMesh& mesh, const DirichletDatum& datum, const FeField& u, double tol = 1e-12) {
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    if (mesh.roles[i] == NodeRole::Gamma1 && std::abs(u[k]) > tol) return false;
    if (mesh.roles[i] == NodeRole::Gamma2 && std::abs(u[k] - datum.b[k]) > tol) return false;
    if (u[k] < -tol) return false;
  }
  return true;
}

/// u in the constraint set of the mode (K_h for exact, K~_h otherwise).
inline bool in_constraint_set(const TriMesh& mesh, const DirichletDatum& datum, ConstraintMode mode,
                              const FeField& u, double tol = 1e-12) {
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    if (mesh.roles[i] == NodeRole::Gamma1 && std::abs(u[k]) > tol) return false;
    if (mesh.roles[i] == NodeRole::Gamma2 && fixes_gamma2(mode) && std::abs(u[k] - datum.b[k]) > tol)
      return false;
    if (has_obstacle(mode) && u[k] < -tol) return false;
  }
  return true;
}

/// Infeasibility of a field with respect to K: L2(D) norm of the negative part
/// and L2(Gamma2) norm of the trace mismatch.
struct FeasibilityGaps {
  double negative_part = 0.0;
  double gamma2_mismatch = 0.0;
};

inline FeasibilityGaps feasibility_gaps(const FeOperators& ops, const DirichletDatum& datum, const FeField& u) {
  const FeField neg = (-u).cwiseMax(0.0);
  return {l2_norm(ops, neg), gamma2_norm(ops, u - datum.b)};
}

} // namespace hvi
