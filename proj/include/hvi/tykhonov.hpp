#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "errors.hpp"
#include "parallel.hpp"
#include "solver.hpp"

namespace hvi {

/// Index theta = (lambda, f) of the penalized family.
struct TykhonovIndex {
  double lambda = 1.0;
  FeField f;
};

enum class SourceRule { Constant, WeakOscillation, StrongPerturb };

inline const char* to_string(SourceRule r) {
  switch (r) {
  case SourceRule::Constant: return "constant";
  case SourceRule::WeakOscillation: return "weak_oscillation";
  case SourceRule::StrongPerturb: return "strong_perturb";
  }
  return "?";
}

/// An index sequence theta_n = (lambda_n, f_n) built around a target source.
///   Constant         f_n = f
///   WeakOscillation  f_n = f + A sin(k_n pi x1 / alpha)
///   StrongPerturb    f_n = f + A 2^(1-n) g
/// In exact mode the lambdas are ignored and only the source moves.
struct ApproxSequenceSpec {
  HviProblem base;                // mesh, datum, law, mode and penalty laws
  FeField target_f;
  std::vector<double> lambdas;    // lambda_n, n = 1..N
  SourceRule rule = SourceRule::Constant;
  std::vector<int> frequencies;   // k_n; defaults to k_n = n
  double amplitude = 1.0;
  std::optional<FeField> perturbation; // g; defaults to 1
  int threads = 1;
};

struct ConvergenceRow {
  int n = 0;
  int frequency = 0;
  double lambda = 0.0;
  double weak_gap = 0.0;   // max over probes of |(f_n - f, w)|
  double strong_gap = 0.0; // |f_n - f|_L2
  double error = 0.0;      // |u_n - u|_V
};

struct ConvergenceRecord {
  bool approximating = true;
  std::string reason; // why the sequence was rejected
  std::vector<ConvergenceRow> rows;
  FeField reference;  // exact-mode solution for target_f
  double floor = 0.0; // two-mesh discretization estimate
  bool monotone_tail = false;
  double final_error = 0.0;
  bool success = false;
};

/// Probe functions certifying weak convergence: FE interpolants of
/// 1, x1, x2, x1^2, x1 x2 on the scaled rectangle.
inline std::vector<FeField> weak_probes(const TriMesh& mesh) {
  const double a = mesh.alpha, b = mesh.beta;
  return {interpolate(mesh, [](const Point&) { return 1.0; }),
          interpolate(mesh, [a](const Point& p) { return p.x / a; }),
          interpolate(mesh, [b](const Point& p) { return p.y / b; }),
          interpolate(mesh, [a](const Point& p) { return (p.x / a) * (p.x / a); }),
          interpolate(mesh, [a, b](const Point& p) { return (p.x / a) * (p.y / b); })};
}

inline double weak_gap(const FeOperators& ops, const std::vector<FeField>& probes, const FeField& d) {
  const FeField md = ops.mass * d;
  double g = 0.0;
  for (const auto& w : probes) g = std::max(g, std::abs(md.dot(w)));
  return g;
}

/// The same problem in exact mode (penalty laws dropped).
inline HviProblem exact_version(HviProblem p) {
  p.mode = ConstraintMode::Exact;
  p.p0.reset();
  p.p2.reset();
  return p;
}

namespace detail {

/// Coarse-to-fine P1 interpolation between nested rectangle meshes.
inline FeField prolong(const TriMesh& coarse, const TriMesh& fine, const FeField& v) {
  if (fine.nx != 2 * coarse.nx || fine.ny != 2 * coarse.ny) throw std::invalid_argument("prolong: meshes are not nested");
  FeField out(static_cast<Eigen::Index>(fine.num_nodes()));
  for (int j = 0; j <= fine.ny; ++j) {
    for (int i = 0; i <= fine.nx; ++i) {
      const int ci = i / 2, cj = j / 2;
      const bool ox = i % 2, oy = j % 2;
      double val;
      if (!ox && !oy) val = v[coarse.node_index(ci, cj)];
      else if (ox && !oy) val = 0.5 * (v[coarse.node_index(ci, cj)] + v[coarse.node_index(ci + 1, cj)]);
      else if (!ox && oy) val = 0.5 * (v[coarse.node_index(ci, cj)] + v[coarse.node_index(ci, cj + 1)]);
      else val = 0.5 * (v[coarse.node_index(ci, cj)] + v[coarse.node_index(ci + 1, cj + 1)]); // cell diagonal
      out[fine.node_index(i, j)] = val;
    }
  }
  return out;
}

/// Fine-to-coarse injection of nodal values.
inline FeField inject(const TriMesh& fine, const TriMesh& coarse, const FeField& v) {
  FeField out(static_cast<Eigen::Index>(coarse.num_nodes()));
  for (int j = 0; j <= coarse.ny; ++j)
    for (int i = 0; i <= coarse.nx; ++i) out[coarse.node_index(i, j)] = v[fine.node_index(2 * i, 2 * j)];
  return out;
}

} // namespace detail

/// Discretization floor |u_h - I u_2h|_V: the exact-mode problem re-solved on
/// the mesh with half the resolution (data injected) and interpolated back.
inline double two_mesh_floor(const HviProblem& p, const SolveOptions& opt = {}) {
  const TriMesh& fine = p.mesh();
  if (fine.nx % 2 || fine.ny % 2) throw std::invalid_argument("two_mesh_floor: mesh resolution must be even");
  HviProblem coarse = exact_version(p);
  coarse.disc = discretize(build_rect_mesh(fine.alpha, fine.beta, fine.nx / 2, fine.ny / 2));
  const TriMesh& cm = coarse.mesh();
  coarse.f = detail::inject(fine, cm, p.f);
  coarse.datum.b = detail::inject(fine, cm, p.datum.b);
  coarse.datum.lifting = detail::inject(fine, cm, p.datum.lifting);
  SolveOptions o = opt;
  o.initial.reset();
  const FeField uh = solve(exact_version(p), o).solution;
  const FeField u2h = solve(coarse, o).solution;
  return v_norm(p.ops(), uh - detail::prolong(cm, fine, u2h));
}

/// Criterion C: returns the reason the index sequence is not approximating,
/// or nothing. Operationally lambda_n -> 0 means positive, strictly decreasing
/// and at least two decades of decay.
inline std::optional<std::string> criterion_violation(const ApproxSequenceSpec& s, int N) {
  if (s.base.mode != ConstraintMode::Exact) {
    if (static_cast<int>(s.lambdas.size()) < N) return "fewer lambdas than sequence terms";
    for (int n = 0; n < N; ++n)
      if (!(s.lambdas[n] > 0.0)) return "lambda_n must be positive";
    for (int n = 1; n < N; ++n)
      if (!(s.lambdas[n] < s.lambdas[n - 1])) return "not an approximating sequence: lambda_n is not strictly decreasing";
    if (!(s.lambdas[N - 1] <= 1e-2 * s.lambdas[0])) return "not an approximating sequence: lambda_n does not tend to zero";
  }
  if (s.rule == SourceRule::WeakOscillation && !s.frequencies.empty()) {
    if (static_cast<int>(s.frequencies.size()) < N) return "fewer frequencies than sequence terms";
    for (int n = 1; n < N; ++n)
      if (!(s.frequencies[n] > s.frequencies[n - 1])) return "not an approximating sequence: frequencies must increase";
  }
  if (!std::isfinite(s.amplitude)) return "amplitude must be finite";
  return std::nullopt;
}

inline FeField sequence_source(const ApproxSequenceSpec& s, int n, int* frequency = nullptr) {
  const TriMesh& mesh = s.base.mesh();
  const int k = s.frequencies.empty() ? n : s.frequencies[static_cast<std::size_t>(n - 1)];
  if (frequency) *frequency = s.rule == SourceRule::WeakOscillation ? k : 0;
  switch (s.rule) {
  case SourceRule::Constant: return s.target_f;
  case SourceRule::WeakOscillation: {
    const double a = mesh.alpha, amp = s.amplitude;
    return s.target_f + interpolate(mesh, [k, a, amp](const Point& p) {
             return amp * std::sin(k * std::numbers::pi * p.x / a);
           });
  }
  case SourceRule::StrongPerturb: {
    const FeField g = s.perturbation ? *s.perturbation : FeField::Ones(s.target_f.size());
    return s.target_f + s.amplitude * std::ldexp(1.0, 1 - n) * g;
  }
  }
  return s.target_f;
}

/// Solve theta_n for n = 1..N and compare with the exact-mode solution for
/// the target source.
inline ConvergenceRecord run_approximating_sequence(const ApproxSequenceSpec& s, int N, const SolveOptions& opt = {}) {
  if (N < 3) throw std::invalid_argument("run_approximating_sequence: N must be at least 3");
  {
    HviProblem probe = s.base;
    probe.f = s.target_f;
    validate(probe);
  }
  ConvergenceRecord rec;
  if (auto why = criterion_violation(s, N)) {
    rec.approximating = false;
    rec.reason = *why;
    return rec;
  }
  const auto& ops = s.base.ops();
  HviProblem target = exact_version(s.base);
  target.f = s.target_f;
  rec.reference = solve(target, opt).solution;
  const auto probes = weak_probes(s.base.mesh());

  rec.rows.resize(static_cast<std::size_t>(N));
  parallel_for(static_cast<std::size_t>(N), s.threads, [&](std::size_t idx) {
    const int n = static_cast<int>(idx) + 1;
    ConvergenceRow row;
    row.n = n;
    HviProblem p = s.base;
    p.f = sequence_source(s, n, &row.frequency);
    if (p.mode != ConstraintMode::Exact) p.lambda = s.lambdas[idx];
    row.lambda = p.mode != ConstraintMode::Exact ? p.lambda : 0.0;
    const FeField d = p.f - s.target_f;
    row.weak_gap = weak_gap(ops, probes, d);
    row.strong_gap = l2_norm(ops, d);
    try {
      row.error = v_norm(ops, solve(p, opt).solution - rec.reference);
    } catch (const NumericError& e) {
      throw NumericError("approximating sequence term n=" + std::to_string(n) + ": " + e.what());
    }
    rec.rows[idx] = row;
  });

  rec.floor = two_mesh_floor(target, opt);
  rec.final_error = rec.rows.back().error;
  rec.monotone_tail = true;
  for (std::size_t k = rec.rows.size() / 2; k < rec.rows.size(); ++k)
    if (k > 0 && rec.rows[k].error > rec.rows[k - 1].error && rec.rows[k].error > 1e-13) rec.monotone_tail = false;
  rec.success = rec.final_error < rec.rows.front().error && rec.final_error <= rec.floor;
  return rec;
}

struct PenaltyCurveRow {
  double lambda = 0.0;
  double error = 0.0; // |u_lambda - u|_V
  double negative_part = 0.0;
  double gamma2_mismatch = 0.0;
  int outer_iters = 0;
};

struct PenaltyCurve {
  std::vector<PenaltyCurveRow> rows;
  FeField reference;
  double floor = 0.0;
  bool decay_ok = true; // last <= first / 100 whenever lambda spans four decades
};

/// Errors e_k decrease strictly while the previous value is above `floor`.
inline bool decreasing_until(const std::vector<double>& e, double floor) {
  for (std::size_t k = 1; k < e.size(); ++k)
    if (e[k - 1] > floor && !(e[k] < e[k - 1])) return false;
  return true;
}

/// Penalized solutions along a lambda schedule compared with the exact-mode
/// solution of the same data.
inline PenaltyCurve penalty_convergence_curve(const HviProblem& p, const std::vector<double>& lambdas,
                                              const SolveOptions& opt = {}, int threads = 1, bool with_floor = true) {
  if (p.mode == ConstraintMode::Exact) throw std::invalid_argument("penalty_convergence_curve: needs a penalty mode");
  if (lambdas.empty()) throw std::invalid_argument("penalty_convergence_curve: empty lambda list");
  validate(p);
  PenaltyCurve curve;
  const HviProblem ref = exact_version(p);
  curve.reference = solve(ref, opt).solution;
  curve.rows.resize(lambdas.size());
  parallel_for(lambdas.size(), threads, [&](std::size_t k) {
    HviProblem q = p;
    q.lambda = lambdas[k];
    const SolveReport rep = solve(q, opt);
    const FeasibilityGaps gaps = feasibility_gaps(p.ops(), p.datum, rep.solution);
    curve.rows[k] = {lambdas[k], v_norm(p.ops(), rep.solution - curve.reference), gaps.negative_part,
                     gaps.gamma2_mismatch, rep.outer_iters};
  });
  if (with_floor) curve.floor = two_mesh_floor(ref, opt);
  const auto [lo, hi] = std::minmax_element(lambdas.begin(), lambdas.end());
  if (*hi >= 1e4 * *lo) curve.decay_ok = curve.rows.back().error <= curve.rows.front().error / 100.0;
  return curve;
}

/// Discrete proxy for u in Omega(theta): u lies within tol (V-norm) of the
/// unique solution at theta.
inline bool membership_check(const HviProblem& base, const TykhonovIndex& theta, const FeField& u, double tol,
                             const SolveOptions& opt = {}) {
  HviProblem p = base;
  p.f = theta.f;
  if (p.mode != ConstraintMode::Exact) p.lambda = theta.lambda;
  if (u.size() != p.f.size()) return false;
  return v_norm(p.ops(), u - solve(p, opt).solution) <= tol;
}

} // namespace hvi
