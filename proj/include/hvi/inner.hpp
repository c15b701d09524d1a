#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "errors.hpp"
#include "problem.hpp"

namespace hvi {

struct InnerOptions {
  double omega = 1.3;        // PSOR over-relaxation
  double tol = 1e-12;        // nodal displacement tolerance, relative to max(1, |u|_inf)
  int psor_presweeps = 25;   // sweeps before the Newton polish (obstacle modes)
  int max_sweeps = 400000;   // PSOR budget when it runs to convergence
  int max_newton = 60;
  bool use_newton = true;    // false: plain PSOR (obstacle modes) to tolerance
};

struct InnerStats {
  long sweeps = 0;
  long newton_iterations = 0;
  long nodal_newton_steps = 0;
  int psor_fallbacks = 0;
  int solves = 0;
};

/// One convex subproblem of the outer fixed-point loop:
///
///   find u in the mode's constraint set with
///   a(u, v-u) + (1/lambda) <G u, v-u> + sum_i w_i gamma_i(u_i) (v_i-u_i)
///        >= (f, v-u) + sum_i w_i alpha u_prev_i (v_i-u_i)
///
/// where gamma(r) = xi(r) + alpha r is the monotone part of the boundary
/// subgradient and alpha = alpha_jnu. With u = u_prev this is the discrete
/// hemivariational inequality with xi = subgrad(u).
class ConvexStep {
public:
  ConvexStep(const HviProblem& p, const DofLayout& layout)
      : p_(p), lay_(layout), s_(p.ops().stiffness), alpha_(p.law.alpha_jnu) {
    load_ = p.ops().mass * p.f;
    uprev_ = FeField::Zero(p.f.size());
    inv_lambda_ = (p.mode == ConstraintMode::Exact) ? 0.0 : 1.0 / p.lambda;
    diag_.resize(p.f.size());
    for (Eigen::Index i = 0; i < p.f.size(); ++i) diag_[i] = s_.coeff(i, i);
  }

  void set_previous(const FeField& uprev) { uprev_ = uprev; }

  /// Gradient of the subproblem energy at u (meaningful at unknown nodes).
  FeField gradient(const FeField& u) const {
    FeField g = s_ * u - load_;
    for (int i : lay_.unknowns) g[i] += nonlinear_force(i, u[i]);
    return g;
  }

  /// Generalized second derivative of the nonlinear nodal terms at u_i.
  double nonlinear_curvature(int i, double v) const {
    const auto& ops = p_.ops();
    const Point& x = p_.mesh().nodes[static_cast<std::size_t>(i)];
    double d = 0.0;
    if (ops.gamma3_weights[i] > 0.0) d += ops.gamma3_weights[i] * (p_.law.slope(x, v) + alpha_);
    if (uses_p0(p_.mode)) d += inv_lambda_ * ops.lumped_mass[i] * p_.p0->slope(x, v);
    if (uses_p2(p_.mode) && ops.gamma2_weights[i] > 0.0)
      d += inv_lambda_ * ops.gamma2_weights[i] * p_.p2->slope(x, v - p_.datum.b[i]);
    return d;
  }

  /// Solve the subproblem in place; u must hold the fixed values at
  /// non-unknown nodes on entry.
  void solve(FeField& u, const InnerOptions& opt, InnerStats& stats) {
    ++stats.solves;
    for (int i : lay_.unknowns)
      if (lay_.bounded[i]) u[i] = std::max(u[i], 0.0);
    if (!opt.use_newton) {
      if (!psor(u, opt, opt.max_sweeps, stats))
        throw NumericError("inner PSOR did not reach tolerance in " + std::to_string(opt.max_sweeps) + " sweeps");
      return;
    }
    if (has_obstacle(p_.mode)) psor(u, opt, opt.psor_presweeps, stats);
    if (newton(u, opt, stats)) return;
    ++stats.psor_fallbacks;
    if (!psor(u, opt, opt.max_sweeps, stats))
      throw NumericError("inner solve failed: Newton did not settle and PSOR did not reach tolerance");
  }

private:
  double nonlinear_force(int i, double v) const {
    const auto& ops = p_.ops();
    const Point& x = p_.mesh().nodes[static_cast<std::size_t>(i)];
    double g = 0.0;
    if (ops.gamma3_weights[i] > 0.0)
      g += ops.gamma3_weights[i] * (p_.law.subgrad(x, v) + alpha_ * (v - uprev_[i]));
    if (uses_p0(p_.mode)) g += inv_lambda_ * ops.lumped_mass[i] * p_.p0->value(x, v);
    if (uses_p2(p_.mode) && ops.gamma2_weights[i] > 0.0)
      g += inv_lambda_ * ops.gamma2_weights[i] * p_.p2->value(x, v - p_.datum.b[i]);
    return g;
  }

  double row_dot(int i, const FeField& u) const {
    double acc = 0.0;
    for (SpMat::InnerIterator it(s_, i); it; ++it) acc += it.value() * u[it.row()];
    return acc;
  }

  /// Root of the strictly increasing nodal map
  /// h(v) = S_ii v + offdiag - F_i + nonlinear_force(i, v).
  double nodal_root(int i, double offdiag, double v, InnerStats& stats) const {
    const double sii = diag_[i];
    const double base = offdiag - load_[i];
    auto h = [&](double t) { return sii * t + base + nonlinear_force(i, t); };
    double hv = h(v);
    if (hv == 0.0) return v;
    double lo = v, hi = v;
    double step = std::max(1.0, std::abs(v));
    if (hv > 0.0) {
      for (lo = v - step; h(lo) > 0.0; lo = v - step) step *= 2.0;
    } else {
      for (hi = v + step; h(hi) < 0.0; hi = v + step) step *= 2.0;
    }
    for (int it = 0; it < 200; ++it) {
      ++stats.nodal_newton_steps;
      const double dh = sii + nonlinear_curvature(i, v);
      double next = v - hv / dh;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      v = next;
      hv = h(v);
      if (hv == 0.0) return v;
      (hv > 0.0 ? hi : lo) = v;
      if (hi - lo <= 4e-16 * std::max(1.0, std::abs(v))) return v;
      if (std::abs(hv) <= 1e-15 * (std::abs(base) + sii * std::abs(v) + 1.0)) return v;
    }
    return v;
  }

  /// Projected SOR sweeps; returns true once a sweep moves no node by more
  /// than the tolerance.
  bool psor(FeField& u, const InnerOptions& opt, long max_sweeps, InnerStats& stats) const {
    for (long sweep = 0; sweep < max_sweeps; ++sweep) {
      ++stats.sweeps;
      double scale = 1.0, change = 0.0;
      for (int i : lay_.unknowns) {
        const double offdiag = row_dot(i, u) - diag_[i] * u[i];
        double target = nodal_root(i, offdiag, u[i], stats);
        double next = u[i] + opt.omega * (target - u[i]);
        if (lay_.bounded[i]) next = std::max(next, 0.0);
        change = std::max(change, std::abs(next - u[i]));
        u[i] = next;
        scale = std::max(scale, std::abs(next));
      }
      if (change <= opt.tol * scale) return true;
    }
    return false;
  }

  /// Scaled natural residual: min(u_i, g_i/D_i) at bounded nodes, g_i/D_i elsewhere.
  double natural_residual(const FeField& u, const FeField& g) const {
    double r = 0.0;
    for (int i : lay_.unknowns) {
      const double d = diag_[i] + nonlinear_curvature(i, u[i]);
      const double gi = g[i] / d;
      r = std::max(r, std::abs(lay_.bounded[i] ? std::min(u[i], gi) : gi));
    }
    return r;
  }

  /// Semismooth Newton (primal-dual active set at bounded nodes). Returns
  /// false when it fails to converge; u then holds the best iterate seen.
  bool newton(FeField& u, const InnerOptions& opt, InnerStats& stats) const {
    const auto n = static_cast<std::size_t>(u.size());
    FeField best = u;
    double best_res = std::numeric_limits<double>::infinity();
    std::vector<int> local(n, -1);
    std::vector<Eigen::Triplet<double>> trips;
    for (int it = 0; it <= opt.max_newton; ++it) {
      const FeField g = gradient(u);
      const double res = natural_residual(u, g);
      const double scale = std::max(1.0, u.lpNorm<Eigen::Infinity>());
      if (res < best_res) {
        best_res = res;
        best = u;
      }
      if (res <= opt.tol * scale) return true;
      if (it == opt.max_newton) break;
      ++stats.newton_iterations;

      std::vector<int> inactive;
      std::vector<double> curvature(n, 0.0);
      for (int i : lay_.unknowns) {
        curvature[i] = nonlinear_curvature(i, u[i]);
        const double d = diag_[i] + curvature[i];
        if (lay_.bounded[i] && u[i] <= g[i] / d) {
          local[i] = -2; // active: u_i = 0
        } else {
          local[i] = static_cast<int>(inactive.size());
          inactive.push_back(i);
        }
      }
      FeField next = u;
      for (int i : lay_.unknowns)
        if (local[i] == -2) next[i] = 0.0;
      if (!inactive.empty()) {
        trips.clear();
        Vec rhs(static_cast<Eigen::Index>(inactive.size()));
        for (std::size_t k = 0; k < inactive.size(); ++k) {
          const int i = inactive[k];
          double r = -g[i];
          for (SpMat::InnerIterator e(s_, i); e; ++e) {
            const int j = static_cast<int>(e.row());
            if (local[j] >= 0)
              trips.emplace_back(local[j], static_cast<int>(k), e.value());
            else if (local[j] == -2)
              r += e.value() * u[j]; // step -u_j on active nodes
          }
          trips.emplace_back(static_cast<int>(k), static_cast<int>(k), curvature[i]);
          rhs[static_cast<Eigen::Index>(k)] = r;
        }
        SpMat jac(rhs.size(), rhs.size());
        jac.setFromTriplets(trips.begin(), trips.end());
        Eigen::SimplicialLDLT<SpMat> ldlt(jac);
        if (ldlt.info() != Eigen::Success) break;
        const Vec delta = ldlt.solve(rhs);
        if (!delta.allFinite()) break;
        for (std::size_t k = 0; k < inactive.size(); ++k)
          next[inactive[k]] += delta[static_cast<Eigen::Index>(k)];
      }
      for (int i : lay_.unknowns) local[i] = -1;
      u = next;
    }
    u = best;
    return false;
  }

  const HviProblem& p_;
  const DofLayout& lay_;
  const SpMat& s_;
  double alpha_;
  double inv_lambda_ = 0.0;
  FeField load_;
  FeField uprev_;
  Vec diag_;
};

} // namespace hvi
