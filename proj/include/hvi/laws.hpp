#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "fem.hpp"
#include "geometry.hpp"

namespace hvi {

/// Boundary potential j_nu on Gamma3 together with its Clarke calculus.
///
/// `subgrad` is a deterministic selection xi in the Clarke gradient, and
/// `slope` a selection of the generalized derivative of r -> subgrad(x, r)
/// (used by Newton-type inner solvers). `alpha_jnu` is a constant such that
/// r -> subgrad(x, r) + alpha_jnu * r is nondecreasing, which is the relaxed
/// monotonicity bound j0(r1; r2-r1) + j0(r2; r1-r2) <= alpha_jnu |r1-r2|^2.
struct BoundaryLaw {
  std::string name;
  std::function<double(const Point&, double)> value;
  std::function<double(const Point&, double, double)> dir_deriv;
  std::function<double(const Point&, double)> subgrad;
  std::function<double(const Point&, double)> slope;
  double c_bar0 = 0.0;
  double c_bar1 = 0.0;
  double alpha_jnu = 0.0;
  bool affine = false; // subgrad is affine in r
};

inline BoundaryLaw law_zero() {
  BoundaryLaw law;
  law.name = "zero";
  law.value = [](const Point&, double) { return 0.0; };
  law.dir_deriv = [](const Point&, double, double) { return 0.0; };
  law.subgrad = [](const Point&, double) { return 0.0; };
  law.slope = [](const Point&, double) { return 0.0; };
  law.affine = true;
  return law;
}

/// Convex Robin-type law j(r) = q0 r + k r^2 / 2; k = 0 is a prescribed flux.
inline BoundaryLaw law_linear(double q0, double k) {
  if (!(k >= 0.0)) throw std::invalid_argument("law_linear: k must be nonnegative");
  BoundaryLaw law;
  law.name = "linear";
  law.value = [q0, k](const Point&, double r) { return q0 * r + 0.5 * k * r * r; };
  law.dir_deriv = [q0, k](const Point&, double r, double s) { return (q0 + k * r) * s; };
  law.subgrad = [q0, k](const Point&, double r) { return q0 + k * r; };
  law.slope = [k](const Point&, double) { return k; };
  law.c_bar0 = std::abs(q0);
  law.c_bar1 = k;
  law.affine = true;
  return law;
}

/// Prescribed, spatially varying flux q(x): j(x, r) = q(x) r.
inline BoundaryLaw law_flux(std::function<double(const Point&)> q, double q_bound) {
  BoundaryLaw law;
  law.name = "flux";
  law.value = [q](const Point& x, double r) { return q(x) * r; };
  law.dir_deriv = [q](const Point& x, double, double s) { return q(x) * s; };
  law.subgrad = [q](const Point& x, double) { return q(x); };
  law.slope = [](const Point&, double) { return 0.0; };
  law.c_bar0 = q_bound;
  law.affine = true;
  return law;
}

/// Potential whose derivative is piecewise linear in r, with finitely many
/// knots and possible jumps. On piece k (between knots[k-1] and knots[k]) the
/// derivative is offset[k] + rate[k] * r. The value is normalised to j(0) = 0.
class PiecewiseLinearDerivative {
public:
  PiecewiseLinearDerivative(std::vector<double> knots, std::vector<double> offset,
                            std::vector<double> rate)
      : knots_(std::move(knots)), offset_(std::move(offset)), rate_(std::move(rate)) {
    if (offset_.size() != knots_.size() + 1 || rate_.size() != offset_.size())
      throw std::invalid_argument("PiecewiseLinearDerivative: need one more piece than knots");
    if (!std::is_sorted(knots_.begin(), knots_.end()) ||
        std::adjacent_find(knots_.begin(), knots_.end()) != knots_.end())
      throw std::invalid_argument("PiecewiseLinearDerivative: knots must be strictly increasing");
  }

  double left(double r) const {
    const std::size_t k = std::lower_bound(knots_.begin(), knots_.end(), r) - knots_.begin();
    return offset_[k] + rate_[k] * r;
  }
  double right(double r) const {
    const std::size_t k = std::upper_bound(knots_.begin(), knots_.end(), r) - knots_.begin();
    return offset_[k] + rate_[k] * r;
  }
  double right_rate(double r) const {
    const std::size_t k = std::upper_bound(knots_.begin(), knots_.end(), r) - knots_.begin();
    return rate_[k];
  }

  /// Clarke derivative of a continuous piecewise-C1 function: the larger of the
  /// two one-sided slopes applied to s.
  double clarke(double r, double s) const { return std::max(left(r) * s, right(r) * s); }

  /// Midpoint of the Clarke interval [min one-sided, max one-sided].
  double midpoint(double r) const { return 0.5 * (left(r) + right(r)); }

  double value(double r) const { return integral(0.0, r); }

  /// Largest decrease rate over the linear pieces. A downward jump would make
  /// the relaxed monotonicity constant infinite, so callers must not build one.
  double max_decrease_rate() const {
    double out = 0.0;
    for (double q : rate_) out = std::max(out, -q);
    return out;
  }

private:
  double integral(double a, double b) const {
    if (b < a) return -integral(b, a);
    double acc = 0.0;
    double lo = a;
    while (lo < b) {
      const std::size_t k = std::upper_bound(knots_.begin(), knots_.end(), lo) - knots_.begin();
      const double hi = (k < knots_.size()) ? std::min(b, knots_[k]) : b;
      acc += offset_[k] * (hi - lo) + 0.5 * rate_[k] * (hi * hi - lo * lo);
      lo = hi;
    }
    return acc;
  }

  std::vector<double> knots_;
  std::vector<double> offset_;
  std::vector<double> rate_;
};

/// Nonmonotone heat-exchange law. Its derivative rises like a*r up to r0,
/// drops with rate slope_drop on [r0, 2 r0] and stays constant afterwards.
inline BoundaryLaw law_nonmonotone(double a, double r0, double slope_drop) {
  if (!(a > 0.0) || !(r0 > 0.0) || !(slope_drop > 0.0))
    throw std::invalid_argument("law_nonmonotone: a, r0 and slope_drop must be positive");
  const double peak = a * r0;
  const double floor_value = peak - slope_drop * r0;
  const PiecewiseLinearDerivative beta({r0, 2.0 * r0},
                                       {0.0, peak + slope_drop * r0, floor_value},
                                       {a, -slope_drop, 0.0});
  BoundaryLaw law;
  law.name = "nonmonotone";
  law.value = [beta](const Point&, double r) { return beta.value(r); };
  law.dir_deriv = [beta](const Point&, double r, double s) { return beta.clarke(r, s); };
  law.subgrad = [beta](const Point&, double r) { return beta.midpoint(r); };
  law.slope = [beta](const Point&, double r) { return beta.right_rate(r); };
  law.c_bar0 = std::max(peak, std::abs(floor_value));
  law.c_bar1 = a;
  law.alpha_jnu = beta.max_decrease_rate();
  return law;
}

enum class PenaltyKind { DomainNonneg, BoundaryEq };

/// Lipschitz, monotone penalty function p(x, r) with an exact zero set.
struct PenaltyLaw {
  PenaltyKind kind = PenaltyKind::DomainNonneg;
  double lipschitz = 1.0;
  std::function<double(const Point&, double)> value;
  std::function<double(const Point&, double)> slope;

  bool vanishes_at(double r) const {
    return kind == PenaltyKind::DomainNonneg ? r >= 0.0 : r == 0.0;
  }
};

/// p0(x, r) = -c r^- with r^- = max(-r, 0).
inline PenaltyLaw penalty_p0(double c) {
  if (!(c > 0.0)) throw std::invalid_argument("penalty_p0: c must be positive");
  PenaltyLaw p;
  p.kind = PenaltyKind::DomainNonneg;
  p.lipschitz = c;
  p.value = [c](const Point&, double r) { return -c * std::max(-r, 0.0); };
  p.slope = [c](const Point&, double r) { return r < 0.0 ? c : 0.0; };
  return p;
}

/// p2(x, r) = c r.
inline PenaltyLaw penalty_p2(double c) {
  if (!(c > 0.0)) throw std::invalid_argument("penalty_p2: c must be positive");
  PenaltyLaw p;
  p.kind = PenaltyKind::BoundaryEq;
  p.lipschitz = c;
  p.value = [c](const Point&, double r) { return c * r; };
  p.slope = [c](const Point&, double) { return c; };
  return p;
}

/// Dirichlet datum b on Gamma2 with a nonnegative lifting u_b in V.
struct DirichletDatum {
  FeField b;       // values at Gamma2 nodes, zero elsewhere
  FeField lifting; // u_b: >= 0, = b on Gamma2, = 0 on Gamma1
};

/// Lifting u_b(x1, x2) = (x1 / alpha) * phi_h(x2), where phi_h interpolates the
/// given trace values on the rows of the mesh (one value per Gamma2 node,
/// bottom to top).
inline DirichletDatum dirichlet_from_trace(const TriMesh& mesh, const std::vector<double>& row_values) {
  if (row_values.size() != static_cast<std::size_t>(mesh.ny + 1))
    throw std::invalid_argument("dirichlet_from_trace: need one value per mesh row");
  for (std::size_t j = 0; j < row_values.size(); ++j)
    if (!(row_values[j] >= 0.0) || !std::isfinite(row_values[j]))
      throw std::invalid_argument("dirichlet datum: negative or non-finite trace value at row " +
                                  std::to_string(j));
  const auto n = static_cast<Eigen::Index>(mesh.num_nodes());
  DirichletDatum d{FeField::Zero(n), FeField::Zero(n)};
  for (int j = 0; j <= mesh.ny; ++j) {
    for (int i = 0; i <= mesh.nx; ++i) {
      const int node = mesh.node_index(i, j);
      d.lifting[node] = (i == mesh.nx) ? row_values[j] : mesh.nodes[node].x / mesh.alpha * row_values[j];
    }
    d.b[mesh.node_index(mesh.nx, j)] = row_values[j];
  }
  return d;
}

inline DirichletDatum dirichlet_example(const std::function<double(double)>& phi, const TriMesh& mesh) {
  std::vector<double> rows(static_cast<std::size_t>(mesh.ny + 1));
  for (int j = 0; j <= mesh.ny; ++j) rows[j] = phi(mesh.nodes[mesh.node_index(0, j)].y);
  return dirichlet_from_trace(mesh, rows);
}

} // namespace hvi
