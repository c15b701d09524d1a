#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"

namespace hvi {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

/// Nodal coefficient vector of a P1 field on a TriMesh. Elements of V vanish
/// at every Gamma1 node.
using FeField = Eigen::VectorXd;

struct FeOperators {
  SpMat stiffness;   // a(u,v) = int grad u . grad v
  SpMat mass;        // L2(D) inner product
  SpMat gamma2_mass; // L2(Gamma2) inner product
  SpMat gamma3_mass; // L2(Gamma3) inner product
  SpMat h1;          // stiffness + mass, the V inner product
  Vec lumped_mass;     // row sums of mass
  Vec gamma2_weights;  // row sums of gamma2_mass
  Vec gamma3_weights;  // row sums of gamma3_mass
  std::vector<int> free_dofs; // nodes not on Gamma1

  std::size_t size() const { return static_cast<std::size_t>(lumped_mass.size()); }
};

namespace detail {

inline Vec row_sums(const SpMat& m) { return m * Vec::Ones(m.cols()); }

/// Principal submatrix m(dofs, dofs).
inline SpMat restrict_matrix(const SpMat& m, const std::vector<int>& dofs) {
  std::vector<int> map(static_cast<std::size_t>(m.rows()), -1);
  for (std::size_t k = 0; k < dofs.size(); ++k) map[dofs[k]] = static_cast<int>(k);
  std::vector<Eigen::Triplet<double>> trips;
  for (int col = 0; col < m.outerSize(); ++col) {
    if (map[col] < 0) continue;
    for (SpMat::InnerIterator it(m, col); it; ++it)
      if (map[it.row()] >= 0) trips.emplace_back(map[it.row()], map[col], it.value());
  }
  SpMat out(static_cast<Eigen::Index>(dofs.size()), static_cast<Eigen::Index>(dofs.size()));
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

inline Vec gather(const Vec& v, const std::vector<int>& dofs) {
  Vec out(static_cast<Eigen::Index>(dofs.size()));
  for (std::size_t k = 0; k < dofs.size(); ++k) out[static_cast<Eigen::Index>(k)] = v[dofs[k]];
  return out;
}

inline Vec scatter(const Vec& v, const std::vector<int>& dofs, Eigen::Index n) {
  Vec out = Vec::Zero(n);
  for (std::size_t k = 0; k < dofs.size(); ++k) out[dofs[k]] = v[static_cast<Eigen::Index>(k)];
  return out;
}

} // namespace detail

/// Assemble the exact P1 stiffness, mass and boundary mass matrices.
inline FeOperators assemble(const TriMesh& mesh) {
  using Trip = Eigen::Triplet<double>;
  const auto n = static_cast<Eigen::Index>(mesh.num_nodes());
  std::vector<Trip> ks, ms, b2, b3;
  ks.reserve(mesh.triangles.size() * 9);
  ms.reserve(mesh.triangles.size() * 9);

  const double domain_area = mesh.alpha * mesh.beta;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double area = mesh.triangle_area(t);
    if (!(area > 1e-14 * domain_area))
      throw AssemblyError("assemble: degenerate triangle " + std::to_string(t) + " (signed area " +
                          std::to_string(area) + ")");
    std::array<double, 3> bx{}, by{};
    for (int a = 0; a < 3; ++a) {
      const Point& p1 = mesh.nodes[tri[(a + 1) % 3]];
      const Point& p2 = mesh.nodes[tri[(a + 2) % 3]];
      // gradient of the barycentric coordinate of vertex a, times 2*area
      bx[a] = p1.y - p2.y;
      by[a] = p2.x - p1.x;
    }
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        ks.emplace_back(tri[a], tri[b], (bx[a] * bx[b] + by[a] * by[b]) / (4.0 * area));
        ms.emplace_back(tri[a], tri[b], area / 12.0 * (a == b ? 2.0 : 1.0));
      }
    }
  }
  for (const auto& e : mesh.boundary_edges) {
    if (e.tag == BoundaryTag::Gamma1) continue;
    auto& target = (e.tag == BoundaryTag::Gamma2) ? b2 : b3;
    const double len = edge_length(mesh, e);
    target.emplace_back(e.n0, e.n0, len / 3.0);
    target.emplace_back(e.n1, e.n1, len / 3.0);
    target.emplace_back(e.n0, e.n1, len / 6.0);
    target.emplace_back(e.n1, e.n0, len / 6.0);
  }

  FeOperators ops;
  ops.stiffness.resize(n, n);
  ops.stiffness.setFromTriplets(ks.begin(), ks.end());
  ops.mass.resize(n, n);
  ops.mass.setFromTriplets(ms.begin(), ms.end());
  ops.gamma2_mass.resize(n, n);
  ops.gamma2_mass.setFromTriplets(b2.begin(), b2.end());
  ops.gamma3_mass.resize(n, n);
  ops.gamma3_mass.setFromTriplets(b3.begin(), b3.end());
  ops.h1 = ops.stiffness + ops.mass;
  ops.lumped_mass = detail::row_sums(ops.mass);
  ops.gamma2_weights = detail::row_sums(ops.gamma2_mass);
  ops.gamma3_weights = detail::row_sums(ops.gamma3_mass);
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i)
    if (mesh.roles[i] != NodeRole::Gamma1) ops.free_dofs.push_back(static_cast<int>(i));
  return ops;
}

inline double quad_form(const SpMat& m, const Vec& v) { return v.dot(m * v); }

/// H1(D) norm sqrt(v^T (S+M) v).
inline double v_norm(const FeOperators& ops, const FeField& v) {
  return std::sqrt(std::max(0.0, quad_form(ops.h1, v)));
}
inline double l2_norm(const FeOperators& ops, const FeField& v) {
  return std::sqrt(std::max(0.0, quad_form(ops.mass, v)));
}
inline double gamma2_norm(const FeOperators& ops, const FeField& v) {
  return std::sqrt(std::max(0.0, quad_form(ops.gamma2_mass, v)));
}
inline double gamma3_norm(const FeOperators& ops, const FeField& v) {
  return std::sqrt(std::max(0.0, quad_form(ops.gamma3_mass, v)));
}

struct DiscreteConstants {
  double c0 = 0.0; // ||v||_V <= c0 ||grad v||
  double c3 = 0.0; // ||v||_{L2(Gamma3)} <= c3 ||v||_V
  FeField c0_mode; // maximizers, zero on Gamma1
  FeField c3_mode;
  int c0_iterations = 0;
  int c3_iterations = 0;
};

namespace detail {

/// Largest eigenvalue of A x = lambda B x for symmetric A >= 0 and B > 0 by
/// power iteration on B^{-1} A. Stops when the relative eigen-residual
/// ||A x - lambda B x|| / ||A x|| drops below tol.
inline double largest_generalized_eig(const SpMat& a, const SpMat& b, Vec& x, int& iterations,
                                      double tol, int max_iter, const char* what) {
  Eigen::SimplicialLDLT<SpMat> chol(b);
  if (chol.info() != Eigen::Success)
    throw NumericError(std::string(what) + ": factorization of the right-hand matrix failed");
  x = Vec::Ones(a.rows());
  x /= std::sqrt(x.dot(b * x));
  double lambda = 0.0;
  for (iterations = 1; iterations <= max_iter; ++iterations) {
    Vec ax = a * x;
    lambda = x.dot(ax); // x is B-normalized
    const double res = (ax - lambda * (b * x)).norm() / std::max(ax.norm(), 1e-300);
    if (res <= tol) return lambda;
    x = chol.solve(ax);
    const double nrm = std::sqrt(x.dot(b * x));
    if (!(nrm > 0.0) || !std::isfinite(nrm))
      throw NumericError(std::string(what) + ": power iteration collapsed");
    x /= nrm;
  }
  throw NumericError(std::string(what) + ": power iteration did not converge after " +
                     std::to_string(max_iter) + " iterations");
}

} // namespace detail

/// Sharp discrete Friedrichs-Poincare and trace constants on V_h, from the
/// largest eigenvalues of (S+M)v = l S v and B3 v = l (S+M) v over free dofs.
inline DiscreteConstants discrete_constants(const FeOperators& ops, double tol = 1e-10,
                                            int max_iter = 200000) {
  if (ops.free_dofs.empty()) throw NumericError("discrete_constants: no free degrees of freedom");
  const SpMat s = detail::restrict_matrix(ops.stiffness, ops.free_dofs);
  const SpMat h = detail::restrict_matrix(ops.h1, ops.free_dofs);
  const SpMat b3 = detail::restrict_matrix(ops.gamma3_mass, ops.free_dofs);
  const auto n = static_cast<Eigen::Index>(ops.size());

  DiscreteConstants out;
  Vec x;
  const double l0 = detail::largest_generalized_eig(h, s, x, out.c0_iterations, tol, max_iter, "c0");
  out.c0 = std::sqrt(l0);
  out.c0_mode = detail::scatter(x, ops.free_dofs, n);
  const double l3 = detail::largest_generalized_eig(b3, h, x, out.c3_iterations, tol, max_iter, "c3");
  out.c3 = std::sqrt(l3);
  out.c3_mode = detail::scatter(x, ops.free_dofs, n);
  return out;
}

/// Nodal interpolation of a function on the mesh.
inline FeField interpolate(const TriMesh& mesh, const std::function<double(const Point&)>& fn) {
  FeField out(static_cast<Eigen::Index>(mesh.num_nodes()));
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) out[static_cast<Eigen::Index>(i)] = fn(mesh.nodes[i]);
  return out;
}

struct ErrorNorms {
  double l2 = 0.0;
  double h1_semi = 0.0;
  double h1 = 0.0;
};

/// L2 and H1 errors of a P1 field against an exact solution, integrated with
/// a degree-4 six-point rule on each triangle.
inline ErrorNorms error_norms(const TriMesh& mesh, const FeField& uh,
                              const std::function<double(const Point&)>& exact,
                              const std::function<Point(const Point&)>& exact_grad) {
  static constexpr std::array<std::array<double, 3>, 6> bary = {{
      {0.445948490915965, 0.445948490915965, 0.108103018168070},
      {0.445948490915965, 0.108103018168070, 0.445948490915965},
      {0.108103018168070, 0.445948490915965, 0.445948490915965},
      {0.091576213509771, 0.091576213509771, 0.816847572980459},
      {0.091576213509771, 0.816847572980459, 0.091576213509771},
      {0.816847572980459, 0.091576213509771, 0.091576213509771},
  }};
  static constexpr std::array<double, 6> weight = {0.223381589678011, 0.223381589678011,
                                                   0.223381589678011, 0.109951743655322,
                                                   0.109951743655322, 0.109951743655322};
  double e0 = 0.0, e1 = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double area = mesh.triangle_area(t);
    double gx = 0.0, gy = 0.0;
    for (int a = 0; a < 3; ++a) {
      const Point& p1 = mesh.nodes[tri[(a + 1) % 3]];
      const Point& p2 = mesh.nodes[tri[(a + 2) % 3]];
      gx += uh[tri[a]] * (p1.y - p2.y) / (2.0 * area);
      gy += uh[tri[a]] * (p2.x - p1.x) / (2.0 * area);
    }
    for (std::size_t q = 0; q < weight.size(); ++q) {
      Point p;
      double val = 0.0;
      for (int a = 0; a < 3; ++a) {
        p.x += bary[q][a] * mesh.nodes[tri[a]].x;
        p.y += bary[q][a] * mesh.nodes[tri[a]].y;
        val += bary[q][a] * uh[tri[a]];
      }
      const double d = exact(p) - val;
      const Point g = exact_grad(p);
      e0 += weight[q] * area * d * d;
      e1 += weight[q] * area * ((g.x - gx) * (g.x - gx) + (g.y - gy) * (g.y - gy));
    }
  }
  return {std::sqrt(e0), std::sqrt(e1), std::sqrt(e0 + e1)};
}

} // namespace hvi
