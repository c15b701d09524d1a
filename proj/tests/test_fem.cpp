#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>

#include "hvi/fem.hpp"
#include "hvi/rng.hpp"

using namespace hvi;

namespace {

Eigen::MatrixXd dense_restricted(const SpMat& m, const std::vector<int>& dofs) {
  return Eigen::MatrixXd(detail::restrict_matrix(m, dofs));
}

double max_asymmetry(const SpMat& m) {
  const Eigen::MatrixXd d(m);
  return (d - d.transpose()).cwiseAbs().maxCoeff();
}

} // namespace

TEST(Fem, ConstantsInStiffnessKernel) {
  const TriMesh mesh = build_rect_mesh(1, 1, 1, 1);
  const FeOperators ops = assemble(mesh);
  const Vec rows = ops.stiffness * Vec::Ones(4);
  EXPECT_LT(rows.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Fem, ClosedFormQuadraticForms) {
  for (int n : {1, 3, 8}) {
    const TriMesh mesh = build_rect_mesh(1, 1, n, n);
    const FeOperators ops = assemble(mesh);
    const FeField x = interpolate(mesh, [](const Point& p) { return p.x; });
    const FeField xy = interpolate(mesh, [](const Point& p) { return p.x + p.y; });
    const FeField one = FeField::Ones(x.size());
    EXPECT_NEAR(quad_form(ops.stiffness, x), 1.0, 1e-12);
    EXPECT_NEAR(quad_form(ops.mass, x), 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(quad_form(ops.mass, xy), 7.0 / 6.0, 1e-12);
    EXPECT_NEAR(quad_form(ops.gamma3_mass, one), 2.0, 1e-12);
    EXPECT_NEAR(quad_form(ops.gamma2_mass, one), 1.0, 1e-12);
    EXPECT_NEAR(ops.gamma3_weights.sum(), 2.0, 1e-12);
    EXPECT_NEAR(ops.lumped_mass.sum(), 1.0, 1e-12);
    // trace of x on Gamma3 (top + bottom): 2 * int_0^1 x^2 = 2/3
    EXPECT_NEAR(quad_form(ops.gamma3_mass, x), 2.0 / 3.0, 1e-12);
  }
}

TEST(Fem, VNorm) {
  const TriMesh mesh = build_rect_mesh(1, 1, 6, 6);
  const FeOperators ops = assemble(mesh);
  const auto n = static_cast<Eigen::Index>(mesh.num_nodes());
  EXPECT_EQ(v_norm(ops, FeField::Zero(n)), 0.0);
  EXPECT_NEAR(v_norm(ops, FeField::Ones(n)), 1.0, 1e-12);
  const FeField x = interpolate(mesh, [](const Point& p) { return p.x; });
  EXPECT_NEAR(v_norm(ops, x), std::sqrt(1.0 + 1.0 / 3.0), 1e-12);
}

TEST(Fem, OperatorsSymmetricPositiveSemidefinite) {
  const TriMesh mesh = build_rect_mesh(2.0, 1.0, 5, 4);
  const FeOperators ops = assemble(mesh);
  for (const SpMat* m : {&ops.stiffness, &ops.mass, &ops.gamma2_mass, &ops.gamma3_mass}) {
    EXPECT_LT(max_asymmetry(*m), 1e-15);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(*m)};
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-13);
  }
  // stiffness on free dofs with Gamma2 eliminated is positive definite
  std::vector<int> interior;
  for (int i : ops.free_dofs)
    if (mesh.roles[i] != NodeRole::Gamma2) interior.push_back(i);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{dense_restricted(ops.stiffness, interior)};
  EXPECT_GT(es.eigenvalues().minCoeff(), 1e-6);
}

TEST(Fem, MassIsExactForPiecewiseLinears) {
  // Random P1 field: v^T M v against the element-wise exact integral of the
  // square of a linear function, (area/6) * (sum of squares + sum of products).
  const TriMesh mesh = build_rect_mesh(1.3, 0.7, 5, 3);
  const FeOperators ops = assemble(mesh);
  CounterRng rng(7);
  FeField v(static_cast<Eigen::Index>(mesh.num_nodes()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(-1, 1);
  double exact = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double a = v[tri[0]], b = v[tri[1]], c = v[tri[2]];
    exact += mesh.triangle_area(t) / 6.0 * (a * a + b * b + c * c + a * b + b * c + a * c);
  }
  EXPECT_NEAR(quad_form(ops.mass, v), exact, 1e-12);
}

TEST(Fem, DegenerateTriangleIsReported) {
  TriMesh mesh = build_rect_mesh(1, 1, 2, 2);
  mesh.nodes[mesh.node_index(1, 1)] = mesh.nodes[mesh.node_index(0, 0)];
  try {
    assemble(mesh);
    FAIL() << "expected AssemblyError";
  } catch (const AssemblyError& e) {
    EXPECT_NE(std::string(e.what()).find("triangle"), std::string::npos);
  }
}

TEST(Fem, DiscreteConstantsMatchDenseEigensolver) {
  const TriMesh mesh = build_rect_mesh(1, 1, 8, 8);
  const FeOperators ops = assemble(mesh);
  const DiscreteConstants c = discrete_constants(ops);

  const Eigen::MatrixXd s = dense_restricted(ops.stiffness, ops.free_dofs);
  const Eigen::MatrixXd h = dense_restricted(ops.h1, ops.free_dofs);
  const Eigen::MatrixXd b3 = dense_restricted(ops.gamma3_mass, ops.free_dofs);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> e0(h, s);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> e3(b3, h);
  const double c0_ref = std::sqrt(e0.eigenvalues().maxCoeff());
  const double c3_ref = std::sqrt(e3.eigenvalues().maxCoeff());
  EXPECT_NEAR(c.c0, c0_ref, 1e-6);
  EXPECT_NEAR(c.c3, c3_ref, 1e-6);
  EXPECT_GT(c.c0, 1.0);
  EXPECT_GT(c.c3, 0.0);
  EXPECT_TRUE(std::isfinite(c.c0) && std::isfinite(c.c3));
}

TEST(Fem, ConstantsAreAttainedAndBoundRandomFields) {
  const TriMesh mesh = build_rect_mesh(1, 1, 8, 8);
  const FeOperators ops = assemble(mesh);
  const DiscreteConstants c = discrete_constants(ops);
  auto grad_norm = [&](const FeField& v) { return std::sqrt(quad_form(ops.stiffness, v)); };

  EXPECT_NEAR(v_norm(ops, c.c0_mode) / grad_norm(c.c0_mode), c.c0, 1e-6);
  EXPECT_NEAR(gamma3_norm(ops, c.c3_mode) / v_norm(ops, c.c3_mode), c.c3, 1e-6);

  CounterRng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    FeField v = FeField::Zero(static_cast<Eigen::Index>(mesh.num_nodes()));
    for (int i : ops.free_dofs) v[i] = rng.normal();
    EXPECT_LE(v_norm(ops, v), c.c0 * grad_norm(v) * (1 + 1e-12));
    EXPECT_LE(gamma3_norm(ops, v), c.c3 * v_norm(ops, v) * (1 + 1e-12));
  }
}

TEST(Fem, ConstantsGrowMonotonicallyUnderRefinement) {
  std::vector<double> c0, c3;
  for (int n : {4, 8, 16}) {
    const DiscreteConstants c = discrete_constants(assemble(build_rect_mesh(1, 1, n, n)));
    c0.push_back(c.c0);
    c3.push_back(c.c3);
  }
  EXPECT_LE(c0[0], c0[1] + 1e-12);
  EXPECT_LE(c0[1], c0[2] + 1e-12);
  EXPECT_LE(c3[0], c3[1] + 1e-12);
  EXPECT_LE(c3[1], c3[2] + 1e-12);
  EXPECT_LT(c0[2] - c0[1], c0[1] - c0[0]);
  // continuous value: c0^2 = 1 + 1/lambda_1 with lambda_1 = (pi/2)^2 for the
  // Dirichlet-left / Neumann-elsewhere Laplacian on the unit square
  const double c0_exact = std::sqrt(1.0 + 4.0 / (std::numbers::pi * std::numbers::pi));
  EXPECT_LT(c0[2], c0_exact + 1e-12);
  EXPECT_NEAR(c0[2], c0_exact, 2e-3);
}

TEST(Fem, GalerkinConvergenceMixedBoundaryLaplace) {
  // u*(x) = x1 sin(pi x2): zero on Gamma1, b = sin(pi x2) on Gamma2,
  // -du/dn = pi x1 on Gamma3, f = pi^2 x1 sin(pi x2).
  const double pi = std::numbers::pi;
  auto exact = [pi](const Point& p) { return p.x * std::sin(pi * p.y); };
  auto grad = [pi](const Point& p) { return Point{std::sin(pi * p.y), pi * p.x * std::cos(pi * p.y)}; };
  std::vector<ErrorNorms> errs;
  for (int n : {8, 16, 32}) {
    const TriMesh mesh = build_rect_mesh(1, 1, n, n);
    const FeOperators ops = assemble(mesh);
    const FeField f = interpolate(mesh, [pi](const Point& p) { return pi * pi * p.x * std::sin(pi * p.y); });
    const FeField q = interpolate(mesh, [pi](const Point& p) { return pi * p.x; });
    FeField u = FeField::Zero(f.size());
    std::vector<int> unknown;
    for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
      if (mesh.roles[i] == NodeRole::Gamma2) u[static_cast<Eigen::Index>(i)] = exact(mesh.nodes[i]);
      else if (mesh.roles[i] != NodeRole::Gamma1) unknown.push_back(static_cast<int>(i));
    }
    const Vec rhs_full = ops.mass * f - ops.gamma3_mass * q - ops.stiffness * u;
    Eigen::SimplicialLDLT<SpMat> ldlt(detail::restrict_matrix(ops.stiffness, unknown));
    const Vec sol = ldlt.solve(detail::gather(rhs_full, unknown));
    for (std::size_t k = 0; k < unknown.size(); ++k) u[unknown[k]] = sol[static_cast<Eigen::Index>(k)];
    errs.push_back(error_norms(mesh, u, exact, grad));
  }
  for (std::size_t k = 1; k < errs.size(); ++k) {
    EXPECT_GT(std::log2(errs[k - 1].l2 / errs[k].l2), 1.9);
    EXPECT_GT(std::log2(errs[k - 1].h1 / errs[k].h1), 0.9);
  }
}
