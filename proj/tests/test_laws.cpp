#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "hvi/laws.hpp"
#include "hvi/rng.hpp"

using namespace hvi;

namespace {

const Point kX{0.3, 0.0};

std::vector<BoundaryLaw> all_laws() {
  return {law_zero(),
          law_linear(1.0, 0.0),
          law_linear(-0.5, 2.0),
          law_nonmonotone(1.0, 0.5, 0.4),
          law_nonmonotone(3.0, 0.2, 2.5),
          law_flux([](const Point& p) { return std::sin(p.x); }, 1.0)};
}

/// Trapezoid integral of the subgradient selection on a fine grid.
double integrate_subgrad(const BoundaryLaw& law, double r) {
  const int n = 20000;
  const double h = r / n;
  double acc = 0.5 * (law.subgrad(kX, 0.0) + law.subgrad(kX, r));
  for (int k = 1; k < n; ++k) acc += law.subgrad(kX, k * h);
  return acc * h;
}

} // namespace

TEST(Laws, Zero) {
  const BoundaryLaw law = law_zero();
  EXPECT_EQ(law.value(kX, 5), 0.0);
  EXPECT_EQ(law.dir_deriv(kX, 1, -3), 0.0);
  EXPECT_EQ(law.subgrad(kX, 2), 0.0);
  EXPECT_EQ(law.alpha_jnu, 0.0);
  EXPECT_EQ(law.c_bar0, 0.0);
  EXPECT_EQ(law.c_bar1, 0.0);
}

TEST(Laws, Linear) {
  const BoundaryLaw flux = law_linear(1.0, 0.0);
  EXPECT_EQ(flux.subgrad(kX, -7.0), 1.0); // prescribed flux q = 1
  EXPECT_EQ(flux.dir_deriv(kX, 3.0, 2.0), 2.0);
  const BoundaryLaw robin = law_linear(0.0, 1.0);
  EXPECT_EQ(robin.dir_deriv(kX, 2.0, -1.0), -2.0);
  EXPECT_EQ(robin.c_bar0, 0.0);
  EXPECT_EQ(robin.c_bar1, 1.0);
  EXPECT_EQ(robin.alpha_jnu, 0.0);
  EXPECT_THROW(law_linear(0.0, -1.0), std::invalid_argument);
}

TEST(Laws, NonmonotoneSmoothRegionAndKink) {
  const double a = 2.0, r0 = 0.5, drop = 0.7;
  const BoundaryLaw law = law_nonmonotone(a, r0, drop);
  for (double r : {-1.0, 0.0, 0.2, 0.49})
    for (double s : {-1.5, 0.3}) EXPECT_NEAR(law.dir_deriv(kX, r, s), a * r * s, 1e-15);

  // one-sided difference quotients of the value at the kink
  const double h = 1e-7;
  const double right = (law.value(kX, r0 + h) - law.value(kX, r0)) / h;
  const double left = (law.value(kX, r0) - law.value(kX, r0 - h)) / h;
  EXPECT_NEAR(law.dir_deriv(kX, r0, 1.0), std::max(left, right), 1e-6);
  EXPECT_NEAR(law.dir_deriv(kX, r0, -1.0), std::max(-left, -right), 1e-6);
  EXPECT_DOUBLE_EQ(law.alpha_jnu, drop);
  EXPECT_THROW(law_nonmonotone(0.0, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(law_nonmonotone(1.0, -1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(law_nonmonotone(1.0, 1.0, 0.0), std::invalid_argument);
}

TEST(Laws, ValueIsPrimitiveOfSubgradient) {
  for (const auto& law : all_laws())
    for (double r : {-2.0, -0.3, 0.35, 0.8, 2.7})
      EXPECT_NEAR(law.value(kX, r), integrate_subgrad(law, r), 1e-7) << law.name << " r=" << r;
}

TEST(Laws, RelaxedMonotonicityOnSampleGrid) {
  for (const auto& law : all_laws()) {
    const int n = 200;
    double worst = -1e300;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double r1 = -3.0 + 6.0 * i / (n - 1);
        const double r2 = -3.0 + 6.0 * j / (n - 1);
        const double lhs = law.dir_deriv(kX, r1, r2 - r1) + law.dir_deriv(kX, r2, r1 - r2);
        worst = std::max(worst, lhs - law.alpha_jnu * (r1 - r2) * (r1 - r2));
      }
    }
    EXPECT_LE(worst, 1e-9) << law.name;
  }
}

TEST(Laws, ClarkeCalculusProperties) {
  CounterRng rng(3);
  for (const auto& law : all_laws()) {
    for (int t = 0; t < 2000; ++t) {
      const double r = rng.uniform(-4, 4);
      const double s = rng.uniform(-3, 3);
      const double lam = rng.uniform(0, 5);
      const Point x{rng.uniform(0, 1), 1.0};
      const double d = law.dir_deriv(x, r, s);
      EXPECT_NEAR(law.dir_deriv(x, r, lam * s), lam * d, 1e-12 * (1 + std::abs(lam * d))) << law.name;
      EXPECT_GE(d, law.subgrad(x, r) * s - 1e-12) << law.name;
      EXPECT_LE(std::abs(law.subgrad(x, r)), law.c_bar0 + law.c_bar1 * std::abs(r) + 1e-12) << law.name;
    }
  }
}

TEST(Laws, PiecewiseDerivativeWithJump) {
  // j(r) = |r|: Clarke gradient [-1, 1] at the origin
  const PiecewiseLinearDerivative absval({0.0}, {-1.0, 1.0}, {0.0, 0.0});
  EXPECT_EQ(absval.clarke(0.0, 2.0), 2.0);
  EXPECT_EQ(absval.clarke(0.0, -2.0), 2.0);
  EXPECT_EQ(absval.midpoint(0.0), 0.0);
  EXPECT_EQ(absval.value(-3.0), 3.0);
  EXPECT_EQ(absval.clarke(1.0, -1.0), -1.0);
  EXPECT_THROW(PiecewiseLinearDerivative({1.0, 0.0}, {0, 0, 0}, {0, 0, 0}), std::invalid_argument);
}

TEST(Laws, PenaltyP0) {
  const double c = 2.5;
  const PenaltyLaw p = penalty_p0(c);
  EXPECT_EQ(p.value(kX, -2.0), -2.0 * c);
  EXPECT_EQ(p.value(kX, 3.0), 0.0);
  EXPECT_EQ(p.value(kX, 0.0), 0.0);
  EXPECT_GE((p.value(kX, -1.0) - p.value(kX, 1.0)) * (-2.0), 0.0);
  EXPECT_EQ(p.lipschitz, c);
  EXPECT_THROW(penalty_p0(0.0), std::invalid_argument);
}

TEST(Laws, PenaltyP2) {
  const double c = 4.0;
  const PenaltyLaw p = penalty_p2(c);
  EXPECT_EQ(p.value(kX, 2.0), 2.0 * c);
  EXPECT_EQ(p.value(kX, 0.0), 0.0);
  EXPECT_EQ(p.lipschitz, c);
  EXPECT_THROW(penalty_p2(-1.0), std::invalid_argument);
}

TEST(Laws, PenaltyPropertiesOnRandomPairs) {
  CounterRng rng(5);
  for (const PenaltyLaw& p : {penalty_p0(0.7), penalty_p0(30.0), penalty_p2(0.2), penalty_p2(12.0)}) {
    for (int t = 0; t < 5000; ++t) {
      const double r = rng.uniform(-5, 5), s = rng.uniform(-5, 5);
      const double dv = p.value(kX, r) - p.value(kX, s);
      EXPECT_LE(std::abs(dv), p.lipschitz * std::abs(r - s) * (1 + 1e-12) + 1e-14);
      EXPECT_GE(dv * (r - s), 0.0);
      EXPECT_EQ(p.value(kX, r) == 0.0, p.vanishes_at(r));
    }
    EXPECT_EQ(p.value(kX, 0.0) == 0.0, p.vanishes_at(0.0));
    EXPECT_EQ(p.value(kX, 1e-300) == 0.0, p.vanishes_at(1e-300));
    EXPECT_EQ(p.value(kX, -1e-300) == 0.0, p.vanishes_at(-1e-300));
  }
}

TEST(Laws, DirichletExample) {
  const TriMesh mesh = build_rect_mesh(2.0, 1.0, 4, 3);
  const DirichletDatum one = dirichlet_example([](double) { return 1.0; }, mesh);
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    EXPECT_NEAR(one.lifting[k], mesh.nodes[i].x / 2.0, 1e-15);
    if (mesh.roles[i] == NodeRole::Gamma2) {
      EXPECT_EQ(one.lifting[k], 1.0);
    }
    if (mesh.roles[i] == NodeRole::Gamma1) {
      EXPECT_EQ(one.lifting[k], 0.0);
    }
  }

  auto parabola = [](double y) { return y * (1.0 - y); };
  const DirichletDatum d = dirichlet_example(parabola, mesh);
  EXPECT_GE(d.lifting.minCoeff(), 0.0);
  for (int i : nodes_with_role(mesh, NodeRole::Gamma2)) {
    EXPECT_EQ(d.b[i], parabola(mesh.nodes[i].y));
    EXPECT_EQ(d.lifting[i], d.b[i]);
  }
  EXPECT_THROW(dirichlet_example([](double y) { return y - 0.5; }, mesh), std::invalid_argument);
}
