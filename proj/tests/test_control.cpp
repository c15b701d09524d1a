#include <gtest/gtest.h>

#include <cmath>

#include "hvi/control.hpp"
#include "support.hpp"

using namespace hvi;
using hvi::testing::make_problem;
using hvi::testing::unit_square;

namespace {

/// Soft boundary-penalty state on the unit square; f is set by the control.
ControlProblem soft_instance(std::shared_ptr<const Discretization> disc, const BoundaryLaw& law, double a0, double a2,
                             std::function<double(double)> target) {
  ControlProblem q;
  q.state = make_problem(disc, law, ConstraintMode::PenaltyGamma2, [](const Point&) { return 0.0; },
                         [](double) { return 1.0; }, 1.0, 100.0, 1.0);
  q.param = cosine_basis(disc->mesh, 2, 2);
  q.cost.a0 = a0;
  q.cost.a2 = a2;
  q.cost.phi = interpolate(disc->mesh, [&](const Point& p) { return target(p.y); });
  return q;
}

FeField random_field(Eigen::Index n, CounterRng& rng, double lo, double hi) {
  FeField v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.uniform(lo, hi);
  return v;
}

} // namespace

TEST(Cost, ClosedFormExamples) {
  const auto disc = discretize(build_rect_mesh(2.0, 0.5, 6, 3));
  const auto& ops = disc->ops;
  const auto n = static_cast<Eigen::Index>(disc->mesh.num_nodes());
  CounterRng rng(8);
  CostSpec c;
  c.a0 = 3.0;
  c.a2 = 1.0;
  c.phi = random_field(n, rng, -1, 1);
  EXPECT_EQ(eval_cost(c, ops, c.phi, FeField::Zero(n)), 0.0);
  EXPECT_NEAR(eval_cost(c, ops, c.phi + FeField::Ones(n), FeField::Zero(n)), 0.5, 1e-12); // meas(Gamma2) = beta
}

TEST(Cost, PerturbedCostMatchesExpansion) {
  const auto disc = unit_square(5);
  const auto& ops = disc->ops;
  const auto n = static_cast<Eigen::Index>(disc->mesh.num_nodes());
  CounterRng rng(9);
  CostSpec c;
  c.a0 = 0.7;
  c.a2 = 2.0;
  c.phi = random_field(n, rng, 0, 2);
  const FeField u = random_field(n, rng, -1, 3), f = random_field(n, rng, -2, 2);
  const double base = eval_cost(c, ops, u, f);
  for (double mu : {0.1, 0.5, 2.0}) {
    c.mu = mu;
    const FeField d0 = u - c.phi;
    const double expanded = base - 2.0 * c.a2 * mu * c.phi.dot(ops.gamma2_mass * d0) +
                            c.a2 * mu * mu * quad_form(ops.gamma2_mass, c.phi);
    EXPECT_NEAR(eval_cost(c, ops, u, f), expanded, 1e-12 * (1 + std::abs(expanded)));
  }
}

TEST(Cost, ZeroPerturbationIsBitwiseUnperturbed) {
  const auto disc = unit_square(5);
  const auto& ops = disc->ops;
  const auto n = static_cast<Eigen::Index>(disc->mesh.num_nodes());
  CounterRng rng(10);
  CostSpec c;
  c.a0 = 0.3;
  c.a2 = 1.7;
  c.phi = random_field(n, rng, 0, 1);
  c.omega = [](double mu) { return std::exp(mu); };
  for (int t = 0; t < 50; ++t) {
    const FeField u = random_field(n, rng, -1, 2), f = random_field(n, rng, -3, 3);
    const double direct = c.a0 * quad_form(ops.mass, f) + c.a2 * quad_form(ops.gamma2_mass, FeField(u - c.phi));
    EXPECT_EQ(eval_cost(c, ops, u, f), direct);
  }
}

TEST(Cost, CoercivityLowerBound) {
  const auto disc = unit_square(6);
  const auto& ops = disc->ops;
  const auto n = static_cast<Eigen::Index>(disc->mesh.num_nodes());
  CounterRng rng(12);
  CostSpec c;
  c.phi = random_field(n, rng, 0, 1);
  for (int t = 0; t < 500; ++t) {
    c.a0 = rng.uniform(1e-6, 10);
    c.a2 = rng.uniform(1e-6, 10);
    c.mu = rng.uniform(0, 3);
    const FeField u = random_field(n, rng, -5, 5), f = random_field(n, rng, -5, 5);
    EXPECT_GE(eval_cost(c, ops, u, f) - c.a0 * control_energy(ops, f), -1e-12);
  }
}

TEST(Cost, Validation) {
  const auto disc = unit_square(3);
  const auto n = static_cast<Eigen::Index>(disc->mesh.num_nodes());
  CostSpec c;
  c.phi = FeField::Zero(n);
  EXPECT_NO_THROW(validate(c, n));
  c.a0 = 0.0;
  EXPECT_THROW(validate(c, n), ProblemError);
  c.a0 = 1.0;
  c.omega = [](double mu) { return 2.0 + mu; };
  EXPECT_THROW(validate(c, n), ProblemError);
}

TEST(ControlParam, CosineBasis) {
  const auto disc = unit_square(8);
  const ControlParam p = cosine_basis(disc->mesh, 3, 2);
  EXPECT_EQ(p.size(), 6);
  EXPECT_LT(gram_condition(p, disc->ops), 1e8);
  EXPECT_NO_THROW(validate(p, disc->ops));
  Vec theta = Vec::Zero(6);
  theta[0] = 2.0;
  EXPECT_LT((p.field(theta) - FeField::Constant(p.basis[0].size(), 2.0)).lpNorm<Eigen::Infinity>(), 1e-15);
  EXPECT_THROW(cosine_basis(disc->mesh, 4, 4), std::invalid_argument);

  ControlParam dup = p;
  dup.basis.push_back(p.basis[1]);
  EXPECT_THROW(validate(dup, disc->ops), ProblemError);
}

TEST(NelderMead, Rosenbrock) {
  auto rosen = [](const Vec& x) { return 100 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1 - x[0], 2); };
  NelderMeadOptions opt;
  opt.ftol = 1e-14;
  opt.atol = 1e-20;
  const NelderMeadResult r = nelder_mead(rosen, Vec::Constant(2, -1.2), opt);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.x[0], 1.0, 1e-5);
  EXPECT_NEAR(r.x[1], 1.0, 1e-5);
  for (std::size_t k = 1; k < r.best_trace.size(); ++k) EXPECT_LE(r.best_trace[k], r.best_trace[k - 1]);
}

TEST(NelderMead, QuadraticInFourDimensions) {
  Vec c(4);
  c << 1.0, -2.0, 0.5, 3.0;
  auto quad = [&](const Vec& x) { return (x - c).squaredNorm() + 0.1 * (x[0] - c[0]) * (x[1] - c[1]); };
  const NelderMeadResult r = nelder_mead(quad, Vec::Zero(4));
  EXPECT_LT((r.x - c).norm(), 1e-4);
  EXPECT_LT(r.fx, 1e-8);
}

TEST(Control, VanishingTrackingWeightGivesZeroControl) {
  const auto disc = unit_square(6);
  ControlProblem q = soft_instance(disc, law_zero(), 1.0, 1e-12, [](double) { return 3.0; });
  ControlOptions opt;
  opt.starts = 3;
  const OptReport r = solve_control(q, opt);
  EXPECT_LE(l2_norm(disc->ops, r.best_f), 1e-4);
}

TEST(Control, InverseCrimeRecoversPlantedCost) {
  const auto disc = unit_square(8);
  ControlProblem q = soft_instance(disc, law_zero(), 1e-10, 1.0, [](double) { return 0.0; });
  Vec planted(4);
  planted << 2.0, 0.5, -0.3, 0.2;
  q.cost.phi = evaluate_control(q, planted).u;
  ControlOptions opt;
  opt.starts = 4;
  opt.seed = 77;
  const OptReport r = solve_control(q, opt);
  EXPECT_LE(r.best_cost, 1e-6);
  EXPECT_LE(r.admissibility_residual, 10 * opt.solve.tol);
  // the reported pair is admissible for its own inequality
  EXPECT_TRUE(membership_check(q.state, {q.state.lambda, r.best_f}, r.best_u, 10 * opt.solve.tol));
  EXPECT_GE(r.min_coercivity_slack, -1e-12);
  EXPECT_GT(r.visited, 0);
}

TEST(Control, IndependentSeedsAgree) {
  const auto disc = unit_square(8);
  ControlProblem q = soft_instance(disc, law_zero(), 1e-2, 1.0, [](double y) { return 2.0 + std::sin(3 * y); });
  ControlOptions a, b;
  a.seed = 1;
  b.seed = 2;
  a.threads = b.threads = 4;
  const OptReport ra = solve_control(q, a), rb = solve_control(q, b);
  EXPECT_LE(std::abs(ra.best_cost - rb.best_cost), 1e-6 * std::abs(ra.best_cost));
  const QuadraticReference ref = control_normal_equations(q);
  EXPECT_LE(std::abs(ra.best_cost - ref.cost), 1e-6 * ref.cost);
  EXPECT_LT((ra.best_theta - ref.theta).norm(), 1e-3);
}

TEST(Control, ThreadCountDoesNotChangeResults) {
  const auto disc = unit_square(6);
  ControlProblem q = soft_instance(disc, law_zero(), 1e-2, 1.0, [](double y) { return 1.5 + y; });
  ControlOptions a;
  a.starts = 4;
  ControlOptions b = a;
  b.threads = 4;
  const OptReport ra = solve_control(q, a), rb = solve_control(q, b);
  EXPECT_EQ(ra.best_cost, rb.best_cost);
  ASSERT_EQ(ra.trace.size(), rb.trace.size());
  for (std::size_t k = 0; k < ra.trace.size(); ++k) EXPECT_EQ(ra.trace[k].cost, rb.trace[k].cost);
}

TEST(Control, TracesAreMonotone) {
  const auto disc = unit_square(6);
  ControlProblem q = soft_instance(disc, law_nonmonotone(1.0, 0.5, 0.05), 1e-2, 1.0, [](double) { return 0.4; });
  ControlOptions opt;
  opt.starts = 3;
  const OptReport r = solve_control(q, opt);
  for (std::size_t k = 1; k < r.trace.size(); ++k)
    if (r.trace[k].start == r.trace[k - 1].start) {
      EXPECT_LE(r.trace[k].cost, r.trace[k - 1].cost);
    }
  double best = 1e300;
  for (const auto& s : r.starts) best = std::min(best, s.cost);
  EXPECT_EQ(r.best_cost, best);
  EXPECT_GE(r.min_coercivity_slack, -1e-12);
}

TEST(Control, AllStartsFailingIsAnError) {
  const auto disc = unit_square(4);
  ControlProblem q = soft_instance(disc, law_nonmonotone(1.0, 0.1, 0.2), 1.0, 1.0, [](double) { return 1.0; });
  ControlOptions opt;
  opt.starts = 2;
  opt.solve.max_outer = 1;
  EXPECT_THROW(solve_control(q, opt), NumericError);
}

TEST(Control, SolutionSetOfConvexInstanceIsTight) {
  const auto disc = unit_square(6);
  ControlProblem q = soft_instance(disc, law_zero(), 1e-2, 1.0, [](double y) { return 1.0 + 0.5 * y; });
  ControlOptions opt;
  opt.starts = 6;
  opt.threads = 3;
  opt.nm.ftol = 1e-13; // the valley along the y-constant modes is flat
  const SolutionSetProbe probe = solution_set_probe(q, opt);
  const QuadraticReference ref = control_normal_equations(q);
  for (int s : probe.near_optimal)
    EXPECT_LT(l2_norm(disc->ops, probe.report.starts[static_cast<std::size_t>(s)].f - ref.f), 1e-4);
  EXPECT_GE(probe.near_optimal.size(), 2u);
  EXPECT_LE(probe.diameter, 1e-4);
  EXPECT_EQ(probe.clusters, 1);
  EXPECT_TRUE(probe.coercivity_ok);
  for (int s : probe.near_optimal)
    EXPECT_LE(l2_norm(disc->ops, probe.report.starts[static_cast<std::size_t>(s)].f), probe.f_bound + 1e-12);
}

TEST(Control, MuConvergenceAndFrozenControl) {
  const auto disc = unit_square(6);
  ControlProblem q;
  q.state = make_problem(disc, law_zero(), ConstraintMode::PenaltyGamma2, [](const Point&) { return 0.0; },
                         [](double) { return 1.0; }, 1.0, 100.0, 100.0);
  q.param = cosine_basis(disc->mesh, 2, 1);
  q.cost.a0 = 1.0;
  q.cost.a2 = 1.0;
  q.cost.phi = q.state.datum.b;
  ControlOptions opt;
  opt.starts = 2;
  std::vector<double> seq = {1e-1, 1e-2, 1e-3, 1e-4};
  const MuConvergence mc = mu_convergence(q, seq, seq, opt);
  EXPECT_TRUE(mc.monotone);
  EXPECT_LE(mc.final_gap, 1e-5);
  EXPECT_LE(mc.reference_cost, 1e-12);

  const MuConvergence frozen = mu_convergence(q, {1.0, 1.0, 1.0, 1.0}, seq, opt);
  EXPECT_GT(frozen.final_gap, 1e-3);
}
