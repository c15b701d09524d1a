#pragma once

#include <functional>
#include <memory>

#include "hvi/problem.hpp"

namespace hvi::testing {

inline HviProblem make_problem(std::shared_ptr<const Discretization> disc, const BoundaryLaw& law,
                               ConstraintMode mode, const std::function<double(const Point&)>& f,
                               const std::function<double(double)>& phi, double lambda = 1.0,
                               double p0_c = 100.0, double p2_c = 100.0) {
  HviProblem p;
  p.disc = std::move(disc);
  p.f = interpolate(p.mesh(), f);
  p.datum = dirichlet_example(phi, p.mesh());
  p.law = law;
  p.mode = mode;
  p.lambda = lambda;
  if (uses_p0(mode)) p.p0 = penalty_p0(p0_c);
  if (uses_p2(mode)) p.p2 = penalty_p2(p2_c);
  return p;
}

inline std::shared_ptr<const Discretization> unit_square(int n) {
  return discretize(build_rect_mesh(1.0, 1.0, n, n));
}

} // namespace hvi::testing
