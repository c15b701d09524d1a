#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "hvi/geometry.hpp"

using namespace hvi;

namespace {

double total_area(const TriMesh& mesh) {
  double sum = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) sum += mesh.triangle_area(t);
  return sum;
}

} // namespace

TEST(Geometry, SmallestGrid) {
  const TriMesh mesh = build_rect_mesh(1, 1, 1, 1);
  EXPECT_EQ(mesh.num_nodes(), 4u);
  EXPECT_EQ(mesh.triangles.size(), 2u);
  EXPECT_EQ(mesh.boundary_edges.size(), 4u);
  std::map<BoundaryTag, int> count;
  for (const auto& e : mesh.boundary_edges) ++count[e.tag];
  EXPECT_EQ(count[BoundaryTag::Gamma1], 1);
  EXPECT_EQ(count[BoundaryTag::Gamma2], 1);
  EXPECT_EQ(count[BoundaryTag::Gamma3], 2);
}

TEST(Geometry, AreaIdentity) {
  EXPECT_NEAR(total_area(build_rect_mesh(2, 1, 2, 1)), 2.0, 1e-14);
  const TriMesh fine = build_rect_mesh(1, 1, 32, 32);
  EXPECT_EQ(fine.num_nodes(), 1089u);
  EXPECT_NEAR(total_area(fine), 1.0, 1e-12);
}

TEST(Geometry, TrianglesArePositivelyOriented) {
  const TriMesh mesh = build_rect_mesh(3.0, 0.5, 7, 5);
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) EXPECT_GT(mesh.triangle_area(t), 0.0);
  EXPECT_NEAR(total_area(mesh), 1.5, 1.5e-12);
}

TEST(Geometry, RejectsBadArguments) {
  EXPECT_THROW(build_rect_mesh(0.0, 1.0, 2, 2), std::invalid_argument);
  EXPECT_THROW(build_rect_mesh(1.0, -1.0, 2, 2), std::invalid_argument);
  EXPECT_THROW(build_rect_mesh(1.0, 1.0, 0, 2), std::invalid_argument);
  EXPECT_THROW(build_rect_mesh(1.0, 1.0, 2, 0), std::invalid_argument);
}

TEST(Geometry, BoundaryNodeSets) {
  const TriMesh m1 = build_rect_mesh(1, 1, 1, 1);
  for (int i : boundary_nodes(m1, BoundaryTag::Gamma1)) EXPECT_EQ(m1.nodes[i].x, 0.0);
  EXPECT_EQ(boundary_nodes(m1, BoundaryTag::Gamma1).size(), 2u);

  const TriMesh m2 = build_rect_mesh(1, 1, 2, 2);
  EXPECT_EQ(boundary_nodes(m2, BoundaryTag::Gamma2).size(), 3u);
}

TEST(Geometry, Gamma3NodesMatchEnumeration) {
  const TriMesh mesh = build_rect_mesh(1, 1, 4, 4);
  // enumeration oracle straight from coordinates
  std::set<int> incident, owned;
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    const Point& p = mesh.nodes[i];
    if (p.y == 0.0 || p.y == mesh.beta) {
      incident.insert(static_cast<int>(i));
      if (p.x > 0.0 && p.x < mesh.alpha) owned.insert(static_cast<int>(i));
    }
  }
  const auto g3 = boundary_nodes(mesh, BoundaryTag::Gamma3);
  EXPECT_EQ(std::set<int>(g3.begin(), g3.end()), incident);
  EXPECT_EQ(incident.size(), 10u);
  const auto roles = nodes_with_role(mesh, NodeRole::Gamma3);
  EXPECT_EQ(std::set<int>(roles.begin(), roles.end()), owned);
  EXPECT_EQ(owned.size(), 6u);
}

TEST(Geometry, TagPartitionAndDirichletDisjoint) {
  for (int n : {1, 2, 5, 9}) {
    const TriMesh mesh = build_rect_mesh(1.5, 0.75, n, n + 1);
    double len1 = 0, len2 = 0, len3 = 0;
    std::set<std::pair<int, int>> seen;
    for (const auto& e : mesh.boundary_edges) {
      EXPECT_TRUE(seen.insert({std::min(e.n0, e.n1), std::max(e.n0, e.n1)}).second) << "edge tagged twice";
      const double l = edge_length(mesh, e);
      (e.tag == BoundaryTag::Gamma1 ? len1 : e.tag == BoundaryTag::Gamma2 ? len2 : len3) += l;
    }
    EXPECT_NEAR(len1, 0.75, 1e-14);
    EXPECT_NEAR(len2, 0.75, 1e-14);
    EXPECT_NEAR(len3, 3.0, 1e-13);

    const auto g1 = boundary_nodes(mesh, BoundaryTag::Gamma1);
    const auto g2 = boundary_nodes(mesh, BoundaryTag::Gamma2);
    std::set<int> s1(g1.begin(), g1.end());
    for (int i : g2) EXPECT_EQ(s1.count(i), 0u);
    for (int i : g1) EXPECT_EQ(mesh.roles[i], NodeRole::Gamma1);
    for (int i : g2) EXPECT_EQ(mesh.roles[i], NodeRole::Gamma2);
  }
}

TEST(Geometry, RefinementIsNested) {
  const TriMesh coarse = build_rect_mesh(2.0, 1.0, 3, 5);
  const TriMesh fine = build_rect_mesh(2.0, 1.0, 6, 10);
  for (int j = 0; j <= coarse.ny; ++j) {
    for (int i = 0; i <= coarse.nx; ++i) {
      const Point& pc = coarse.nodes[coarse.node_index(i, j)];
      const Point& pf = fine.nodes[fine.node_index(2 * i, 2 * j)];
      EXPECT_NEAR(pc.x, pf.x, 1e-14);
      EXPECT_NEAR(pc.y, pf.y, 1e-14);
    }
  }
}
