#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace hvi {

struct Point {
  double x = 0.0; // x1, distance from the Gamma1 side
  double y = 0.0; // x2
};

enum class BoundaryTag { Gamma1, Gamma2, Gamma3 };

inline const char* to_string(BoundaryTag tag) {
  switch (tag) {
  case BoundaryTag::Gamma1: return "Gamma1";
  case BoundaryTag::Gamma2: return "Gamma2";
  case BoundaryTag::Gamma3: return "Gamma3";
  }
  return "?";
}

struct BoundaryEdge {
  int n0 = 0;
  int n1 = 0;
  BoundaryTag tag = BoundaryTag::Gamma3;
};

/// Classification of a node for constraint purposes. Corners shared by a
/// Dirichlet side and Gamma3 belong to the Dirichlet side.
enum class NodeRole { Interior, Gamma1, Gamma2, Gamma3 };

/// Structured triangulation of the rectangle (0,alpha) x (0,beta).
///
/// Nodes are numbered row by row: node (i, j) has index j*(nx+1)+i and sits at
/// (i*alpha/nx, j*beta/ny). Each cell is split along its rising diagonal into
/// two counter-clockwise triangles, so meshes with doubled subdivisions are
/// nested. Gamma1 is the side x1=0, Gamma2 the side x1=alpha, Gamma3 the top
/// and bottom sides.
struct TriMesh {
  double alpha = 1.0;
  double beta = 1.0;
  int nx = 1;
  int ny = 1;
  std::vector<Point> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<BoundaryEdge> boundary_edges;
  std::vector<NodeRole> roles;

  std::size_t num_nodes() const { return nodes.size(); }
  int node_index(int i, int j) const { return j * (nx + 1) + i; }

  double triangle_area(std::size_t t) const {
    const auto& tri = triangles[t];
    const Point& a = nodes[tri[0]];
    const Point& b = nodes[tri[1]];
    const Point& c = nodes[tri[2]];
    return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
  }
};

inline TriMesh build_rect_mesh(double alpha, double beta, int nx, int ny) {
  if (!(alpha > 0.0) || !(beta > 0.0))
    throw std::invalid_argument("build_rect_mesh: domain dimensions must be positive");
  if (nx < 1 || ny < 1)
    throw std::invalid_argument("build_rect_mesh: subdivision counts must be >= 1");

  TriMesh mesh;
  mesh.alpha = alpha;
  mesh.beta = beta;
  mesh.nx = nx;
  mesh.ny = ny;

  mesh.nodes.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));
  mesh.roles.reserve(mesh.nodes.capacity());
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      // exact endpoints so boundary coordinates compare equal
      const double x = (i == nx) ? alpha : alpha * static_cast<double>(i) / nx;
      const double y = (j == ny) ? beta : beta * static_cast<double>(j) / ny;
      mesh.nodes.push_back({x, y});
      NodeRole role = NodeRole::Interior;
      if (i == 0)
        role = NodeRole::Gamma1;
      else if (i == nx)
        role = NodeRole::Gamma2;
      else if (j == 0 || j == ny)
        role = NodeRole::Gamma3;
      mesh.roles.push_back(role);
    }
  }

  mesh.triangles.reserve(static_cast<std::size_t>(2 * nx * ny));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int n00 = mesh.node_index(i, j);
      const int n10 = mesh.node_index(i + 1, j);
      const int n01 = mesh.node_index(i, j + 1);
      const int n11 = mesh.node_index(i + 1, j + 1);
      mesh.triangles.push_back({n00, n10, n11});
      mesh.triangles.push_back({n00, n11, n01});
    }
  }

  for (int j = 0; j < ny; ++j) {
    mesh.boundary_edges.push_back({mesh.node_index(0, j), mesh.node_index(0, j + 1), BoundaryTag::Gamma1});
    mesh.boundary_edges.push_back({mesh.node_index(nx, j), mesh.node_index(nx, j + 1), BoundaryTag::Gamma2});
  }
  for (int i = 0; i < nx; ++i) {
    mesh.boundary_edges.push_back({mesh.node_index(i, 0), mesh.node_index(i + 1, 0), BoundaryTag::Gamma3});
    mesh.boundary_edges.push_back({mesh.node_index(i, ny), mesh.node_index(i + 1, ny), BoundaryTag::Gamma3});
  }
  return mesh;
}

/// Nodes incident to at least one boundary edge with the given tag, sorted.
/// For Gamma3 this includes the four corners; use nodes_with_role for the
/// tie-broken classification.
inline std::vector<int> boundary_nodes(const TriMesh& mesh, BoundaryTag tag) {
  std::vector<int> out;
  for (const auto& e : mesh.boundary_edges) {
    if (e.tag != tag) continue;
    out.push_back(e.n0);
    out.push_back(e.n1);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline std::vector<int> nodes_with_role(const TriMesh& mesh, NodeRole role) {
  std::vector<int> out;
  for (std::size_t i = 0; i < mesh.roles.size(); ++i)
    if (mesh.roles[i] == role) out.push_back(static_cast<int>(i));
  return out;
}

inline double edge_length(const TriMesh& mesh, const BoundaryEdge& e) {
  const Point& a = mesh.nodes[e.n0];
  const Point& b = mesh.nodes[e.n1];
  return std::hypot(b.x - a.x, b.y - a.y);
}

} // namespace hvi
