#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cmath>
#include <utility>
#include <vector>

namespace lodlab {

using SpMat = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

/// Uniform triangulation of the unit square: n x n cells, each cell split
/// along the lower-left to upper-right diagonal into two triangles.
/// Vertices lie on the lattice {0, 1/n, ..., 1}^2 in row-major order
/// (index j*(n+1)+i for lattice point (i,j)).
struct Triangulation {
  int n = 0;                                   // subdivisions per axis
  Eigen::Matrix<double, Eigen::Dynamic, 2> vertices;
  Eigen::Matrix<int, Eigen::Dynamic, 3> triangles;
  std::vector<bool> boundary_vertex;
  double mesh_size = 0.0;                      // diam(T) = sqrt(2)/n

  int num_vertices() const { return static_cast<int>(vertices.rows()); }
  int num_triangles() const { return static_cast<int>(triangles.rows()); }
  int vertex_id(int i, int j) const { return j * (n + 1) + i; }

  double triangle_area() const { return 1.0 / (2.0 * double(n) * double(n)); }

  /// Triangles incident to each vertex (built once, immutable afterwards).
  const std::vector<std::vector<int>>& vertex_to_triangles() const {
    return vertex_tris_;
  }
  /// Triangles sharing at least one vertex with triangle t (excluding t).
  const std::vector<std::vector<int>>& triangle_neighbors() const {
    return tri_neighbors_;
  }

  std::vector<std::vector<int>> vertex_tris_;
  std::vector<std::vector<int>> tri_neighbors_;
};

/// Nested triangulations coarse / eps-level / fine with the refinement maps
/// used throughout: child_map partitions the fine triangles among coarse
/// ones, and prolongation carries nodal values of all coarse hat functions
/// (including boundary hats) to all fine vertices.
struct MeshHierarchy {
  Triangulation coarse;
  Triangulation eps_level;
  Triangulation fine;
  std::vector<std::vector<int>> child_map;     // coarse tri -> fine tris
  SpMat prolongation;                          // fine vertex x coarse vertex

  /// Fine triangle -> owning coarse triangle (inverse of child_map).
  std::vector<int> fine_to_coarse_tri;
};

enum class PatchKind { Nodal, Element };

/// Union of coarse triangles around a node or an element, grown layer by
/// layer; fine_vertices_interior lists the fine vertices all of whose
/// incident fine triangles lie in the patch and which are not on the
/// domain boundary.
struct Patch {
  PatchKind kind = PatchKind::Nodal;
  int center = -1;                             // coarse vertex or triangle id
  int order = 0;
  std::vector<int> coarse_triangles;           // sorted ids
  std::vector<int> fine_vertices_interior;     // sorted fine vertex ids

  bool covers_all(const MeshHierarchy& hier) const {
    return static_cast<int>(coarse_triangles.size()) ==
           hier.coarse.num_triangles();
  }
};

/// Builds the uniform n x n triangulation. Rejects n = 0.
Triangulation build_uniform(int n);

/// Builds the nested hierarchy. Requires n_H | n_eps | n_h; a violated
/// divisibility is rejected with a diagnostic naming the offending pair.
MeshHierarchy build_hierarchy(int n_H, int n_eps, int n_h);

/// Nodal patch of order k around interior coarse vertex z: order 1 is the
/// support of the hat at z, each increment adds every coarse triangle
/// touching the previous patch. Boundary vertices are rejected.
Patch nodal_patch(const MeshHierarchy& hier, int z, int k);

/// Element patch of order k around coarse triangle T, with order 1 = {T}.
Patch element_patch(const MeshHierarchy& hier, int T, int k);

/// One layer of neighbors around T (all coarse triangles touching T).
Patch element_neighborhood(const MeshHierarchy& hier, int T);

/// Patch over an explicit coarse-triangle set (fine interior vertices are
/// derived); used for region-of-interest estimates.
Patch patch_from_triangles(const MeshHierarchy& hier,
                           std::vector<int> coarse_triangles);

/// Evaluates all nonzero coarse hat functions of `tri` at point (x, y);
/// appends (vertex id, value) pairs. Exact for lattice-aligned points.
void hat_values_at(const Triangulation& tri, double x, double y,
                   std::vector<std::pair<int, double>>& out);

/// Verifies conformity: any two triangles share a full edge, a single
/// vertex, or nothing. Throws on violation.
void check_conforming(const Triangulation& tri);

}  // namespace lodlab
