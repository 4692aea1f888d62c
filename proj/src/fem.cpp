#include "lodlab/fem.hpp"

#include <stdexcept>

namespace lodlab {

DofMap make_dof_map(const Triangulation& mesh) {
  DofMap dofs;
  dofs.vertex_to_dof.assign(mesh.num_vertices(), -1);
  for (int v = 0; v < mesh.num_vertices(); ++v)
    if (!mesh.boundary_vertex[v]) {
      dofs.vertex_to_dof[v] = static_cast<int>(dofs.interior.size());
      dofs.interior.push_back(v);
    }
  return dofs;
}

namespace {

// Constant P1 gradients and area of one triangle.
struct ElementGeometry {
  double area;
  Eigen::Matrix<double, 3, 2> grad;
};

ElementGeometry element_geometry(const Triangulation& mesh, int t) {
  ElementGeometry g;
  Eigen::Matrix<double, 3, 2> p;
  for (int k = 0; k < 3; ++k) p.row(k) = mesh.vertices.row(mesh.triangles(t, k));
  const double det = (p(1, 0) - p(0, 0)) * (p(2, 1) - p(0, 1)) -
                     (p(2, 0) - p(0, 0)) * (p(1, 1) - p(0, 1));
  g.area = det / 2.0;
  for (int k = 0; k < 3; ++k) {
    const auto& a = p.row((k + 1) % 3);
    const auto& b = p.row((k + 2) % 3);
    g.grad(k, 0) = (a(1) - b(1)) / det;
    g.grad(k, 1) = (b(0) - a(0)) / det;
  }
  return g;
}

template <typename ElementMatrix>
SpMat assemble(const Triangulation& mesh, const Vector& a_per_tri,
               const std::vector<int>* triangles, ElementMatrix element) {
  if (a_per_tri.size() != mesh.num_triangles())
    throw std::invalid_argument("assemble: coefficient size mismatch");

  std::vector<Eigen::Triplet<double>> trips;
  const int ntri =
      triangles ? static_cast<int>(triangles->size()) : mesh.num_triangles();
  trips.reserve(9 * ntri);
  for (int it = 0; it < ntri; ++it) {
    const int t = triangles ? (*triangles)[it] : it;
    const double a = a_per_tri(t);
    if (a <= 0.0)
      throw std::invalid_argument("assemble: non-positive coefficient on triangle " +
                                  std::to_string(t));
    Eigen::Matrix3d ke = element(t, a);
    for (int i = 0; i < 3; ++i) {
      const int vi = mesh.triangles(t, i);
      trips.emplace_back(vi, vi, ke(i, i));
      for (int j = i + 1; j < 3; ++j) {
        const int vj = mesh.triangles(t, j);
        // mirrored insertion keeps the assembled matrix exactly symmetric
        trips.emplace_back(vi, vj, ke(i, j));
        trips.emplace_back(vj, vi, ke(i, j));
      }
    }
  }
  SpMat K(mesh.num_vertices(), mesh.num_vertices());
  K.setFromTriplets(trips.begin(), trips.end());
  K.makeCompressed();
  return K;
}

}  // namespace

SpMat assemble_stiffness_full(const Triangulation& mesh, const Vector& a_per_tri) {
  return assemble(mesh, a_per_tri, nullptr, [&](int t, double a) {
    const ElementGeometry g = element_geometry(mesh, t);
    return Eigen::Matrix3d(a * g.area * (g.grad * g.grad.transpose()));
  });
}

SpMat assemble_weighted_mass_full(const Triangulation& mesh,
                                  const Vector& a_per_tri) {
  return assemble(mesh, a_per_tri, nullptr, [&](int t, double a) {
    const double w = a * element_geometry(mesh, t).area / 12.0;
    Eigen::Matrix3d m = Eigen::Matrix3d::Constant(w);
    m.diagonal().setConstant(2.0 * w);
    return m;
  });
}

SpMat assemble_stiffness_masked(const Triangulation& mesh,
                                const Vector& a_per_tri,
                                const std::vector<int>& triangles) {
  return assemble(mesh, a_per_tri, &triangles, [&](int t, double a) {
    const ElementGeometry g = element_geometry(mesh, t);
    return Eigen::Matrix3d(a * g.area * (g.grad * g.grad.transpose()));
  });
}

SpMat assemble_mass_masked(const Triangulation& mesh, const Vector& a_per_tri,
                           const std::vector<int>& triangles) {
  return assemble(mesh, a_per_tri, &triangles, [&](int t, double a) {
    const double w = a * element_geometry(mesh, t).area / 12.0;
    Eigen::Matrix3d m = Eigen::Matrix3d::Constant(w);
    m.diagonal().setConstant(2.0 * w);
    return m;
  });
}

Vector assemble_load_full(const Triangulation& mesh, const RasterGrid& g) {
  Vector f = Vector::Zero(mesh.num_vertices());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    double cx = 0.0, cy = 0.0;
    for (int k = 0; k < 3; ++k) {
      cx += mesh.vertices(mesh.triangles(t, k), 0);
      cy += mesh.vertices(mesh.triangles(t, k), 1);
    }
    const double gt = g.at(cx / 3.0, cy / 3.0);
    const double w = gt * mesh.triangle_area() / 3.0;
    for (int k = 0; k < 3; ++k) f(mesh.triangles(t, k)) += w;
  }
  return f;
}

SpMat restrict_interior(const SpMat& full, const DofMap& dofs) {
  return submatrix(full, dofs.interior, dofs.interior);
}

Vector restrict_interior(const Vector& full, const DofMap& dofs) {
  return gather(full, dofs.interior);
}

SpMat assemble_stiffness(const Triangulation& mesh, const Vector& a_per_tri,
                         const DofMap& dofs) {
  return restrict_interior(assemble_stiffness_full(mesh, a_per_tri), dofs);
}

SpMat assemble_weighted_mass(const Triangulation& mesh, const Vector& a_per_tri,
                             const DofMap& dofs) {
  return restrict_interior(assemble_weighted_mass_full(mesh, a_per_tri), dofs);
}

Vector assemble_load(const Triangulation& mesh, const RasterGrid& g,
                     const DofMap& dofs) {
  return restrict_interior(assemble_load_full(mesh, g), dofs);
}

AssembledSystem assemble_system(const Triangulation& mesh,
                                const Vector& a_per_tri, const RasterGrid& g) {
  AssembledSystem sys;
  sys.dofs = make_dof_map(mesh);
  sys.stiffness = assemble_stiffness(mesh, a_per_tri, sys.dofs);
  sys.load = assemble_load(mesh, g, sys.dofs);
  return sys;
}

FineFunction solve_reference(const MeshHierarchy& hier,
                             const RasterCoefficient& coeff,
                             const RasterGrid& g) {
  const Vector a = sample_on_mesh(coeff.grid, hier.fine);
  const AssembledSystem sys = assemble_system(hier.fine, a, g);
  return FineFunction{solve_spd(sys.stiffness, sys.load, 1e-10)};
}

double energy_norm(const Vector& u, const SpMat& stiffness) {
  if (u.size() != stiffness.rows())
    throw std::invalid_argument("energy_norm: length mismatch");
  return std::sqrt(std::max(0.0, u.dot(stiffness * u)));
}

double energy_error(const Vector& u, const Vector& v, const SpMat& stiffness) {
  if (u.size() != v.size())
    throw std::invalid_argument("energy_error: length mismatch");
  return energy_norm(u - v, stiffness);
}

double relative_energy_error(const Vector& u, const Vector& v,
                             const SpMat& stiffness) {
  return energy_error(u, v, stiffness) / energy_norm(u, stiffness);
}

RasterGrid builtin_source(const std::string& name) {
  RasterGrid g;
  if (name == "half-step") {
    g.nx = 2;
    g.ny = 1;
    g.values.resize(1, 2);
    g.values << 0.0, 1.0;
  } else if (name == "spe-corners") {
    g.nx = 4;
    g.ny = 4;
    g.values = Eigen::ArrayXXd::Zero(4, 4);
    g.values(0, 0) = 8.0;
    g.values(3, 3) = 8.0;
  } else {
    throw std::invalid_argument("unknown built-in source '" + name +
                                "' (expected half-step or spe-corners)");
  }
  return g;
}

}  // namespace lodlab
