#pragma once

#include "lodlab/coefficient.hpp"
#include "lodlab/linalg.hpp"
#include "lodlab/mesh.hpp"

namespace lodlab {

/// Degrees of freedom = interior vertices of a triangulation.
struct DofMap {
  std::vector<int> interior;       // dof -> vertex id, ascending
  std::vector<int> vertex_to_dof;  // vertex id -> dof or -1

  int size() const { return static_cast<int>(interior.size()); }
};

DofMap make_dof_map(const Triangulation& mesh);

/// Coefficient-weighted P1 stiffness over the full vertex set (Neumann
/// assembly): entries int a grad(hat_i) . grad(hat_j), exact per element.
/// Rejects non-positive element coefficients.
SpMat assemble_stiffness_full(const Triangulation& mesh, const Vector& a_per_tri);

/// Weighted mass over the full vertex set: int a hat_i hat_j, exact P1 rule
/// (|t| a_t / 6 diagonal, |t| a_t / 12 off-diagonal per element).
SpMat assemble_weighted_mass_full(const Triangulation& mesh,
                                  const Vector& a_per_tri);

/// Load vector over the full vertex set for a piecewise-constant-on-raster
/// source: each triangle contributes g_t |t| / 3 to its three vertices.
Vector assemble_load_full(const Triangulation& mesh, const RasterGrid& g);

/// Interior-dof restrictions of the Neumann assemblies.
SpMat restrict_interior(const SpMat& full, const DofMap& dofs);
Vector restrict_interior(const Vector& full, const DofMap& dofs);

SpMat assemble_stiffness(const Triangulation& mesh, const Vector& a_per_tri,
                         const DofMap& dofs);
SpMat assemble_weighted_mass(const Triangulation& mesh, const Vector& a_per_tri,
                             const DofMap& dofs);
Vector assemble_load(const Triangulation& mesh, const RasterGrid& g,
                     const DofMap& dofs);

/// Stiffness restricted to a subset of triangles (full vertex set); used for
/// patch-masked energies and element-local right-hand sides.
SpMat assemble_stiffness_masked(const Triangulation& mesh,
                                const Vector& a_per_tri,
                                const std::vector<int>& triangles);
SpMat assemble_mass_masked(const Triangulation& mesh, const Vector& a_per_tri,
                           const std::vector<int>& triangles);

/// Values at interior fine vertices; implicitly zero on the boundary.
struct FineFunction {
  Vector values;
};

/// Assembled interior system of the reference problem.
struct AssembledSystem {
  SpMat stiffness;
  Vector load;
  DofMap dofs;
};

AssembledSystem assemble_system(const Triangulation& mesh,
                                const Vector& a_per_tri, const RasterGrid& g);

/// P1 Galerkin solution on the fine mesh; relative residual <= 1e-10.
FineFunction solve_reference(const MeshHierarchy& hier,
                             const RasterCoefficient& coeff,
                             const RasterGrid& g);

/// sqrt((u-v)^T K (u-v)); the relative variant divides by sqrt(u^T K u).
double energy_error(const Vector& u, const Vector& v, const SpMat& stiffness);
double relative_energy_error(const Vector& u, const Vector& v,
                             const SpMat& stiffness);
double energy_norm(const Vector& u, const SpMat& stiffness);

/// Named built-in sources: `half-step` (0 for x < 1/2, 1 beyond) and
/// `spe-corners` (8 on [0,1/4]^2 and [3/4,1]^2, 0 elsewhere).
RasterGrid builtin_source(const std::string& name);

}  // namespace lodlab
