#pragma once

#include "lodlab/coefficient.hpp"
#include "lodlab/fem.hpp"
#include "lodlab/linalg.hpp"
#include "lodlab/quasi_interp.hpp"

namespace lodlab {

inline constexpr int kGlobal = -1;

/// Shared immutable state for corrector computations on one hierarchy and
/// coefficient: weighted fine stiffness and prolongation on interior dofs.
struct LodProblem {
  const MeshHierarchy* hier = nullptr;
  Vector a_fine;        // per fine triangle
  SpMat stiffness;      // fine interior x fine interior
  SpMat prolongation;   // fine interior x coarse interior
  DofMap fine_dofs;
  std::vector<int> coarse_interior;  // coarse vertex id per coarse dof

  int fine_size() const { return int(fine_dofs.interior.size()); }
  int coarse_size() const { return int(coarse_interior.size()); }
  int coarse_dof(int vertex) const;
  Vector prolonged_hat(int coarse_dof) const;  // fine interior values of hat
};

LodProblem make_lod_problem(const MeshHierarchy& hier,
                            const RasterCoefficient& coeff);

/// Fine-scale corrector of one coarse hat: the energy projection of the hat
/// onto the operator kernel, truncated to the order-k nodal patch (order
/// kGlobal solves on the whole domain).
struct Corrector {
  int node = -1;   // coarse vertex id
  int order = 0;   // k, or kGlobal
  Vector values;   // fine interior dofs, zero outside the patch
  Patch patch;
};

Corrector corrector_global(const LodProblem& prob,
                           const InterpolationOperator& op, int z);
Corrector corrector_local(const LodProblem& prob, const InterpolationOperator& op,
                          int z, int k);

/// Element-patch two-step localization: per (T, y) solve with the
/// element-restricted right side, then sum over the elements around z.
Vector corrector_element_twostep(const LodProblem& prob,
                                 const InterpolationOperator& op, int T, int y,
                                 int k);
Corrector assemble_twostep(const LodProblem& prob,
                           const InterpolationOperator& op, int z, int k);

enum class Localization { Nodal, Element };

/// per-node correctors phi and multiscale basis psi = prolong - phi as
/// sparse column blocks (fine interior x coarse interior).
struct CorrectorSet {
  OperatorKind kind = OperatorKind::Clement;
  int k = kGlobal;
  Localization localization = Localization::Nodal;
  SpMat phi;
  SpMat psi;
  long solves = 0;
};

CorrectorSet compute_correctors(const LodProblem& prob,
                                const InterpolationOperator& op, int k,
                                Localization localization = Localization::Nodal,
                                int workers = 1);

/// Galerkin solution in the multiscale coarse space.
struct CoarseSolution {
  Vector coefficients;  // per coarse dof
  Vector lifted;        // fine interior dofs
  int k = kGlobal;
  OperatorKind kind = OperatorKind::Clement;
};

CoarseSolution solve_coarse(const LodProblem& prob, const CorrectorSet& set,
                            const Vector& load_interior);

/// Convenience wrapper: build problem, operator and correctors, then solve.
CoarseSolution solve_coarse(const MeshHierarchy& hier,
                            const RasterCoefficient& coeff,
                            const InterpolationOperator& op,
                            const RasterGrid& g, int k,
                            Localization localization = Localization::Nodal,
                            int workers = 1);

/// Energy of the global corrector outside the order-k patches:
/// (k, ||a^1/2 grad phi||_{complement of patch_k}) rows.
std::vector<std::pair<int, double>> decay_profile(
    const LodProblem& prob, const Corrector& global_corrector,
    const std::vector<int>& k_values);

}  // namespace lodlab
