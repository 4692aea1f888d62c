#pragma once

#include "lodlab/coefficient.hpp"
#include "lodlab/fem.hpp"
#include "lodlab/mesh.hpp"

#include <optional>
#include <string>

namespace lodlab {

enum class OperatorKind { Clement, PUClement, AWClement, Proj, AWProj };

OperatorKind operator_kind_from_string(const std::string& name);
std::string to_string(OperatorKind kind);
bool is_weighted(OperatorKind kind);
bool is_projective(OperatorKind kind);

/// A quasi-interpolation operator materialized as a sparse matrix mapping
/// interior fine-vertex values to interior coarse nodal values. Row z is
/// supported on fine vertices of the nodal patch of z.
struct InterpolationOperator {
  OperatorKind kind = OperatorKind::Clement;
  SpMat matrix;                 // coarse interior x fine interior
  const MeshHierarchy* hier = nullptr;
  Vector fine_coeff;            // per fine triangle; empty for unweighted kinds

  Vector apply(const Vector& fine_interior) const { return matrix * fine_interior; }
};

/// Nodal value (v, hat_z) / (1, hat_z).
InterpolationOperator build_clement(const MeshHierarchy& hier);

/// Partition-of-unity weights hat_z / sum of interior hats, integrated with
/// an interior degree-2 quadrature rule per fine triangle.
InterpolationOperator build_pu_clement(const MeshHierarchy& hier);

/// Coefficient-weighted nodal value (a v, hat_z) / (a, hat_z).
InterpolationOperator build_aweighted(const MeshHierarchy& hier,
                                      const RasterCoefficient& coeff);

/// Nodal value at z of the (weighted) local L2 projection onto the coarse
/// space restricted to the nodal patch of z. Pass nullptr for the
/// unweighted variant.
InterpolationOperator build_local_proj(const MeshHierarchy& hier,
                                       const RasterCoefficient* coeff);

InterpolationOperator build_operator(OperatorKind kind,
                                     const MeshHierarchy& hier,
                                     const RasterCoefficient& coeff);

/// Coarse restriction matrix R = op * prolongation on interior vertices;
/// the operator restricted to the coarse space is an isomorphism iff R is
/// well-conditioned.
struct QI2Report {
  double smallest_singular_value = 0.0;
  double largest_singular_value = 0.0;
  bool invertible = false;
  Vector near_null;  // filled when not invertible
};

QI2Report verify_qi2(const InterpolationOperator& op);

Eigen::MatrixXd coarse_restriction(const InterpolationOperator& op);

/// Interior-dof prolongation block (fine interior x coarse interior).
SpMat interior_prolongation(const MeshHierarchy& hier);

/// Numerical estimates of the local approximation/stability constant per
/// coarse element, plus hat-based weighted inverse-estimate constants.
struct QIConstants {
  Vector per_triangle;                 // local ratio sup estimate, per T
  double c_qip = 0.0;                  // max over elements
  std::optional<double> c_qip_prime;   // exactly 1 for projective kinds
  double c_inv1 = 0.0;
  double c_inv2 = 0.0;
};

QIConstants estimate_qi3(const InterpolationOperator& op,
                         const RasterCoefficient& coeff);

/// One-dimensional companion construction on the two-element patch (0, 2)
/// with a symmetric high-coefficient inclusion of width 2*eps centered at y
/// (and mirrored at 2-y): the piecewise linear function with values b1 at y
/// and b2 at 1 whose weighted Clement interpolant is the hat at 1.
struct EtaConstruction1D {
  double y = 0.0;
  double eps = 0.0;
  double beta = 0.0;
  double b1 = 0.0;
  double b2 = 0.0;
  std::vector<double> nodes;       // breakpoints of eta on [0, 2]
  std::vector<double> values;      // eta at the breakpoints
  double nodal_deviation = 0.0;    // max defect of the interpolation identity
  double energy_ratio = 0.0;       // |a^1/2 eta'|^2 / |a^1/2 hat'|^2 on [0,1]
  double grad_expression = 0.0;    // (b1/y)^2 + ((b2-b1)/(1-y))^2
};

EtaConstruction1D eta_1d(double y, double eps, double beta);

/// Smallest eigenvalue of D_z^{-1} M_z for the 3x3 weighted mass on the 1D
/// patch (0, 2) with a single inclusion of width 2*eps at y in the first
/// element; contrast-independent by construction.
double mu_min_1d(double y, double eps, double beta);

}  // namespace lodlab
