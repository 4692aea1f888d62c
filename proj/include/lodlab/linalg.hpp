#pragma once

#include <Eigen/SparseCore>

#include <memory>
#include <vector>

namespace lodlab {

using SpMat = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

/// Solves K x = f for symmetric positive definite K: direct sparse
/// factorization up to `direct_limit` unknowns, preconditioned conjugate
/// gradients beyond. Guarantees a normwise backward error <= tol or throws.
Vector solve_spd(const SpMat& K, const Vector& f, double tol = 1e-10,
                 int direct_limit = 200000);

/// Constrained SPD system [[K, C^T], [C, 0]] [u; mu] = [rhs_primal; rhs_dual].
struct SaddleSystem {
  SpMat K;            // SPD block
  SpMat C;            // constraint rows (may have zero rows before filtering)
  Vector rhs_primal;
  Vector rhs_dual;
};

struct SaddleSolution {
  Vector primal;
  Vector multipliers;
};

/// Factorization of one saddle system, reusable across right-hand sides.
/// Rank-deficient constraints are detected and reported with the offending
/// row indices.
class SaddleSolver {
 public:
  SaddleSolver(SpMat K, SpMat C, double tol = 1e-10);
  ~SaddleSolver();
  SaddleSolver(SaddleSolver&&) noexcept;
  SaddleSolver& operator=(SaddleSolver&&) noexcept;

  SaddleSolution solve(const Vector& rhs_primal, const Vector& rhs_dual) const;
  Vector solve_primal(const Vector& rhs_primal) const;  // rhs_dual = 0

  int num_unknowns() const { return n_; }
  int num_constraints() const { return m_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int n_ = 0, m_ = 0;
  double tol_ = 1e-10;
};

SaddleSolution solve_saddle(const SaddleSystem& sys, double tol = 1e-10);

struct EigPair {
  double value = 0.0;
  Vector vector;
};

/// Smallest generalized eigenvalue of K v = lambda M v outside the span of
/// the deflation vectors (which must span ker K), via shifted inverse power
/// iteration with M-orthogonal deflation. M must be SPD.
EigPair smallest_nonzero_eig(const SpMat& K, const SpMat& M,
                             const std::vector<Vector>& deflation,
                             double tol = 1e-6, int max_iter = 500);

/// Submatrix A(rows, cols) for sorted-or-not index lists.
SpMat submatrix(const SpMat& A, const std::vector<int>& rows,
                const std::vector<int>& cols);

/// Gather / scatter between a global vector and an index subset.
Vector gather(const Vector& v, const std::vector<int>& idx);
void scatter_add(Vector& v, const std::vector<int>& idx, const Vector& vals);

}  // namespace lodlab
