#include "lodlab/linalg.hpp"

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <memory>
#include <sstream>
#include <stdexcept>

namespace lodlab {

namespace {

double inf_norm(const SpMat& A) {
  Vector row_sums = Vector::Zero(A.rows());
  for (int c = 0; c < A.outerSize(); ++c)
    for (SpMat::InnerIterator it(A, c); it; ++it)
      row_sums(it.row()) += std::abs(it.value());
  return A.rows() == 0 ? 0.0 : row_sums.maxCoeff();
}

// Normwise backward error ||Kx - f|| / (||K|| ||x|| + ||f||); the plain
// relative residual is not attainable in double precision once the contrast
// pushes ||K|| ||x|| far above ||f||.
double backward_error(const SpMat& K, double k_norm, const Vector& x,
                      const Vector& f) {
  const double denom = k_norm * x.norm() + f.norm();
  if (denom == 0.0) return (K * x - f).norm();
  return (K * x - f).norm() / denom;
}

}  // namespace

Vector solve_spd(const SpMat& K, const Vector& f, double tol, int direct_limit) {
  if (K.rows() != K.cols() || K.rows() != f.size())
    throw std::invalid_argument("solve_spd: dimension mismatch");
  if (K.rows() == 0) return Vector();

  const double k_norm = inf_norm(K);
  Vector x;
  if (K.rows() <= direct_limit) {
    Eigen::SimplicialLDLT<SpMat> ldlt(K);
    if (ldlt.info() != Eigen::Success)
      throw std::runtime_error("solve_spd: factorization failed");
    if (ldlt.vectorD().minCoeff() <= 0.0)
      throw std::runtime_error("solve_spd: matrix is not positive definite");
    x = ldlt.solve(f);
    const double fn = f.norm();
    if ((K * x - f).norm() > tol * fn) x += ldlt.solve(f - K * x).eval();
  } else {
    Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper,
                             Eigen::IncompleteCholesky<double>>
        cg(K);
    cg.setTolerance(tol);
    cg.setMaxIterations(20 * K.rows());
    x = cg.solve(f);
    if (cg.info() != Eigen::Success &&
        backward_error(K, k_norm, x, f) > tol)
      throw std::runtime_error("solve_spd: cg did not converge, residual " +
                               std::to_string(cg.error()));
  }
  const double err = backward_error(K, k_norm, x, f);
  if (err > 10 * tol)
    throw std::runtime_error("solve_spd: backward error " +
                             std::to_string(err) + " above tolerance");
  return x;
}

struct SaddleSolver::Impl {
  Eigen::SparseLU<SpMat> lu;
  SpMat K, C;
  double k_norm = 0.0, c_norm = 0.0;
  double c_scale = 1.0;  // constraint rows equilibrated against the K block
  bool plain_spd = false;
  std::unique_ptr<Eigen::SimplicialLDLT<SpMat>> ldlt;
};

SaddleSolver::~SaddleSolver() = default;
SaddleSolver::SaddleSolver(SaddleSolver&&) noexcept = default;
SaddleSolver& SaddleSolver::operator=(SaddleSolver&&) noexcept = default;

namespace {

// Rank-revealing diagnosis of the constraint block, used on breakdown.
[[noreturn]] void report_dependent_rows(const SpMat& C) {
  Eigen::MatrixXd Cd(C);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Cd.transpose());
  qr.setThreshold(1e-12);
  const int rank = static_cast<int>(qr.rank());
  std::ostringstream msg;
  msg << "solve_saddle: constraint block is rank deficient (rank " << rank
      << " of " << C.rows() << "); dependent rows:";
  const auto perm = qr.colsPermutation().indices();
  for (int i = rank; i < C.rows(); ++i) msg << " " << perm(i);
  throw std::runtime_error(msg.str());
}

}  // namespace

SaddleSolver::SaddleSolver(SpMat K, SpMat C, double tol)
    : impl_(std::make_unique<Impl>()), tol_(tol) {
  n_ = static_cast<int>(K.rows());
  m_ = static_cast<int>(C.rows());
  if (K.rows() != K.cols())
    throw std::invalid_argument("SaddleSolver: K must be square");
  if (m_ > 0 && C.cols() != K.rows())
    throw std::invalid_argument("SaddleSolver: C column count mismatch");

  impl_->K = std::move(K);
  impl_->C = std::move(C);
  impl_->k_norm = inf_norm(impl_->K);
  impl_->c_norm = inf_norm(impl_->C);

  if (m_ == 0) {
    impl_->plain_spd = true;
    impl_->ldlt = std::make_unique<Eigen::SimplicialLDLT<SpMat>>(impl_->K);
    if (impl_->ldlt->info() != Eigen::Success ||
        impl_->ldlt->vectorD().minCoeff() <= 0.0)
      throw std::runtime_error("SaddleSolver: K block not positive definite");
    return;
  }

  if (impl_->k_norm > 0.0 && impl_->c_norm > 0.0)
    impl_->c_scale = impl_->k_norm / impl_->c_norm;

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(impl_->K.nonZeros() + 2 * impl_->C.nonZeros());
  for (int c = 0; c < impl_->K.outerSize(); ++c)
    for (SpMat::InnerIterator it(impl_->K, c); it; ++it)
      trips.emplace_back(it.row(), it.col(), it.value());
  for (int c = 0; c < impl_->C.outerSize(); ++c)
    for (SpMat::InnerIterator it(impl_->C, c); it; ++it) {
      trips.emplace_back(n_ + it.row(), it.col(), impl_->c_scale * it.value());
      trips.emplace_back(it.col(), n_ + it.row(), impl_->c_scale * it.value());
    }
  SpMat S(n_ + m_, n_ + m_);
  S.setFromTriplets(trips.begin(), trips.end());
  S.makeCompressed();

  impl_->lu.compute(S);
  if (impl_->lu.info() != Eigen::Success) report_dependent_rows(impl_->C);
}

SaddleSolution SaddleSolver::solve(const Vector& rhs_primal,
                                   const Vector& rhs_dual) const {
  if (rhs_primal.size() != n_ || rhs_dual.size() != m_)
    throw std::invalid_argument("SaddleSolver::solve: rhs size mismatch");

  SaddleSolution sol;
  if (impl_->plain_spd) {
    sol.primal = impl_->ldlt->solve(rhs_primal);
    sol.multipliers = Vector();
    return sol;
  }

  Vector rhs(n_ + m_);
  rhs.head(n_) = rhs_primal;
  rhs.tail(m_) = impl_->c_scale * rhs_dual;
  Vector xy = impl_->lu.solve(rhs);
  sol.primal = xy.head(n_);
  sol.multipliers = impl_->c_scale * xy.tail(m_);

  const double scale1 = 1.0 + rhs_primal.norm() +
                        impl_->k_norm * sol.primal.norm() +
                        impl_->c_norm * sol.multipliers.norm();
  const double scale2 =
      1.0 + rhs_dual.norm() + impl_->c_norm * sol.primal.norm();
  const double r1 = (impl_->K * sol.primal +
                     impl_->C.transpose() * sol.multipliers - rhs_primal)
                        .norm();
  const double r2 = (impl_->C * sol.primal - rhs_dual).norm();
  if (r1 > tol_ * scale1 || r2 > tol_ * scale2) {
    // a huge residual from a successful factorization signals near rank
    // deficiency of the constraints
    if (!(r1 < 1e-2 * scale1 && r2 < 1e-2 * scale2))
      report_dependent_rows(impl_->C);
    std::ostringstream msg;
    msg << "solve_saddle: residuals " << r1 << " (primal, scale " << scale1
        << "), " << r2 << " (constraint, scale " << scale2
        << ") above tolerance " << tol_;
    throw std::runtime_error(msg.str());
  }
  return sol;
}

Vector SaddleSolver::solve_primal(const Vector& rhs_primal) const {
  return solve(rhs_primal, Vector::Zero(m_)).primal;
}

SaddleSolution solve_saddle(const SaddleSystem& sys, double tol) {
  SaddleSolver solver(sys.K, sys.C, tol);
  return solver.solve(sys.rhs_primal, sys.rhs_dual);
}

EigPair smallest_nonzero_eig(const SpMat& K, const SpMat& M,
                             const std::vector<Vector>& deflation, double tol,
                             int max_iter) {
  const int n = static_cast<int>(K.rows());
  if (M.rows() != n || M.cols() != n || K.cols() != n)
    throw std::invalid_argument("smallest_nonzero_eig: dimension mismatch");

  const double scale =
      (Vector(K.diagonal()).sum() + 1e-300) / (Vector(M.diagonal()).sum());

  // M-orthonormal basis of the deflation space
  std::vector<Vector> defl;
  for (const Vector& d : deflation) {
    Vector v = d;
    for (const Vector& u : defl) v -= (u.dot(M * v)) * u;
    const double nrm = std::sqrt(v.dot(M * v));
    if (nrm > 1e-14) defl.push_back(v / nrm);
  }
  auto project = [&](Vector& v) {
    for (const Vector& u : defl) v -= (u.dot(M * v)) * u;
  };

  const double sigma = defl.empty() ? 0.0 : 1e-8 * scale;
  SpMat Ks = K;
  if (sigma != 0.0) Ks = K + (sigma * M).eval();
  Eigen::SimplicialLDLT<SpMat> ldlt(Ks);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("smallest_nonzero_eig: factorization failed");

  // deterministic start vector with all lattice frequencies populated
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = std::sin(1.0 + 0.7 * i) + 0.01 * i / n;
  project(v);
  double vm = std::sqrt(v.dot(M * v));
  if (vm < 1e-14)
    throw std::runtime_error("smallest_nonzero_eig: start vector deflated away");
  v /= vm;

  const Vector d_inv = M.diagonal().cwiseMax(1e-300).cwiseInverse();
  double lambda = v.dot(K * v);
  for (int it = 0; it < max_iter; ++it) {
    Vector w = ldlt.solve((M * v).eval());
    project(w);
    const double wn = std::sqrt(w.dot(M * w));
    if (wn < 1e-300)
      throw std::runtime_error("smallest_nonzero_eig: iteration broke down");
    v = w / wn;
    const double lambda_new = v.dot(K * v);
    const Vector r = K * v - lambda_new * M * v;
    const double res = std::sqrt(r.dot(d_inv.cwiseProduct(r)));
    const bool value_settled =
        std::abs(lambda_new - lambda) <= tol * std::max(std::abs(lambda_new), 1e-300);
    lambda = lambda_new;
    if (value_settled && res <= std::max(tol * std::abs(lambda), 1e-13 * scale))
      return {lambda, v};
  }
  const Vector r = K * v - lambda * M * v;
  throw std::runtime_error(
      "smallest_nonzero_eig: no convergence after " + std::to_string(max_iter) +
      " iterations, residual " + std::to_string(r.norm()));
}

SpMat submatrix(const SpMat& A, const std::vector<int>& rows,
                const std::vector<int>& cols) {
  std::vector<int> row_of(A.rows(), -1);
  for (size_t i = 0; i < rows.size(); ++i) row_of[rows[i]] = static_cast<int>(i);

  std::vector<Eigen::Triplet<double>> trips;
  for (size_t jc = 0; jc < cols.size(); ++jc)
    for (SpMat::InnerIterator it(A, cols[jc]); it; ++it) {
      const int r = row_of[it.row()];
      if (r >= 0) trips.emplace_back(r, static_cast<int>(jc), it.value());
    }
  SpMat out(static_cast<int>(rows.size()), static_cast<int>(cols.size()));
  out.setFromTriplets(trips.begin(), trips.end());
  out.makeCompressed();
  return out;
}

Vector gather(const Vector& v, const std::vector<int>& idx) {
  Vector out(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) out(i) = v(idx[i]);
  return out;
}

void scatter_add(Vector& v, const std::vector<int>& idx, const Vector& vals) {
  for (size_t i = 0; i < idx.size(); ++i) v(idx[i]) += vals(i);
}

}  // namespace lodlab
