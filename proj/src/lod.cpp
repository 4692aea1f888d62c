#include "lodlab/lod.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <stdexcept>
#include <thread>

namespace lodlab {

int LodProblem::coarse_dof(int vertex) const {
  const auto it =
      std::lower_bound(coarse_interior.begin(), coarse_interior.end(), vertex);
  if (it == coarse_interior.end() || *it != vertex)
    throw std::invalid_argument("coarse_dof: vertex " + std::to_string(vertex) +
                                " is not an interior coarse vertex");
  return int(it - coarse_interior.begin());
}

Vector LodProblem::prolonged_hat(int coarse_dof) const {
  return prolongation.col(coarse_dof);
}

LodProblem make_lod_problem(const MeshHierarchy& hier,
                            const RasterCoefficient& coeff) {
  LodProblem prob;
  prob.hier = &hier;
  prob.a_fine = sample_on_mesh(coeff.grid, hier.fine);
  prob.fine_dofs = make_dof_map(hier.fine);
  prob.stiffness =
      restrict_interior(assemble_stiffness_full(hier.fine, prob.a_fine),
                        prob.fine_dofs);
  prob.prolongation = interior_prolongation(hier);
  for (int v = 0; v < hier.coarse.num_vertices(); ++v)
    if (!hier.coarse.boundary_vertex[v]) prob.coarse_interior.push_back(v);
  return prob;
}

namespace {

// Constraint rows of the operator restricted to the patch dofs: rows with
// support in the patch, near-zero rows dropped, exact duplicates dropped.
SpMat constraint_block(const InterpolationOperator& op,
                       const std::vector<int>& patch_dofs) {
  std::vector<int> all_rows(op.matrix.rows());
  for (int i = 0; i < op.matrix.rows(); ++i) all_rows[i] = i;
  SpMat C = submatrix(op.matrix, all_rows, patch_dofs);

  // row norms on the restriction
  Vector norms = Vector::Zero(C.rows());
  for (int c = 0; c < C.outerSize(); ++c)
    for (SpMat::InnerIterator it(C, c); it; ++it)
      norms(it.row()) += it.value() * it.value();

  std::vector<int> keep;
  for (int i = 0; i < C.rows(); ++i)
    if (std::sqrt(norms(i)) > 1e-12) keep.push_back(i);

  std::vector<int> all_cols(C.cols());
  for (int i = 0; i < C.cols(); ++i) all_cols[i] = i;
  SpMat kept = submatrix(C, keep, all_cols);

  // drop exact duplicate rows (compare compressed row patterns and values)
  Eigen::SparseMatrix<double, Eigen::RowMajor> rm(kept);
  std::vector<int> unique_rows;
  for (int i = 0; i < rm.rows(); ++i) {
    bool dup = false;
    for (int j : unique_rows) {
      if (rm.outerIndexPtr()[i + 1] - rm.outerIndexPtr()[i] !=
          rm.outerIndexPtr()[j + 1] - rm.outerIndexPtr()[j])
        continue;
      bool same = true;
      for (int a = rm.outerIndexPtr()[i], b = rm.outerIndexPtr()[j];
           a < rm.outerIndexPtr()[i + 1]; ++a, ++b) {
        if (rm.innerIndexPtr()[a] != rm.innerIndexPtr()[b] ||
            rm.valuePtr()[a] != rm.valuePtr()[b]) {
          same = false;
          break;
        }
      }
      if (same) {
        dup = true;
        break;
      }
    }
    if (!dup) unique_rows.push_back(i);
  }
  if (int(unique_rows.size()) == kept.rows()) return kept;
  return submatrix(kept, unique_rows, all_cols);
}

std::vector<int> patch_dof_list(const LodProblem& prob, const Patch& patch) {
  std::vector<int> dofs;
  dofs.reserve(patch.fine_vertices_interior.size());
  for (int v : patch.fine_vertices_interior)
    dofs.push_back(prob.fine_dofs.vertex_to_dof[v]);
  return dofs;
}

Corrector solve_corrector_on_patch(const LodProblem& prob,
                                   const InterpolationOperator& op, int z,
                                   int order, Patch patch,
                                   const Vector& rhs_full) {
  const std::vector<int> dofs = patch_dof_list(prob, patch);
  const SpMat K_loc = submatrix(prob.stiffness, dofs, dofs);
  const SpMat C_loc = constraint_block(op, dofs);
  SaddleSolver solver(K_loc, C_loc);
  const Vector u_loc = solver.solve_primal(gather(rhs_full, dofs));

  Corrector cor;
  cor.node = z;
  cor.order = order;
  cor.values = Vector::Zero(prob.fine_size());
  scatter_add(cor.values, dofs, u_loc);
  cor.patch = std::move(patch);
  return cor;
}

}  // namespace

Corrector corrector_global(const LodProblem& prob,
                           const InterpolationOperator& op, int z) {
  const int k_sat = 2 * prob.hier->coarse.n;
  Patch patch = nodal_patch(*prob.hier, z, k_sat);
  const Vector rhs = prob.stiffness * prob.prolonged_hat(prob.coarse_dof(z));
  return solve_corrector_on_patch(prob, op, z, kGlobal, std::move(patch), rhs);
}

Corrector corrector_local(const LodProblem& prob, const InterpolationOperator& op,
                          int z, int k) {
  if (k < 1) throw std::invalid_argument("corrector_local: k must be >= 1");
  Patch patch = nodal_patch(*prob.hier, z, k);
  const Vector rhs = prob.stiffness * prob.prolonged_hat(prob.coarse_dof(z));
  return solve_corrector_on_patch(prob, op, z, k, std::move(patch), rhs);
}

Vector corrector_element_twostep(const LodProblem& prob,
                                 const InterpolationOperator& op, int T, int y,
                                 int k) {
  const MeshHierarchy& hier = *prob.hier;
  bool y_in_T = false;
  for (int c = 0; c < 3; ++c)
    if (hier.coarse.triangles(T, c) == y) y_in_T = true;
  if (!y_in_T)
    throw std::invalid_argument("corrector_element_twostep: vertex " +
                                std::to_string(y) + " is not a vertex of " +
                                std::to_string(T));

  const SpMat K_T = restrict_interior(
      assemble_stiffness_masked(hier.fine, prob.a_fine, hier.child_map[T]),
      prob.fine_dofs);
  const Vector rhs = K_T * prob.prolonged_hat(prob.coarse_dof(y));

  Patch patch = element_patch(hier, T, k);
  const Corrector cor =
      solve_corrector_on_patch(prob, op, y, k, std::move(patch), rhs);
  return cor.values;
}

Corrector assemble_twostep(const LodProblem& prob,
                           const InterpolationOperator& op, int z, int k) {
  const MeshHierarchy& hier = *prob.hier;
  Corrector cor;
  cor.node = z;
  cor.order = k;
  cor.values = Vector::Zero(prob.fine_size());
  for (int T : hier.coarse.vertex_to_triangles()[z])
    cor.values += corrector_element_twostep(prob, op, T, z, k);
  // support patch: union of the element patches = nodal patch grown by k-1
  cor.patch = nodal_patch(hier, z, k);
  return cor;
}

CorrectorSet compute_correctors(const LodProblem& prob,
                                const InterpolationOperator& op, int k,
                                Localization localization, int workers) {
  const int nc = prob.coarse_size();
  CorrectorSet set;
  set.kind = op.kind;
  set.k = k;
  set.localization = localization;

  const int k_sat = 2 * prob.hier->coarse.n;
  const bool global = (k == kGlobal);
  const int order = global ? k_sat : k;

  // patches are built up front (single-threaded construction), solves are
  // independent
  std::vector<Patch> patches(nc);
  bool all_cover = true;
  for (int zi = 0; zi < nc; ++zi) {
    patches[zi] = nodal_patch(*prob.hier, prob.coarse_interior[zi], order);
    all_cover = all_cover && patches[zi].covers_all(*prob.hier);
  }

  std::vector<Vector> columns(nc);
  std::vector<std::vector<int>> col_dofs(nc);
  if (localization == Localization::Nodal) {
    set.solves = nc;
  } else {
    set.solves = 0;
    for (int zi = 0; zi < nc; ++zi)
      set.solves += long(
          prob.hier->coarse.vertex_to_triangles()[prob.coarse_interior[zi]].size());
  }

  if (all_cover && localization == Localization::Nodal) {
    // every patch is the full domain: one factorization, many right sides
    std::vector<int> dofs(prob.fine_size());
    for (int i = 0; i < prob.fine_size(); ++i) dofs[i] = i;
    const SpMat C = constraint_block(op, dofs);
    SaddleSolver solver(prob.stiffness, C);
    for (int zi = 0; zi < nc; ++zi) {
      columns[zi] =
          solver.solve_primal(prob.stiffness * prob.prolongation.col(zi));
      col_dofs[zi] = dofs;
    }
  } else {
    auto work = [&](int begin, int end) {
      for (int zi = begin; zi < end; ++zi) {
        const int z = prob.coarse_interior[zi];
        Corrector cor =
            localization == Localization::Nodal
                ? solve_corrector_on_patch(
                      prob, op, z, order, patches[zi],
                      prob.stiffness * prob.prolongation.col(zi))
                : assemble_twostep(prob, op, z, order);
        col_dofs[zi] = patch_dof_list(prob, cor.patch);
        columns[zi] = gather(cor.values, col_dofs[zi]);
      }
    };
    const int nw = std::max(1, std::min(workers, nc));
    if (nw == 1) {
      work(0, nc);
    } else {
      std::vector<std::thread> threads;
      const int chunk = (nc + nw - 1) / nw;
      for (int w = 0; w < nw; ++w) {
        const int begin = w * chunk, end = std::min(nc, (w + 1) * chunk);
        if (begin < end) threads.emplace_back(work, begin, end);
      }
      for (auto& t : threads) t.join();
    }
  }

  std::vector<Eigen::Triplet<double>> trips;
  for (int zi = 0; zi < nc; ++zi)
    for (size_t i = 0; i < col_dofs[zi].size(); ++i)
      if (columns[zi](int(i)) != 0.0)
        trips.emplace_back(col_dofs[zi][i], zi, columns[zi](int(i)));
  set.phi.resize(prob.fine_size(), nc);
  set.phi.setFromTriplets(trips.begin(), trips.end());
  set.phi.makeCompressed();
  set.psi = prob.prolongation - set.phi;
  return set;
}

CoarseSolution solve_coarse(const LodProblem& prob, const CorrectorSet& set,
                            const Vector& load_interior) {
  if (load_interior.size() != prob.fine_size())
    throw std::invalid_argument("solve_coarse: load size mismatch");

  const SpMat G = SpMat(set.psi.transpose()) * (prob.stiffness * set.psi);
  Eigen::SimplicialLDLT<SpMat> ldlt(G);
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0)
    throw std::runtime_error(
        "solve_coarse: coarse stiffness is not positive definite (corrector "
        "corruption?)");

  CoarseSolution sol;
  sol.k = set.k;
  sol.kind = set.kind;
  sol.coefficients = ldlt.solve(Vector(set.psi.transpose() * load_interior));
  sol.lifted = set.psi * sol.coefficients;
  return sol;
}

CoarseSolution solve_coarse(const MeshHierarchy& hier,
                            const RasterCoefficient& coeff,
                            const InterpolationOperator& op, const RasterGrid& g,
                            int k, Localization localization, int workers) {
  const LodProblem prob = make_lod_problem(hier, coeff);
  const CorrectorSet set = compute_correctors(prob, op, k, localization, workers);
  const Vector load = assemble_load(hier.fine, g, prob.fine_dofs);
  return solve_coarse(prob, set, load);
}

std::vector<std::pair<int, double>> decay_profile(
    const LodProblem& prob, const Corrector& global_corrector,
    const std::vector<int>& k_values) {
  const MeshHierarchy& hier = *prob.hier;
  std::vector<std::pair<int, double>> out;
  for (int k : k_values) {
    const Patch patch = nodal_patch(hier, global_corrector.node, k);
    std::vector<char> in_patch(hier.coarse.num_triangles(), 0);
    for (int t : patch.coarse_triangles) in_patch[t] = 1;
    std::vector<int> outside;
    for (int ct = 0; ct < hier.coarse.num_triangles(); ++ct)
      if (!in_patch[ct])
        for (int ft : hier.child_map[ct]) outside.push_back(ft);
    double tail = 0.0;
    if (!outside.empty()) {
      const SpMat K_out = restrict_interior(
          assemble_stiffness_masked(hier.fine, prob.a_fine, outside),
          prob.fine_dofs);
      tail = std::sqrt(std::max(
          0.0, global_corrector.values.dot(K_out * global_corrector.values)));
    }
    out.emplace_back(k, tail);
  }
  return out;
}

}  // namespace lodlab
