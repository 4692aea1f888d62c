#include "lodlab/quasi_interp.hpp"

#include "lodlab/linalg.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace lodlab {

OperatorKind operator_kind_from_string(const std::string& name) {
  if (name == "clement") return OperatorKind::Clement;
  if (name == "pu-clement") return OperatorKind::PUClement;
  if (name == "aw-clement") return OperatorKind::AWClement;
  if (name == "proj") return OperatorKind::Proj;
  if (name == "aw-proj") return OperatorKind::AWProj;
  throw std::invalid_argument(
      "unknown operator kind '" + name +
      "' (expected clement | pu-clement | aw-clement | proj | aw-proj)");
}

std::string to_string(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::Clement: return "clement";
    case OperatorKind::PUClement: return "pu-clement";
    case OperatorKind::AWClement: return "aw-clement";
    case OperatorKind::Proj: return "proj";
    case OperatorKind::AWProj: return "aw-proj";
  }
  return "?";
}

bool is_weighted(OperatorKind kind) {
  return kind == OperatorKind::AWClement || kind == OperatorKind::AWProj;
}

bool is_projective(OperatorKind kind) {
  return kind == OperatorKind::Proj || kind == OperatorKind::AWProj;
}

namespace {

std::vector<int> interior_vertices(const Triangulation& mesh) {
  std::vector<int> out;
  for (int v = 0; v < mesh.num_vertices(); ++v)
    if (!mesh.boundary_vertex[v]) out.push_back(v);
  return out;
}

}  // namespace

SpMat interior_prolongation(const MeshHierarchy& hier) {
  return submatrix(hier.prolongation, interior_vertices(hier.fine),
                   interior_vertices(hier.coarse));
}

namespace {

// Rows (a v, hat_z) / (a, hat_z) realized through the weighted fine mass.
InterpolationOperator build_mass_average(const MeshHierarchy& hier,
                                         const Vector& a_fine,
                                         OperatorKind kind) {
  const SpMat M = assemble_weighted_mass_full(hier.fine, a_fine);
  SpMat W = SpMat(hier.prolongation.transpose()) * M;  // coarse_nv x fine_nv
  const Vector denom = W * Vector::Ones(hier.fine.num_vertices());

  const std::vector<int> coarse_int = interior_vertices(hier.coarse);
  const std::vector<int> fine_int = interior_vertices(hier.fine);
  SpMat rows = submatrix(W, coarse_int, fine_int);
  for (int c = 0; c < rows.outerSize(); ++c)
    for (SpMat::InnerIterator it(rows, c); it; ++it)
      it.valueRef() /= denom(coarse_int[it.row()]);

  InterpolationOperator op;
  op.kind = kind;
  op.matrix = std::move(rows);
  op.hier = &hier;
  if (is_weighted(kind)) op.fine_coeff = a_fine;
  return op;
}

}  // namespace

InterpolationOperator build_clement(const MeshHierarchy& hier) {
  return build_mass_average(hier, Vector::Ones(hier.fine.num_triangles()),
                            OperatorKind::Clement);
}

InterpolationOperator build_aweighted(const MeshHierarchy& hier,
                                      const RasterCoefficient& coeff) {
  return build_mass_average(hier, sample_on_mesh(coeff.grid, hier.fine),
                            OperatorKind::AWClement);
}

InterpolationOperator build_pu_clement(const MeshHierarchy& hier) {
  const Triangulation& fine = hier.fine;
  const Triangulation& coarse = hier.coarse;
  const std::vector<int> coarse_int = interior_vertices(coarse);
  const std::vector<int> fine_int = interior_vertices(fine);
  std::vector<int> coarse_row(coarse.num_vertices(), -1);
  for (size_t i = 0; i < coarse_int.size(); ++i) coarse_row[coarse_int[i]] = int(i);
  std::vector<int> fine_col(fine.num_vertices(), -1);
  for (size_t i = 0; i < fine_int.size(); ++i) fine_col[fine_int[i]] = int(i);

  // interior degree-2 rule; quadrature nodes never hit the boundary where
  // the interior-hat sum vanishes
  static const double bary[3][3] = {{2.0 / 3, 1.0 / 6, 1.0 / 6},
                                    {1.0 / 6, 2.0 / 3, 1.0 / 6},
                                    {1.0 / 6, 1.0 / 6, 2.0 / 3}};

  std::vector<Eigen::Triplet<double>> numer;
  Vector denom = Vector::Zero(coarse.num_vertices());
  std::vector<std::pair<int, double>> hats;
  for (int t = 0; t < fine.num_triangles(); ++t) {
    const double w = fine.triangle_area() / 3.0;
    for (int p = 0; p < 3; ++p) {
      double x = 0.0, y = 0.0;
      for (int k = 0; k < 3; ++k) {
        const int v = fine.triangles(t, k);
        x += bary[p][k] * fine.vertices(v, 0);
        y += bary[p][k] * fine.vertices(v, 1);
      }
      hats.clear();
      hat_values_at(coarse, x, y, hats);
      double s = 0.0;
      for (const auto& [cz, val] : hats)
        if (coarse_row[cz] >= 0) s += val;
      if (s <= 0.0) continue;  // only on the two all-boundary corner triangles
      for (const auto& [cz, val] : hats) {
        if (coarse_row[cz] < 0 || val == 0.0) continue;
        const double weight = w * val / s;
        denom(cz) += weight;
        for (int k = 0; k < 3; ++k) {
          const int fv = fine.triangles(t, k);
          if (fine_col[fv] >= 0)
            numer.emplace_back(coarse_row[cz], fine_col[fv], weight * bary[p][k]);
        }
      }
    }
  }

  SpMat rows(int(coarse_int.size()), int(fine_int.size()));
  rows.setFromTriplets(numer.begin(), numer.end());
  rows.makeCompressed();
  for (int c = 0; c < rows.outerSize(); ++c)
    for (SpMat::InnerIterator it(rows, c); it; ++it)
      it.valueRef() /= denom(coarse_int[it.row()]);

  InterpolationOperator op;
  op.kind = OperatorKind::PUClement;
  op.matrix = std::move(rows);
  op.hier = &hier;
  return op;
}

InterpolationOperator build_local_proj(const MeshHierarchy& hier,
                                       const RasterCoefficient* coeff) {
  const Triangulation& fine = hier.fine;
  const Triangulation& coarse = hier.coarse;
  const Vector a = coeff ? sample_on_mesh(coeff->grid, fine)
                         : Vector::Ones(fine.num_triangles());

  const std::vector<int> coarse_int = interior_vertices(coarse);
  const std::vector<int> fine_int = interior_vertices(fine);
  std::vector<int> fine_col(fine.num_vertices(), -1);
  for (size_t i = 0; i < fine_int.size(); ++i) fine_col[fine_int[i]] = int(i);

  std::vector<Eigen::Triplet<double>> trips;
  std::vector<std::pair<int, double>> hats;
  std::vector<int> vloc(fine.num_vertices(), -1);
  for (size_t zi = 0; zi < coarse_int.size(); ++zi) {
    const int z = coarse_int[zi];
    const Patch patch = nodal_patch(hier, z, 1);

    // fine triangles and vertices of the closed patch
    std::vector<int> tris;
    for (int ct : patch.coarse_triangles)
      for (int ft : hier.child_map[ct]) tris.push_back(ft);
    std::vector<int> verts;
    for (int ft : tris)
      for (int k = 0; k < 3; ++k) verts.push_back(fine.triangles(ft, k));
    std::sort(verts.begin(), verts.end());
    verts.erase(std::unique(verts.begin(), verts.end()), verts.end());
    for (size_t i = 0; i < verts.size(); ++i) vloc[verts[i]] = int(i);

    // interior coarse vertices whose hats meet the patch
    std::vector<int> zetas;
    for (int ct : patch.coarse_triangles)
      for (int k = 0; k < 3; ++k) {
        const int c = coarse.triangles(ct, k);
        if (!coarse.boundary_vertex[c]) zetas.push_back(c);
      }
    std::sort(zetas.begin(), zetas.end());
    zetas.erase(std::unique(zetas.begin(), zetas.end()), zetas.end());
    const int nz = int(zetas.size());
    const int local_z =
        int(std::lower_bound(zetas.begin(), zetas.end(), z) - zetas.begin());

    // nodal values of the local coarse hats at the patch fine vertices
    Eigen::MatrixXd hat_vals = Eigen::MatrixXd::Zero(int(verts.size()), nz);
    for (size_t i = 0; i < verts.size(); ++i) {
      hats.clear();
      hat_values_at(coarse, fine.vertices(verts[i], 0),
                    fine.vertices(verts[i], 1), hats);
      for (const auto& [cz, val] : hats) {
        const auto it = std::lower_bound(zetas.begin(), zetas.end(), cz);
        if (it != zetas.end() && *it == cz)
          hat_vals(int(i), int(it - zetas.begin())) = val;
      }
    }

    Eigen::MatrixXd Mz = Eigen::MatrixXd::Zero(nz, nz);
    Eigen::MatrixXd Bz = Eigen::MatrixXd::Zero(nz, int(verts.size()));
    for (int ft : tris) {
      const double w = a(ft) * fine.triangle_area() / 12.0;
      int l[3];
      for (int k = 0; k < 3; ++k) l[k] = vloc[fine.triangles(ft, k)];
      for (int zr = 0; zr < nz; ++zr) {
        const double u0 = hat_vals(l[0], zr), u1 = hat_vals(l[1], zr),
                     u2 = hat_vals(l[2], zr);
        const double us = u0 + u1 + u2;
        if (us == 0.0) continue;
        for (int zc = zr; zc < nz; ++zc) {
          const double v0 = hat_vals(l[0], zc), v1 = hat_vals(l[1], zc),
                       v2 = hat_vals(l[2], zc);
          const double m =
              w * (us * (v0 + v1 + v2) + u0 * v0 + u1 * v1 + u2 * v2);
          Mz(zr, zc) += m;
          if (zc != zr) Mz(zc, zr) += m;
        }
        Bz(zr, l[0]) += w * (us + u0);
        Bz(zr, l[1]) += w * (us + u1);
        Bz(zr, l[2]) += w * (us + u2);
      }
    }

    Eigen::LDLT<Eigen::MatrixXd> ldlt(Mz);
    if (ldlt.info() != Eigen::Success)
      throw std::runtime_error(
          "build_local_proj: singular local mass at vertex " + std::to_string(z));
    const Vector wz = ldlt.solve(Vector::Unit(nz, local_z));
    const Vector row = Bz.transpose() * wz;
    for (size_t i = 0; i < verts.size(); ++i)
      if (fine_col[verts[i]] >= 0 && row(int(i)) != 0.0)
        trips.emplace_back(int(zi), fine_col[verts[i]], row(int(i)));
  }

  InterpolationOperator op;
  op.kind = coeff ? OperatorKind::AWProj : OperatorKind::Proj;
  op.matrix.resize(int(coarse_int.size()), int(fine_int.size()));
  op.matrix.setFromTriplets(trips.begin(), trips.end());
  op.matrix.makeCompressed();
  op.hier = &hier;
  if (coeff) op.fine_coeff = a;
  return op;
}

InterpolationOperator build_operator(OperatorKind kind, const MeshHierarchy& hier,
                                     const RasterCoefficient& coeff) {
  switch (kind) {
    case OperatorKind::Clement: return build_clement(hier);
    case OperatorKind::PUClement: return build_pu_clement(hier);
    case OperatorKind::AWClement: return build_aweighted(hier, coeff);
    case OperatorKind::Proj: return build_local_proj(hier, nullptr);
    case OperatorKind::AWProj: return build_local_proj(hier, &coeff);
  }
  throw std::logic_error("build_operator: bad kind");
}

Eigen::MatrixXd coarse_restriction(const InterpolationOperator& op) {
  return Eigen::MatrixXd(op.matrix * interior_prolongation(*op.hier));
}

QI2Report verify_qi2(const InterpolationOperator& op) {
  const Eigen::MatrixXd R = coarse_restriction(op);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(R, Eigen::ComputeThinV);
  QI2Report rep;
  rep.largest_singular_value = svd.singularValues()(0);
  rep.smallest_singular_value = svd.singularValues()(R.rows() - 1);
  rep.invertible =
      rep.smallest_singular_value > 1e-12 * rep.largest_singular_value;
  if (!rep.invertible) rep.near_null = svd.matrixV().col(R.rows() - 1);
  return rep;
}

QIConstants estimate_qi3(const InterpolationOperator& op,
                         const RasterCoefficient& coeff) {
  const MeshHierarchy& hier = *op.hier;
  const Triangulation& fine = hier.fine;
  const Vector a = sample_on_mesh(coeff.grid, fine);
  const DofMap dofs = make_dof_map(fine);
  const SpMat P_int = interior_prolongation(hier);
  const SpMat op_T = op.matrix.transpose();
  const SpMat P_T = P_int.transpose();
  const double H_T = hier.coarse.mesh_size;

  QIConstants out;
  out.per_triangle = Vector::Zero(hier.coarse.num_triangles());
  if (is_projective(op.kind)) out.c_qip_prime = 1.0;

  for (int T = 0; T < hier.coarse.num_triangles(); ++T) {
    // element-local norm matrix H^-2 M_T + K_T on interior dofs
    const std::vector<int>& tris = hier.child_map[T];
    const SpMat S_T = restrict_interior(
        SpMat(assemble_mass_masked(fine, a, tris) / (H_T * H_T) +
              assemble_stiffness_masked(fine, a, tris)),
        dofs);

    const Patch patch = element_neighborhood(hier, T);
    std::vector<int> pat_tris;
    for (int ct : patch.coarse_triangles)
      for (int ft : hier.child_map[ct]) pat_tris.push_back(ft);
    std::vector<int> loc;
    for (int v : patch.fine_vertices_interior)
      loc.push_back(dofs.vertex_to_dof[v]);
    if (loc.empty()) continue;

    const SpMat K_omega = submatrix(
        restrict_interior(assemble_stiffness_masked(fine, a, pat_tris), dofs),
        loc, loc);
    Eigen::SimplicialLDLT<SpMat> ldlt(K_omega);
    if (ldlt.info() != Eigen::Success)
      throw std::runtime_error(
          "estimate_qi3: patch stiffness factorization failed");

    auto apply_A = [&](const Vector& x_loc) {
      Vector v = Vector::Zero(dofs.size());
      for (size_t i = 0; i < loc.size(); ++i) v(loc[i]) = x_loc(int(i));
      const Vector e = v - P_int * (op.matrix * v).eval();
      const Vector s = S_T * e;
      const Vector Av = s - op_T * (P_T * s).eval();
      return gather(Av, loc);
    };

    Vector x(int(loc.size()));
    for (size_t i = 0; i < loc.size(); ++i)
      x(int(i)) = std::sin(0.37 + 1.3 * double(i));
    x /= x.norm();
    double mu = 0.0;
    for (int it = 0; it < 30; ++it) {
      const Vector Ax = apply_A(x);
      const double mu_new = x.dot(Ax) / x.dot(K_omega * x);
      Vector y = ldlt.solve(Ax);
      const double yn = y.norm();
      if (yn < 1e-300) break;
      x = y / yn;
      const bool settled =
          it > 2 && std::abs(mu_new - mu) <= 1e-4 * std::abs(mu_new);
      mu = mu_new;
      if (settled) break;
    }
    out.per_triangle(T) = std::sqrt(std::max(mu, 0.0));
  }
  out.c_qip = out.per_triangle.maxCoeff();

  // hat-based weighted inverse-estimate constants per element
  std::vector<std::pair<int, double>> hats;
  double c1 = 0.0, c2 = 0.0;
  for (int T = 0; T < hier.coarse.num_triangles(); ++T) {
    double int_a = 0.0;
    Eigen::Vector3d int_a_hat = Eigen::Vector3d::Zero();
    Eigen::Vector3d int_a_hat2 = Eigen::Vector3d::Zero();
    for (int ft : hier.child_map[T]) {
      const double w = a(ft) * fine.triangle_area();
      int_a += w;
      double u[3][3];  // hat of coarse corner c at fine vertex k
      for (int k = 0; k < 3; ++k) {
        hats.clear();
        hat_values_at(hier.coarse, fine.vertices(fine.triangles(ft, k), 0),
                      fine.vertices(fine.triangles(ft, k), 1), hats);
        for (int c = 0; c < 3; ++c) {
          u[c][k] = 0.0;
          for (const auto& [cz, val] : hats)
            if (cz == hier.coarse.triangles(T, c)) u[c][k] = val;
        }
      }
      for (int c = 0; c < 3; ++c) {
        const double us = u[c][0] + u[c][1] + u[c][2];
        int_a_hat(c) += w * us / 3.0;
        int_a_hat2(c) += w / 12.0 * (us * us + u[c][0] * u[c][0] +
                                     u[c][1] * u[c][1] + u[c][2] * u[c][2]);
      }
    }
    for (int c = 0; c < 3; ++c) {
      c1 = std::max(c1, int_a / int_a_hat(c));
      c2 = std::max(c2, std::sqrt(int_a / int_a_hat2(c)));
    }
  }
  out.c_inv1 = c1;
  out.c_inv2 = c2;
  return out;
}

namespace {

// Exact integration of a piecewise-quadratic integrand between breakpoints
// (Simpson per segment; evaluation points nudged inward so the integrand is
// sampled on the correct side of each breakpoint).
double integrate_segments(const std::vector<double>& breaks,
                          const std::function<double(double)>& f) {
  double total = 0.0;
  for (size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double a = breaks[i], b = breaks[i + 1];
    if (b <= a) continue;
    const double h = b - a;
    total += h / 6.0 *
             (f(a + 1e-12 * h) + 4.0 * f(0.5 * (a + b)) + f(b - 1e-12 * h));
  }
  return total;
}

std::vector<double> merged_breaks(std::initializer_list<double> pts) {
  std::vector<double> v(pts);
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end(),
                      [](double a, double b) { return std::abs(a - b) < 1e-15; }),
          v.end());
  return v;
}

double piecewise_linear(const std::vector<double>& nodes,
                        const std::vector<double>& values, double x) {
  if (x <= nodes.front()) return values.front();
  if (x >= nodes.back()) return values.back();
  const auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
  const size_t i = size_t(it - nodes.begin()) - 1;
  const double t = (x - nodes[i]) / (nodes[i + 1] - nodes[i]);
  return (1.0 - t) * values[i] + t * values[i + 1];
}

}  // namespace

EtaConstruction1D eta_1d(double y, double eps, double beta) {
  if (!(eps > 0.0 && eps < y && y < 1.0 && 2.0 * y > eps && y + eps < 1.0))
    throw std::invalid_argument(
        "eta_1d: degenerate geometry (need 0 < eps < y, y + eps < 1, 2y > eps)");
  if (beta < 1.0) throw std::invalid_argument("eta_1d: beta must be >= 1");

  EtaConstruction1D out;
  out.y = y;
  out.eps = eps;
  out.beta = beta;
  out.b1 = -y * y * (3.0 - 3.0 * y - 2.0 * eps) / (eps * (2.0 * y - eps));
  // back-substitution into (4y(1-y) - eps) b1 + y eps b2 = 4y^2(1-y)
  out.b2 =
      (4.0 * y * y * (1.0 - y) - (4.0 * y * (1.0 - y) - eps) * out.b1) /
      (y * eps);

  out.nodes = {0.0, y, 1.0, 2.0 - y, 2.0};
  out.values = {0.0, out.b1, out.b2, out.b1, 0.0};

  auto a_of = [&](double x) {
    if ((x > y - eps && x < y + eps) || (x > 2.0 - y - eps && x < 2.0 - y + eps))
      return beta;
    return 1.0;
  };
  auto eta = [&](double x) { return piecewise_linear(out.nodes, out.values, x); };
  auto hat_center = [](double x) { return x <= 1.0 ? x : 2.0 - x; };
  auto hat_left = [](double x) { return x <= 1.0 ? 1.0 - x : 0.0; };
  auto hat_right = [](double x) { return x >= 1.0 ? x - 1.0 : 0.0; };

  const std::vector<double> breaks =
      merged_breaks({0.0, y - eps, y, y + eps, 1.0, 2.0 - y - eps, 2.0 - y,
                     2.0 - y + eps, 2.0});
  auto integral = [&](std::function<double(double)> f) {
    return integrate_segments(breaks, f);
  };

  const double a_hat = integral([&](double x) { return a_of(x) * hat_center(x); });
  const double a_hat_eta =
      integral([&](double x) { return a_of(x) * hat_center(x) * eta(x); });
  const double a_left = integral([&](double x) { return a_of(x) * hat_left(x); });
  const double a_left_eta =
      integral([&](double x) { return a_of(x) * hat_left(x) * eta(x); });
  const double a_right = integral([&](double x) { return a_of(x) * hat_right(x); });
  const double a_right_eta =
      integral([&](double x) { return a_of(x) * hat_right(x) * eta(x); });

  out.nodal_deviation =
      std::max({std::abs(a_hat_eta / a_hat - 1.0),
                std::abs(a_left_eta) / a_left, std::abs(a_right_eta) / a_right});

  auto eta_prime = [&](double x) {
    return x < y ? out.b1 / y : (x < 1.0 ? (out.b2 - out.b1) / (1.0 - y) : 0.0);
  };
  const std::vector<double> breaks01 =
      merged_breaks({0.0, y - eps, y, y + eps, 1.0});
  const double energy_eta = integrate_segments(breaks01, [&](double x) {
    return a_of(x) * eta_prime(x) * eta_prime(x);
  });
  const double energy_hat =
      integrate_segments(breaks01, [&](double x) { return a_of(x); });
  out.energy_ratio = energy_eta / energy_hat;
  out.grad_expression = (out.b1 / y) * (out.b1 / y) +
                        ((out.b2 - out.b1) / (1.0 - y)) *
                            ((out.b2 - out.b1) / (1.0 - y));
  return out;
}

double mu_min_1d(double y, double eps, double beta) {
  if (!(eps > 0.0 && eps < y && y < 1.0 && y + eps < 1.0))
    throw std::invalid_argument("mu_min_1d: degenerate geometry");
  if (beta < 1.0) throw std::invalid_argument("mu_min_1d: beta must be >= 1");

  auto a_of = [&](double x) { return (x > y - eps && x < y + eps) ? beta : 1.0; };
  std::function<double(double)> hats[3] = {
      [](double x) { return x <= 1.0 ? 1.0 - x : 0.0; },
      [](double x) { return x <= 1.0 ? x : 2.0 - x; },
      [](double x) { return x >= 1.0 ? x - 1.0 : 0.0; }};
  const std::vector<double> breaks =
      merged_breaks({0.0, y - eps, y, y + eps, 1.0, 2.0});

  Eigen::Matrix3d M;
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) {
      const double v = integrate_segments(breaks, [&](double x) {
        return a_of(x) * hats[i](x) * hats[j](x);
      });
      M(i, j) = v;
      M(j, i) = v;
    }
  const Eigen::Matrix3d D = Eigen::Matrix3d(M.diagonal().asDiagonal());
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::Matrix3d> es(M, D);
  return es.eigenvalues().minCoeff();
}

}  // namespace lodlab
