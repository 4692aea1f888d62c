#include "doctest.h"
#include "lodlab/quasi_interp.hpp"
#include "oracles.hpp"

#include <random>

using namespace lodlab;

namespace {

RasterCoefficient constant_coeff(double value) {
  RasterGrid g;
  g.nx = g.ny = 1;
  g.values = Eigen::ArrayXXd::Constant(1, 1, value);
  return coefficient_from_grid(std::move(g), "const");
}

Vector full_from_interior(const Triangulation& fine, const Vector& interior) {
  Vector full = Vector::Zero(fine.num_vertices());
  int d = 0;
  for (int v = 0; v < fine.num_vertices(); ++v)
    if (!fine.boundary_vertex[v]) full(v) = interior(d++);
  return full;
}

Vector random_interior(const Triangulation& fine, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  int n = 0;
  for (int v = 0; v < fine.num_vertices(); ++v)
    if (!fine.boundary_vertex[v]) ++n;
  Vector x(n);
  for (int i = 0; i < n; ++i) x(i) = uni(rng);
  return x;
}

std::vector<int> interior_coarse(const Triangulation& coarse) {
  std::vector<int> out;
  for (int v = 0; v < coarse.num_vertices(); ++v)
    if (!coarse.boundary_vertex[v]) out.push_back(v);
  return out;
}

}  // namespace

TEST_CASE("operator kind strings") {
  for (const char* name : {"clement", "pu-clement", "aw-clement", "proj", "aw-proj"})
    CHECK(to_string(operator_kind_from_string(name)) == name);
  CHECK_THROWS_AS(operator_kind_from_string("spectral"), std::invalid_argument);
}

TEST_CASE("clement rows reproduce the averaged nodal values of the quadrature oracle") {
  const MeshHierarchy hier = build_hierarchy(4, 4, 16);
  const InterpolationOperator op = build_clement(hier);

  CHECK(op.apply(Vector::Zero(op.matrix.cols())).cwiseAbs().maxCoeff() == 0.0);

  const Vector v_int = random_interior(hier.fine, 17);
  const Vector v_full = full_from_interior(hier.fine, v_int);
  const Vector vals = op.apply(v_int);
  const std::vector<int> zs = interior_coarse(hier.coarse);
  for (size_t i = 0; i < zs.size(); ++i) {
    const double numer = oracle::integrate_fine_against_coarse_hat(
        hier.fine, v_full, hier.coarse, zs[i]);
    const double denom = oracle::integrate_fine_against_coarse_hat(
        hier.fine, Vector::Ones(hier.fine.num_vertices()), hier.coarse, zs[i]);
    CHECK(vals(int(i)) == doctest::Approx(numer / denom).epsilon(1e-12));
  }
}

TEST_CASE("clement preserves constants away from the boundary") {
  const MeshHierarchy hier = build_hierarchy(8, 8, 32);
  const InterpolationOperator op = build_clement(hier);
  Vector ones_int(op.matrix.cols());
  ones_int.setOnes();  // equals 1 at every interior fine vertex
  const Vector vals = op.apply(ones_int);
  const std::vector<int> zs = interior_coarse(hier.coarse);
  for (size_t i = 0; i < zs.size(); ++i) {
    const double x = hier.coarse.vertices(zs[i], 0);
    const double y = hier.coarse.vertices(zs[i], 1);
    // nodes whose closed patch avoids the boundary strip
    if (x >= 0.25 && x <= 0.75 && y >= 0.25 && y <= 0.75)
      CHECK(vals(int(i)) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("pu-clement matches an independently coded weighted quadrature") {
  const MeshHierarchy hier = build_hierarchy(2, 2, 8);
  const InterpolationOperator op = build_pu_clement(hier);
  REQUIRE(op.matrix.rows() == 1);

  const Vector v_int = random_interior(hier.fine, 29);
  const Vector v_full = full_from_interior(hier.fine, v_int);
  const int z = hier.coarse.vertex_id(1, 1);

  // direct quadrature with geometric hat evaluation; interior degree-2 points
  double numer = 0.0, denom = 0.0;
  const std::vector<int> zs = interior_coarse(hier.coarse);
  for (int t = 0; t < hier.fine.num_triangles(); ++t) {
    for (const oracle::QuadPoint& q : oracle::quad_points(hier.fine, t)) {
      double s = 0.0;
      for (int zi : zs) s += oracle::hat_value(hier.coarse, zi, q.x, q.y);
      if (s <= 0.0) continue;
      const double lz = oracle::hat_value(hier.coarse, z, q.x, q.y);
      if (lz == 0.0) continue;
      const auto b = oracle::barycentric(hier.fine, t, q.x, q.y);
      double vval = 0.0;
      for (int k = 0; k < 3; ++k)
        vval += b[k] * v_full(hier.fine.triangles(t, k));
      numer += q.w * (lz / s) * vval;
      denom += q.w * (lz / s);
    }
  }
  CHECK(op.apply(v_int)(0) == doctest::Approx(numer / denom).epsilon(1e-10));
  CHECK(op.apply(Vector::Zero(op.matrix.cols())).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("weighted kinds degenerate to unweighted kinds for constant coefficients") {
  const MeshHierarchy hier = build_hierarchy(4, 4, 16);
  const RasterCoefficient one = constant_coeff(1.0);
  const RasterCoefficient seven = constant_coeff(7.0);

  const Eigen::MatrixXd clement(build_clement(hier).matrix);
  const Eigen::MatrixXd aw1(build_aweighted(hier, one).matrix);
  const Eigen::MatrixXd aw7(build_aweighted(hier, seven).matrix);
  CHECK((aw1 - clement).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((aw7 - clement).cwiseAbs().maxCoeff() <= 1e-12);

  const Eigen::MatrixXd proj(build_local_proj(hier, nullptr).matrix);
  const Eigen::MatrixXd awproj(build_local_proj(hier, &seven).matrix);
  CHECK((awproj - proj).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("a-weighted clement amplifies values inside a high inclusion") {
  const MeshHierarchy hier = build_hierarchy(4, 32, 32);
  const RasterCoefficient blocks = make_blocks(1e4);
  const InterpolationOperator aw = build_aweighted(hier, blocks);
  const InterpolationOperator cl = build_clement(hier);

  // fine hat spike at a vertex inside the inclusion
  const int spike_vertex = hier.fine.vertex_id(8, 12);  // (0.25, 0.375)
  REQUIRE(blocks.at(0.25 + 1e-9, 0.375 + 1e-9) == 1e4);
  Vector spike = Vector::Zero(hier.fine.num_vertices());
  spike(spike_vertex) = 1.0;
  Vector spike_int(aw.matrix.cols());
  {
    int d = 0;
    for (int v = 0; v < hier.fine.num_vertices(); ++v)
      if (!hier.fine.boundary_vertex[v]) spike_int(d++) = spike(v);
  }

  const int z = hier.coarse.vertex_id(1, 1);  // (0.25, 0.25), star meets inclusion
  const std::vector<int> zs = interior_coarse(hier.coarse);
  const int zdof =
      int(std::lower_bound(zs.begin(), zs.end(), z) - zs.begin());

  const double aw_val = aw.apply(spike_int)(zdof);
  const double cl_val = cl.apply(spike_int)(zdof);
  const double oracle_aw = oracle::integrate_fine_against_coarse_hat(
                               hier.fine, spike, hier.coarse, z, &blocks.grid) /
                           oracle::integrate_fine_against_coarse_hat(
                               hier.fine, Vector::Ones(hier.fine.num_vertices()),
                               hier.coarse, z, &blocks.grid);
  CHECK(aw_val == doctest::Approx(oracle_aw).epsilon(1e-10));

  // spike support lies inside the inclusion, so the amplification factor is
  // exactly beta * int(hat) / int(a hat), both computed by the oracle
  const Vector ones = Vector::Ones(hier.fine.num_vertices());
  const double int_hat = oracle::integrate_fine_against_coarse_hat(
      hier.fine, ones, hier.coarse, z);
  const double int_a_hat = oracle::integrate_fine_against_coarse_hat(
      hier.fine, ones, hier.coarse, z, &blocks.grid);
  const double expected_factor = 1e4 * int_hat / int_a_hat;
  CHECK(aw_val / cl_val == doctest::Approx(expected_factor).epsilon(1e-9));
  CHECK(aw_val > 2.0 * cl_val);
}

TEST_CASE("projective kinds reproduce coarse functions exactly") {
  const MeshHierarchy hier = build_hierarchy(4, 32, 32);
  const RasterCoefficient blocks = make_blocks(1e5);
  const SpMat P_int = interior_prolongation(hier);

  for (const InterpolationOperator& op :
       {build_local_proj(hier, nullptr), build_local_proj(hier, &blocks)}) {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Vector vH(op.matrix.rows());
    for (int i = 0; i < vH.size(); ++i) vH(i) = uni(rng);
    const Vector back = op.apply(P_int * vH);
    CHECK((back - vH).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("local projection row agrees with a dense least-squares oracle") {
  const MeshHierarchy hier = build_hierarchy(4, 32, 32);
  const RasterCoefficient blocks = make_blocks(100.0);
  const InterpolationOperator op = build_local_proj(hier, &blocks);

  const int z = hier.coarse.vertex_id(2, 2);
  const std::vector<int> zs = interior_coarse(hier.coarse);
  const int zdof = int(std::lower_bound(zs.begin(), zs.end(), z) - zs.begin());

  const Vector v_int = random_interior(hier.fine, 41);
  const Vector v_full = full_from_interior(hier.fine, v_int);

  // oracle: minimize the weighted L2 distance on the patch over the span of
  // the interior coarse hats, assembled by quadrature on fine triangles
  const Patch patch = nodal_patch(hier, z, 1);
  std::vector<int> patch_tris;
  for (int ct : patch.coarse_triangles)
    for (int ft : hier.child_map[ct]) patch_tris.push_back(ft);
  std::vector<int> zetas;
  for (int ct : patch.coarse_triangles)
    for (int k = 0; k < 3; ++k) {
      const int c = hier.coarse.triangles(ct, k);
      if (!hier.coarse.boundary_vertex[c]) zetas.push_back(c);
    }
  std::sort(zetas.begin(), zetas.end());
  zetas.erase(std::unique(zetas.begin(), zetas.end()), zetas.end());

  const int nz = int(zetas.size());
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(nz, nz);
  Vector rhs = Vector::Zero(nz);
  for (int t : patch_tris) {
    for (const oracle::QuadPoint& q : oracle::quad_points(hier.fine, t)) {
      const double w = q.w * blocks.at(q.x, q.y);
      Vector hat(nz);
      for (int i = 0; i < nz; ++i)
        hat(i) = oracle::hat_value(hier.coarse, zetas[i], q.x, q.y);
      const auto b = oracle::barycentric(hier.fine, t, q.x, q.y);
      double vval = 0.0;
      for (int k = 0; k < 3; ++k) vval += b[k] * v_full(hier.fine.triangles(t, k));
      G += w * hat * hat.transpose();
      rhs += w * vval * hat;
    }
  }
  const Vector gamma = G.ldlt().solve(rhs);
  const int local_z =
      int(std::lower_bound(zetas.begin(), zetas.end(), z) - zetas.begin());

  CHECK(op.apply(v_int)(zdof) == doctest::Approx(gamma(local_z)).epsilon(1e-10));
}

TEST_CASE("operator rows are local to the nodal patch") {
  const MeshHierarchy hier = build_hierarchy(4, 32, 32);
  const RasterCoefficient blocks = make_blocks(50.0);
  const std::vector<int> zs = interior_coarse(hier.coarse);
  std::vector<int> fine_int_ids;
  for (int v = 0; v < hier.fine.num_vertices(); ++v)
    if (!hier.fine.boundary_vertex[v]) fine_int_ids.push_back(v);

  for (OperatorKind kind : {OperatorKind::Clement, OperatorKind::PUClement,
                            OperatorKind::AWClement, OperatorKind::Proj,
                            OperatorKind::AWProj}) {
    const InterpolationOperator op = build_operator(kind, hier, blocks);
    Eigen::SparseMatrix<double, Eigen::RowMajor> rows(op.matrix);
    for (size_t zi = 0; zi < zs.size(); ++zi) {
      const Patch patch = nodal_patch(hier, zs[zi], 1);
      std::vector<char> in_patch(hier.fine.num_vertices(), 0);
      for (int ct : patch.coarse_triangles)
        for (int ft : hier.child_map[ct])
          for (int k = 0; k < 3; ++k) in_patch[hier.fine.triangles(ft, k)] = 1;
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator
               it(rows, int(zi));
           it; ++it)
        CHECK(in_patch[fine_int_ids[it.col()]] == 1);
    }
  }
}

TEST_CASE("verify_qi2") {
  const MeshHierarchy h2 = build_hierarchy(2, 2, 8);
  const QI2Report clem = verify_qi2(build_clement(h2));
  CHECK(clem.invertible);
  CHECK(clem.smallest_singular_value > 0.0);
  const Eigen::MatrixXd R1 = coarse_restriction(build_clement(h2));
  CHECK(R1.rows() == 1);
  CHECK(R1(0, 0) > 0.0);

  const MeshHierarchy h8 = build_hierarchy(8, 32, 32);
  const RasterCoefficient blocks = make_blocks(1e6);
  CHECK(verify_qi2(build_aweighted(h8, blocks)).invertible);

  const InterpolationOperator proj = build_local_proj(h8, &blocks);
  const Eigen::MatrixXd R = coarse_restriction(proj);
  CHECK((R - Eigen::MatrixXd::Identity(R.rows(), R.cols())).cwiseAbs().maxCoeff() <=
        1e-12);
  CHECK(verify_qi2(proj).invertible);
}

TEST_CASE("verify_qi2 reports a near-null vector for a defective operator") {
  const MeshHierarchy hier = build_hierarchy(4, 4, 8);
  InterpolationOperator broken = build_clement(hier);
  // zero out one row: the coarse restriction loses rank
  for (int c = 0; c < broken.matrix.outerSize(); ++c)
    for (SpMat::InnerIterator it(broken.matrix, c); it; ++it)
      if (it.row() == 0) it.valueRef() = 0.0;
  const QI2Report rep = verify_qi2(broken);
  CHECK_FALSE(rep.invertible);
  CHECK(rep.near_null.size() == broken.matrix.rows());
  CHECK(rep.near_null.norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("qi3 estimate is finite and stable across mesh sizes for a = 1") {
  const RasterCoefficient one = constant_coeff(1.0);
  double prev = 0.0;
  for (int nH : {4, 8}) {
    const MeshHierarchy hier = build_hierarchy(nH, nH, nH * 4);
    const QIConstants qc = estimate_qi3(build_clement(hier), one);
    CHECK(qc.c_qip > 0.0);
    CHECK(qc.c_qip < 10.0);
    CHECK(qc.c_inv1 == doctest::Approx(3.0).epsilon(1e-12));  // exact hat ratio
    if (prev > 0.0) CHECK(qc.c_qip == doctest::Approx(prev).epsilon(0.05));
    prev = qc.c_qip;
    CHECK(!qc.c_qip_prime.has_value());
  }
}

TEST_CASE("qi3: weighted projective estimates are contrast independent, unweighted grow") {
  const MeshHierarchy h8 = build_hierarchy(8, 32, 64);
  double awproj_min = 1e300, awproj_max = 0.0;
  double clement_first = 0.0, clement_last = 0.0;
  for (double beta : {1.0, 1e3, 1e6}) {
    const RasterCoefficient b = make_blocks(beta);
    const QIConstants qp = estimate_qi3(build_local_proj(h8, &b), b);
    awproj_min = std::min(awproj_min, qp.c_qip);
    awproj_max = std::max(awproj_max, qp.c_qip);
    CHECK(qp.c_qip_prime.has_value());
    CHECK(*qp.c_qip_prime == 1.0);

    const QIConstants qc = estimate_qi3(build_clement(h8), b);
    if (beta == 1.0) clement_first = qc.c_qip;
    if (beta == 1e6) clement_last = qc.c_qip;
  }
  CHECK(awproj_max / awproj_min <= 2.0);
  CHECK(clement_last >= 10.0 * clement_first);
}

TEST_CASE("qi3 estimate is scale invariant in the coefficient") {
  const MeshHierarchy h4 = build_hierarchy(4, 32, 32);
  const RasterCoefficient b = make_blocks(1e3);
  RasterCoefficient scaled = b;
  scaled.grid.values *= 5.0;
  scaled.alpha *= 5.0;
  scaled.beta *= 5.0;
  const double c1 = estimate_qi3(build_aweighted(h4, b), b).c_qip;
  const double c2 = estimate_qi3(build_aweighted(h4, scaled), scaled).c_qip;
  CHECK(c1 == doctest::Approx(c2).epsilon(1e-9));
}

TEST_CASE("eta construction: closed-form nodal values") {
  const EtaConstruction1D e = eta_1d(0.5, 0.125, 1e8);
  CHECK(e.b1 == doctest::Approx(-20.0 / 7.0).epsilon(1e-12));
  CHECK(e.b2 == doctest::Approx(48.0).epsilon(1e-12));
  CHECK(e.nodes.size() == 5);
  CHECK(e.values[1] == e.b1);
  CHECK(e.values[3] == e.b1);  // mirrored on the adjoining element
}

TEST_CASE("eta construction: interpolation identity holds up to O(1/beta)") {
  const double dev6 = eta_1d(0.5, 0.125, 1e6).nodal_deviation;
  const double dev8 = eta_1d(0.5, 0.125, 1e8).nodal_deviation;
  CHECK(dev8 <= 1e-4);
  // first-order decay in 1/beta
  CHECK(dev6 / dev8 == doctest::Approx(100.0).epsilon(0.2));
}

TEST_CASE("eta construction: gradient expression is O(1/eps^4)") {
  for (double y : {0.3, 0.5, 0.7}) {
    for (double eps : {1.0 / 16, 1.0 / 32}) {
      const EtaConstruction1D e = eta_1d(y, eps, 1e8);
      const double bound = 9.0 / (eps * eps * eps * eps) + 9.0 / (eps * eps);
      CHECK(e.grad_expression <= bound);
      CHECK(e.energy_ratio <= bound);
      CHECK(e.energy_ratio > 0.0);
    }
  }
}

TEST_CASE("eta construction rejects degenerate geometry") {
  CHECK_THROWS_AS(eta_1d(0.1, 0.25, 1e6), std::invalid_argument);   // eps >= y
  CHECK_THROWS_AS(eta_1d(0.95, 0.1, 1e6), std::invalid_argument);   // y + eps >= 1
  CHECK_THROWS_AS(eta_1d(0.5, -0.1, 1e6), std::invalid_argument);
}

TEST_CASE("mu_min: asymptotic formula and contrast independence") {
  const double mu = mu_min_1d(0.5, 1.0 / 16, 1e6);
  const double formula = (1.0 / 256) / (6.0 * 0.25 * 0.25);
  CHECK(std::abs(mu - formula) / formula <= 0.10);

  // the beta transient is O(1/(beta*eps)): small at eps = 1/8 already
  const double m4 = mu_min_1d(0.5, 1.0 / 8, 1e4);
  const double m8 = mu_min_1d(0.5, 1.0 / 8, 1e8);
  CHECK(std::abs(m4 - m8) / std::max(m4, m8) <= 0.05);
  const double n4 = mu_min_1d(0.5, 1.0 / 16, 1e4);
  const double n8 = mu_min_1d(0.5, 1.0 / 16, 1e8);
  CHECK(std::abs(n4 - n8) / std::max(n4, n8) <= 0.10);

  // unweighted two-element closed form
  CHECK(mu_min_1d(0.5, 1.0 / 16, 1.0) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(mu_min_1d(0.3, 1.0 / 8, 1e7) > 0.0);

  CHECK_THROWS_AS(mu_min_1d(0.05, 0.25, 1e6), std::invalid_argument);
}
