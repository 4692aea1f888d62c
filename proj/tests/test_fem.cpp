#include "doctest.h"
#include "lodlab/fem.hpp"
#include "oracles.hpp"

#include <random>

using namespace lodlab;

namespace {

RasterGrid constant_grid(double value) {
  RasterGrid g;
  g.nx = g.ny = 1;
  g.values = Eigen::ArrayXXd::Constant(1, 1, value);
  return g;
}

}  // namespace

TEST_CASE("stiffness on the 2x2 mesh matches the five-point stencil") {
  const Triangulation mesh = build_uniform(2);
  const Vector a = Vector::Ones(mesh.num_triangles());
  const DofMap dofs = make_dof_map(mesh);
  REQUIRE(dofs.size() == 1);
  const SpMat K = assemble_stiffness(mesh, a, dofs);
  CHECK(K.coeff(0, 0) == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("stiffness scales linearly in the coefficient and is exactly symmetric") {
  const Triangulation mesh = build_uniform(4);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> uni(0.5, 4.0);
  Vector a(mesh.num_triangles());
  for (int t = 0; t < a.size(); ++t) a(t) = uni(rng);

  // dyadic scale factors commute with rounding, so equality is exact
  const SpMat K1 = assemble_stiffness_full(mesh, a);
  const SpMat K4 = assemble_stiffness_full(mesh, (4.0 * a).eval());
  CHECK((Eigen::MatrixXd(K4) - 4.0 * Eigen::MatrixXd(K1)).cwiseAbs().maxCoeff() ==
        0.0);
  const SpMat K7 = assemble_stiffness_full(mesh, (7.0 * a).eval());
  CHECK((Eigen::MatrixXd(K7) - 7.0 * Eigen::MatrixXd(K1)).cwiseAbs().maxCoeff() <=
        1e-14 * Eigen::MatrixXd(K7).cwiseAbs().maxCoeff());
  CHECK((Eigen::MatrixXd(K1) - Eigen::MatrixXd(K1).transpose())
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("stiffness rejects non-positive coefficients") {
  const Triangulation mesh = build_uniform(2);
  Vector a = Vector::Ones(mesh.num_triangles());
  a(3) = 0.0;
  CHECK_THROWS_AS(assemble_stiffness_full(mesh, a), std::invalid_argument);
}

TEST_CASE("Neumann stiffness kernel contains exactly the constants") {
  const Triangulation mesh = build_uniform(4);
  Vector a(mesh.num_triangles());
  for (int t = 0; t < a.size(); ++t) a(t) = 1.0 + (t % 5);
  const SpMat K = assemble_stiffness_full(mesh, a);
  CHECK((K * Vector::Ones(K.rows())).cwiseAbs().maxCoeff() <= 1e-13);
  // positive definiteness off the constants: deflated smallest eigenvalue > 0
  const SpMat M = assemble_weighted_mass_full(mesh, Vector::Ones(a.size()));
  std::vector<Vector> defl = {Vector::Ones(K.rows())};
  CHECK(smallest_nonzero_eig(K, M, defl).value > 0.0);
}

TEST_CASE("weighted mass: interior dof value on the 2x2 mesh") {
  const Triangulation mesh = build_uniform(2);
  const Vector a = Vector::Ones(mesh.num_triangles());
  const DofMap dofs = make_dof_map(mesh);
  const SpMat M = assemble_weighted_mass(mesh, a, dofs);
  // exact-rule oracle: the interior vertex belongs to 6 triangles, each
  // contributing |t|/6 = (1/8)/6
  const int center = mesh.vertex_id(1, 1);
  const double expected = mesh.vertex_to_triangles()[center].size() *
                          (mesh.triangle_area() / 6.0);
  CHECK(expected == doctest::Approx(1.0 / 8.0).epsilon(1e-15));
  CHECK(M.coeff(0, 0) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("mass row sums equal hat integrals from the quadrature oracle") {
  const Triangulation mesh = build_uniform(3);
  const Vector a = Vector::Ones(mesh.num_triangles());
  const SpMat M = assemble_weighted_mass_full(mesh, a);
  const Vector row_sums = M * Vector::Ones(mesh.num_vertices());
  for (int v = 0; v < mesh.num_vertices(); ++v)
    CHECK(row_sums(v) ==
          doctest::Approx(oracle::integrate_hat(mesh, v)).epsilon(1e-13));
}

TEST_CASE("mass scales linearly in the weight") {
  const Triangulation mesh = build_uniform(3);
  Vector a(mesh.num_triangles());
  for (int t = 0; t < a.size(); ++t) a(t) = 1.0 + 0.25 * t;
  const SpMat M1 = assemble_weighted_mass_full(mesh, a);
  const SpMat M2 = assemble_weighted_mass_full(mesh, (2.0 * a).eval());
  CHECK((Eigen::MatrixXd(M2) - 2.0 * Eigen::MatrixXd(M1)).cwiseAbs().maxCoeff() ==
        0.0);
  const SpMat M5 = assemble_weighted_mass_full(mesh, (5.0 * a).eval());
  CHECK((Eigen::MatrixXd(M5) - 5.0 * Eigen::MatrixXd(M1)).cwiseAbs().maxCoeff() <=
        1e-14 * Eigen::MatrixXd(M5).cwiseAbs().maxCoeff());
}

TEST_CASE("load vector basics") {
  const Triangulation mesh = build_uniform(4);

  const Vector zero = assemble_load_full(mesh, constant_grid(0.0));
  CHECK(zero.cwiseAbs().maxCoeff() == 0.0);

  // total of all entries equals the integral of g over the domain
  const Vector ones = assemble_load_full(mesh, constant_grid(1.0));
  CHECK(ones.sum() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("corner source loads only vertices whose stars meet the corners") {
  const Triangulation mesh = build_uniform(8);
  const RasterGrid g = builtin_source("spe-corners");
  const Vector f = assemble_load_full(mesh, g);
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    const double x = mesh.vertices(v, 0), y = mesh.vertices(v, 1);
    const bool near_corner = (x <= 0.25 && y <= 0.25) || (x >= 0.75 && y >= 0.75);
    if (f(v) != 0.0) CHECK(near_corner);
  }
  CHECK(f.sum() == doctest::Approx(8.0 * 2.0 / 16.0).epsilon(1e-13));
}

TEST_CASE("reference solve: zero source and hand-assembled 2x2 value") {
  const MeshHierarchy hier = build_hierarchy(2, 2, 2);
  const RasterCoefficient one = coefficient_from_grid(constant_grid(1.0), "test");

  const FineFunction u0 = solve_reference(hier, one, constant_grid(0.0));
  CHECK(u0.values.cwiseAbs().maxCoeff() == 0.0);

  // oracle: load at the single dof is 6 * (1/8)/3 = 1/4, stiffness diagonal 4
  const FineFunction u1 = solve_reference(hier, one, constant_grid(1.0));
  REQUIRE(u1.values.size() == 1);
  CHECK(u1.values(0) == doctest::Approx(0.25 / 4.0).epsilon(1e-13));
}

TEST_CASE("Galerkin identity at high contrast") {
  const MeshHierarchy hier = build_hierarchy(4, 32, 64);
  const RasterCoefficient blocks = make_blocks(1e6);
  const RasterGrid g = builtin_source("half-step");
  const Vector a = sample_on_mesh(blocks.grid, hier.fine);
  const AssembledSystem sys = assemble_system(hier.fine, a, g);
  const Vector u = solve_spd(sys.stiffness, sys.load);
  const double energy_sq = u.dot(sys.stiffness * u);
  CHECK(energy_sq == doctest::Approx(sys.load.dot(u)).epsilon(1e-9));
}

TEST_CASE("energy error basics and triangle inequality") {
  const Triangulation mesh = build_uniform(4);
  const DofMap dofs = make_dof_map(mesh);
  const SpMat K = assemble_stiffness(mesh, Vector::Ones(mesh.num_triangles()), dofs);

  std::mt19937 rng(11);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Vector u(dofs.size()), v(dofs.size()), w(dofs.size());
  for (int i = 0; i < dofs.size(); ++i) {
    u(i) = uni(rng);
    v(i) = uni(rng);
    w(i) = uni(rng);
  }

  CHECK(energy_error(u, u, K) == 0.0);
  CHECK(energy_error(u, Vector::Zero(dofs.size()), K) ==
        doctest::Approx(energy_norm(u, K)).epsilon(1e-14));
  for (int trial = 0; trial < 20; ++trial) {
    for (int i = 0; i < dofs.size(); ++i) {
      u(i) = uni(rng);
      v(i) = uni(rng);
      w(i) = uni(rng);
    }
    CHECK(energy_error(u, w, K) <=
          energy_error(u, v, K) + energy_error(v, w, K) + 1e-12);
  }

  Vector bad(dofs.size() + 1);
  CHECK_THROWS_AS(energy_error(u, bad, K), std::invalid_argument);
}

TEST_CASE("energy is non-decreasing under nested fine refinement") {
  const RasterCoefficient blocks = make_blocks(10.0);
  const RasterGrid g = builtin_source("half-step");
  double prev = 0.0;
  for (int n_h : {32, 64, 128}) {
    const MeshHierarchy hier = build_hierarchy(4, 32, n_h);
    const Vector a = sample_on_mesh(blocks.grid, hier.fine);
    const AssembledSystem sys = assemble_system(hier.fine, a, g);
    const Vector u = solve_spd(sys.stiffness, sys.load);
    const double energy = energy_norm(u, sys.stiffness);
    CHECK(energy >= prev - 1e-12);
    prev = energy;
  }
}

TEST_CASE("unknown builtin source is rejected") {
  CHECK_THROWS_AS(builtin_source("nope"), std::invalid_argument);
}
