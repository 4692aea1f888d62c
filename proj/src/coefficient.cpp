#include "lodlab/coefficient.hpp"

#include "lodlab/fem.hpp"
#include "lodlab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lodlab {

namespace {

RasterCoefficient finalize(RasterGrid grid) {
  RasterCoefficient c;
  c.alpha = grid.values.minCoeff();
  c.beta = grid.values.maxCoeff();
  c.grid = std::move(grid);
  return c;
}

// Marks all cells of an m x m grid whose box is contained in the rectangle
// [p0,p1] x [q0,q1]; reversed interval endpoints are normalized first.
void mark_rect(Eigen::ArrayXXd& values, int m, double p0, double p1, double q0,
               double q1, double value) {
  if (p0 > p1) std::swap(p0, p1);
  if (q0 > q1) std::swap(q0, q1);
  const int i0 = static_cast<int>(std::lround(p0 * m));
  const int i1 = static_cast<int>(std::lround(p1 * m));
  const int j0 = static_cast<int>(std::lround(q0 * m));
  const int j1 = static_cast<int>(std::lround(q1 * m));
  for (int j = j0; j < j1; ++j)
    for (int i = i0; i < i1; ++i) values(j, i) = value;
}

}  // namespace

RasterCoefficient make_blocks(double beta) {
  if (beta < 1.0)
    throw std::invalid_argument("make_blocks: beta must be >= 1 (lower bound is 1)");
  RasterGrid g;
  g.nx = g.ny = 32;
  g.values = Eigen::ArrayXXd::Ones(32, 32);
  mark_rect(g.values, 32, 11.0 / 32, 5.0 / 32, 8.0 / 32, 11.0 / 32, beta);
  mark_rect(g.values, 32, 5.0 / 32, 11.0 / 32, 8.0 / 32, 19.0 / 32, beta);
  return finalize(std::move(g));
}

RasterCoefficient make_channels(double beta) {
  if (beta < 2.0)
    throw std::invalid_argument("make_channels: beta must be >= 2");
  const int m = 32;
  auto a1 = [&](int i, int j) {
    const bool strip_x = (i == 8) || (i == 10);
    const bool span_y = (j >= 1) && (j <= 30);
    return (strip_x && span_y) ? beta / 2.0 : 1.0;
  };
  RasterGrid g;
  g.nx = g.ny = m;
  g.values.resize(m, m);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i) g.values(j, i) = a1(i, j) + a1(j, i);
  return finalize(std::move(g));
}

RasterGrid parse_raster_grid(std::istream& in, const std::string& origin) {
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error(origin + ": empty file, expected RASTER header");
  std::istringstream header(line);
  std::string tag;
  int nx = 0, ny = 0;
  if (!(header >> tag >> nx >> ny) || tag != "RASTER" || nx < 1 || ny < 1)
    throw std::runtime_error(origin + ": malformed header '" + line +
                             "', expected 'RASTER <nx> <ny>'");
  RasterGrid g;
  g.nx = nx;
  g.ny = ny;
  g.values.resize(ny, nx);
  int row = 0;
  while (row < ny && std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    for (int i = 0; i < nx; ++i) {
      if (!(ls >> g.values(row, i)))
        throw std::runtime_error(origin + ": row " + std::to_string(row) +
                                 " has fewer than " + std::to_string(nx) +
                                 " values");
    }
    double extra;
    if (ls >> extra)
      throw std::runtime_error(origin + ": row " + std::to_string(row) +
                               " has more than " + std::to_string(nx) +
                               " values");
    ++row;
  }
  if (row != ny)
    throw std::runtime_error(origin + ": expected " + std::to_string(ny) +
                             " rows, got " + std::to_string(row));
  return g;
}

RasterGrid load_raster_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open raster file '" + path + "'");
  return parse_raster_grid(in, path);
}

RasterCoefficient coefficient_from_grid(RasterGrid grid,
                                        const std::string& origin) {
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i)
      if (!(grid.values(j, i) > 0.0))
        throw std::runtime_error(origin + ": non-positive coefficient value " +
                                 std::to_string(grid.values(j, i)) + " at row " +
                                 std::to_string(j) + " col " + std::to_string(i));
  return finalize(std::move(grid));
}

RasterCoefficient load_raster(const std::string& path) {
  return coefficient_from_grid(load_raster_grid(path), path);
}

Vector sample_on_mesh(const RasterGrid& grid, const Triangulation& mesh) {
  Vector a(mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    double cx = 0.0, cy = 0.0;
    for (int k = 0; k < 3; ++k) {
      cx += mesh.vertices(mesh.triangles(t, k), 0);
      cy += mesh.vertices(mesh.triangles(t, k), 1);
    }
    a(t) = grid.at(cx / 3.0, cy / 3.0);
  }
  return a;
}

ElementCoefficient sample_on_hierarchy(const RasterCoefficient& coeff,
                                       const MeshHierarchy& hier) {
  ElementCoefficient e;
  e.fine = sample_on_mesh(coeff.grid, hier.fine);
  e.eps_level = sample_on_mesh(coeff.grid, hier.eps_level);
  return e;
}

namespace {

// Coarse triangle containing the point, via cell lookup and diagonal side.
int locate_coarse_triangle(const Triangulation& coarse, double x, double y) {
  const int n = coarse.n;
  const int i = std::clamp(int(x * n), 0, n - 1);
  const int j = std::clamp(int(y * n), 0, n - 1);
  const double s = x * n - i, t = y * n - j;
  return 2 * (j * n + i) + (t <= s ? 0 : 1);
}

}  // namespace

QuasiMonoReport classify_quasi_monotone(const RasterCoefficient& coeff,
                                        const MeshHierarchy& hier, int T,
                                        double threshold_factor) {
  if (coeff.grid.nx < hier.coarse.n || coeff.grid.ny < hier.coarse.n)
    throw std::runtime_error(
        "classify_quasi_monotone: coefficient grid " +
        std::to_string(coeff.grid.nx) + "x" + std::to_string(coeff.grid.ny) +
        " does not resolve the coarse mesh (n_H=" +
        std::to_string(hier.coarse.n) + ")");
  const Patch patch = element_neighborhood(hier, T);
  std::vector<char> in_patch(hier.coarse.num_triangles(), 0);
  for (int t : patch.coarse_triangles) in_patch[t] = 1;

  const int nx = coeff.grid.nx, ny = coeff.grid.ny;
  // cells whose two diagonal halves both lie in patch triangles
  std::vector<int> cell_of;                 // local index -> j*nx+i
  std::vector<int> local(nx * ny, -1);      // j*nx+i -> local index
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const double lo_x = (i + 2.0 / 3.0) / nx, lo_y = (j + 1.0 / 3.0) / ny;
      const double up_x = (i + 1.0 / 3.0) / nx, up_y = (j + 2.0 / 3.0) / ny;
      if (in_patch[locate_coarse_triangle(hier.coarse, lo_x, lo_y)] &&
          in_patch[locate_coarse_triangle(hier.coarse, up_x, up_y)]) {
        local[j * nx + i] = static_cast<int>(cell_of.size());
        cell_of.push_back(j * nx + i);
      }
    }
  if (cell_of.empty())
    throw std::runtime_error(
        "classify_quasi_monotone: no coefficient cell is contained in the "
        "neighborhood of triangle " + std::to_string(T));

  QuasiMonoReport report;
  report.coarse_triangle = T;
  report.threshold = threshold_factor;

  int argmax_local = 0;
  for (size_t c = 1; c < cell_of.size(); ++c)
    if (coeff.grid.values(cell_of[c] / nx, cell_of[c] % nx) >
        coeff.grid.values(cell_of[argmax_local] / nx, cell_of[argmax_local] % nx))
      argmax_local = static_cast<int>(c);
  report.argmax_cell = cell_of[argmax_local];

  // reverse reachability toward the maximal cell: a predecessor tau of nu is
  // reachable when the climb edge (tau, nu) exists, i.e. a_tau <= thr * a_nu
  auto value_at = [&](int cell) { return coeff.grid.values(cell / nx, cell % nx); };
  auto all_reach = [&](bool with_corners) {
    std::vector<char> seen(cell_of.size(), 0);
    std::deque<int> queue = {argmax_local};
    seen[argmax_local] = 1;
    size_t count = 1;
    while (!queue.empty()) {
      const int nu = queue.front();
      queue.pop_front();
      const int ci = cell_of[nu] % nx, cj = cell_of[nu] / nx;
      for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di) {
          if (di == 0 && dj == 0) continue;
          const bool corner = (di != 0 && dj != 0);
          if (corner && !with_corners) continue;
          const int ii = ci + di, jj = cj + dj;
          if (ii < 0 || ii >= nx || jj < 0 || jj >= ny) continue;
          const int loc = local[jj * nx + ii];
          if (loc < 0 || seen[loc]) continue;
          if (value_at(cell_of[loc]) <=
              threshold_factor * value_at(cell_of[nu])) {
            seen[loc] = 1;
            ++count;
            queue.push_back(loc);
          }
        }
    }
    return count == cell_of.size();
  };

  if (all_reach(/*with_corners=*/false))
    report.type = QuasiMonoType::Type1;
  else if (all_reach(/*with_corners=*/true))
    report.type = QuasiMonoType::Type0;
  else
    report.type = QuasiMonoType::None;
  return report;
}

PoincareEstimate estimate_poincare(const RasterCoefficient& coeff,
                                   const MeshHierarchy& hier,
                                   const Patch& patch) {
  if (patch.coarse_triangles.empty())
    throw std::invalid_argument("estimate_poincare: empty patch");

  std::vector<int> fine_tris;
  for (int ct : patch.coarse_triangles)
    for (int ft : hier.child_map[ct]) fine_tris.push_back(ft);

  std::vector<int> verts;
  for (int ft : fine_tris)
    for (int k = 0; k < 3; ++k) verts.push_back(hier.fine.triangles(ft, k));
  std::sort(verts.begin(), verts.end());
  verts.erase(std::unique(verts.begin(), verts.end()), verts.end());

  bool touches_boundary = false;
  for (int v : verts)
    if (hier.fine.boundary_vertex[v]) {
      touches_boundary = true;
      break;
    }

  std::vector<int> dofs;
  for (int v : verts)
    if (!touches_boundary || !hier.fine.boundary_vertex[v]) dofs.push_back(v);

  const Vector a = sample_on_mesh(coeff.grid, hier.fine);
  const SpMat K_full = assemble_stiffness_masked(hier.fine, a, fine_tris);
  const SpMat M_full = assemble_mass_masked(hier.fine, a, fine_tris);
  const SpMat Kp = submatrix(K_full, dofs, dofs);
  const SpMat Mp = submatrix(M_full, dofs, dofs);

  std::vector<Vector> deflation;
  if (!touches_boundary)
    deflation.push_back(Vector::Ones(static_cast<int>(dofs.size())));

  const EigPair eig = smallest_nonzero_eig(Kp, Mp, deflation, 1e-6, 500);

  PoincareEstimate est;
  est.patch_id = patch.center;
  est.eigenvalue = eig.value;
  const double H_T = hier.coarse.mesh_size;
  est.c_p = 1.0 / (eig.value * H_T * H_T);
  est.variant = touches_boundary ? PoincareVariant::BoundaryTouching
                                 : PoincareVariant::MeanConstraint;
  return est;
}

}  // namespace lodlab
