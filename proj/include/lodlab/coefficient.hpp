#pragma once

#include "lodlab/mesh.hpp"

#include <algorithm>
#include <iosfwd>
#include <string>

namespace lodlab {

/// Piecewise-constant scalar field on an nx x ny Cartesian grid over the
/// unit square. Cell (i,j) covers [i/nx,(i+1)/nx] x [j/ny,(j+1)/ny].
/// Values may be zero or negative (used for source terms); the positivity
/// constraint lives in RasterCoefficient.
struct RasterGrid {
  int nx = 0, ny = 0;
  Eigen::ArrayXXd values;  // ny rows (y index) x nx cols (x index)

  double at(double x, double y) const {
    int i = std::min(int(x * nx), nx - 1);
    int j = std::min(int(y * ny), ny - 1);
    return values(std::max(j, 0), std::max(i, 0));
  }
};

/// Strictly positive coefficient a(x) on an eps-grid, with spectral bounds
/// alpha = min and beta = max.
struct RasterCoefficient {
  RasterGrid grid;
  double alpha = 0.0;
  double beta = 0.0;

  double contrast() const { return beta / alpha; }
  double at(double x, double y) const { return grid.at(x, y); }
};

/// Coefficient sampled per triangle (at centroids) of the fine and the
/// eps-level mesh; exactly constant within each fine triangle.
struct ElementCoefficient {
  Vector fine;       // one value per fine triangle
  Vector eps_level;  // one value per eps-level triangle
};

enum class QuasiMonoType { Type1, Type0, None };

/// Classification of one coarse-element neighborhood: the strongest
/// connectivity type through which every cell climbs to the maximal cell.
struct QuasiMonoReport {
  int coarse_triangle = -1;
  QuasiMonoType type = QuasiMonoType::None;
  int argmax_cell = -1;  // linear raster index j*nx+i of the maximal cell
  double threshold = 1.0;
};

enum class PoincareVariant { MeanConstraint, BoundaryTouching };

/// Weighted Poincare constant estimate on a patch: C_P = 1/(lambda H_T^2)
/// where lambda is the smallest nonzero generalized eigenvalue of the
/// a-weighted Neumann stiffness against the a-weighted mass.
struct PoincareEstimate {
  int patch_id = -1;
  double c_p = 0.0;
  double eigenvalue = 0.0;
  PoincareVariant variant = PoincareVariant::MeanConstraint;
};

/// Two-phase coefficient of the blocks benchmark: beta on the union
/// [5/32,11/32]x[8/32,11/32] u [5/32,11/32]x[8/32,19/32] of a 32x32 grid,
/// 1 elsewhere. Requires beta >= 1.
RasterCoefficient make_blocks(double beta);

/// Two-phase channel coefficient A(x1,x2) = A1(x1,x2) + A1(x2,x1) with
/// A1 = beta/2 on the vertical strips [8/32,9/32]x[1/32,31/32] and
/// [10/32,11/32]x[1/32,31/32], 1 elsewhere; 32x32 grid. Requires beta >= 2.
RasterCoefficient make_channels(double beta);

/// Parses the text RASTER format without positivity requirements.
RasterGrid load_raster_grid(const std::string& path);
RasterGrid parse_raster_grid(std::istream& in, const std::string& origin);

/// Parses a coefficient raster; rejects non-positive values.
RasterCoefficient load_raster(const std::string& path);
RasterCoefficient coefficient_from_grid(RasterGrid grid,
                                        const std::string& origin);

/// Samples a raster at triangle centroids of both fine and eps meshes.
ElementCoefficient sample_on_hierarchy(const RasterCoefficient& coeff,
                                       const MeshHierarchy& hier);
Vector sample_on_mesh(const RasterGrid& grid, const Triangulation& mesh);

/// Classifies quasi-monotonicity of the coefficient on the neighborhood of
/// coarse triangle T. Directed edges run from a cell to any neighbor with
/// value >= value/threshold_factor; type1 uses edge-adjacency only, type0
/// additionally allows corner contacts. The report states the strongest
/// type for which every cell in the patch reaches the maximal cell.
QuasiMonoReport classify_quasi_monotone(const RasterCoefficient& coeff,
                                        const MeshHierarchy& hier, int T,
                                        double threshold_factor = 1.0);

/// Estimates the weighted Poincare (or Friedrichs, for patches touching the
/// domain boundary) constant on the given patch by an inverse-power
/// eigensolve on the fine space restricted to the patch.
PoincareEstimate estimate_poincare(const RasterCoefficient& coeff,
                                   const MeshHierarchy& hier,
                                   const Patch& patch);

}  // namespace lodlab
