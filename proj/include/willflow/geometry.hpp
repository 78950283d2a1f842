#pragma once

#include <span>
#include <vector>

#include "willflow/mesh.hpp"

namespace wf {

/// Per-vertex discrete curvature data of a TriMesh.
///
/// Conventions: `normal` is the unit *interior* normal, `meanCurvVec` is the
/// cotan Laplacian of the position (points inward on convex surfaces), and
/// `scalarH` is |meanCurvVec| signed by <meanCurvVec, normal>, so a round
/// sphere of radius R has H = 2/R > 0.
struct VertexGeometry {
  std::vector<double> area;         ///< mixed Voronoi area; partitions total area
  std::vector<Vec3> meanCurvVec;
  std::vector<Vec3> normal;
  std::vector<double> scalarH;
  std::vector<double> gaussK;       ///< angle defect / area
  std::vector<double> tracefreeSq;  ///< max(0, H^2/2 - 2K)
  /// Sum over vertices of area * max(0, -(H^2/2 - 2K)), i.e. what clamping removed.
  double clampedMass = 0.0;

  std::size_t size() const noexcept { return area.size(); }
};

/// Throws NumericallyDegenerate if any |cot| exceeds 1e12.
VertexGeometry vertex_geometry(const TriMesh& mesh);

/// Dirichlet energy of the piecewise-linear interpolant of `field`:
/// sum over faces of area * |grad field|^2. Throws LengthMismatch.
double pl_gradient_sq_integral(const TriMesh& mesh, std::span<const double> field);

/// Per-face |grad field| of the piecewise-linear interpolant.
std::vector<double> pl_gradient_norms(const TriMesh& mesh, std::span<const double> field);

/// max_i tracefreeSq_i, the discrete sup-norm of |A°|^2.
double sup_tracefree(const VertexGeometry& geom);

/// Cotan Laplace-Beltrami of a vertex field with the mixed areas as mass:
/// (1 / (2 A_i)) sum_j (cot a_ij + cot b_ij) (u_j - u_i).
std::vector<double> cotan_laplacian(const TriMesh& mesh, const VertexGeometry& geom,
                                    std::span<const double> field);

/// Sum over vertices of (2 pi - angle sum); equals 4 pi on any valid mesh.
double total_angle_defect(const TriMesh& mesh);

/// Smallest interior angle over all faces, in radians.
double min_face_angle(const TriMesh& mesh);

}  // namespace wf
