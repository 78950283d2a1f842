#pragma once

#include <optional>

#include "willflow/geometry.hpp"
#include "willflow/mesh.hpp"

namespace wf {

/// One snapshot of every tracked functional. Lengths are in model units.
struct FunctionalRecord {
  double area = 0.0;
  Vec3 barycenter = Vec3::Zero();
  double quadMoment = 0.0;
  double volume = 0.0;
  double totalMeanCurv = 0.0;
  double willmore = 0.0;
  double tracefreeEnergy = 0.0;
  double isoDeficit = 0.0;
  /// Empty when the tracefree energy is too small for the ratio to be defined.
  std::optional<double> dlmRatio;
  double supTracefree = 0.0;
  double clampedMass = 0.0;
};

/// (36 pi)^(1/3), the isoperimetric ratio A / V^(2/3) of a round sphere.
double isoperimetric_sphere_ratio();

/// Evaluates all functionals. Barycenter and quadratic moment use exact
/// piecewise-linear quadrature (centroid and edge-midpoint rules), the volume
/// the tetrahedral fan, and the curvature integrals the vertex lumping of
/// `geom`.
FunctionalRecord measure(const TriMesh& mesh, const VertexGeometry& geom);
FunctionalRecord measure(const TriMesh& mesh);

/// A / V^(2/3) - (36 pi)^(1/3). Throws NonpositiveVolume.
double iso_deficit(const FunctionalRecord& rec);

/// Umbilicity ratio  int |S - (Hbar/2) Id|^2 / int |S°|^2  from the integrals of
/// H, H^2 and K. Throws ZeroDenominator when E <= 1e-12.
double dlm_ratio(const FunctionalRecord& rec, const VertexGeometry& geom);

}  // namespace wf
