#include "willflow/functionals.hpp"

#include <cmath>
#include <numbers>

#include "willflow/error.hpp"

namespace wf {

double isoperimetric_sphere_ratio() { return std::cbrt(36.0 * std::numbers::pi); }

FunctionalRecord measure(const TriMesh& mesh, const VertexGeometry& geom) {
  FunctionalRecord rec;
  const auto& x = mesh.vertices();

  Vec3 moment = Vec3::Zero();
  std::vector<double> faceArea(mesh.num_faces());
  for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
    const Face& t = mesh.faces()[f];
    const double a = 0.5 * (x[t[1]] - x[t[0]]).cross(x[t[2]] - x[t[0]]).norm();
    faceArea[f] = a;
    rec.area += a;
    moment += a * (x[t[0]] + x[t[1]] + x[t[2]]) / 3.0;
  }
  rec.barycenter = moment / rec.area;

  // The edge-midpoint rule is exact for quadratics on a triangle.
  const Vec3& c = rec.barycenter;
  double second = 0.0;
  for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
    const Face& t = mesh.faces()[f];
    const Vec3 a = x[t[0]] - c;
    const Vec3 b = x[t[1]] - c;
    const Vec3 d = x[t[2]] - c;
    second += faceArea[f] / 3.0 *
              (0.25 * (a + b).squaredNorm() + 0.25 * (b + d).squaredNorm() +
               0.25 * (d + a).squaredNorm());
  }
  rec.quadMoment = second / rec.area;
  rec.volume = mesh.signed_volume();

  double htot = 0.0;
  double hsq = 0.0;
  double tracefree = 0.0;
  for (std::size_t i = 0; i < geom.size(); ++i) {
    htot += geom.area[i] * geom.scalarH[i];
    hsq += geom.area[i] * geom.scalarH[i] * geom.scalarH[i];
    tracefree += geom.area[i] * geom.tracefreeSq[i];
  }
  rec.totalMeanCurv = htot;
  rec.willmore = 0.25 * hsq;
  rec.tracefreeEnergy = tracefree;
  rec.supTracefree = sup_tracefree(geom);
  rec.clampedMass = geom.clampedMass;
  rec.isoDeficit = rec.volume > 0.0 ? iso_deficit(rec) : std::nan("");
  if (rec.tracefreeEnergy > 1e-12) rec.dlmRatio = dlm_ratio(rec, geom);
  return rec;
}

FunctionalRecord measure(const TriMesh& mesh) { return measure(mesh, vertex_geometry(mesh)); }

double iso_deficit(const FunctionalRecord& rec) {
  if (!(rec.volume > 0.0))
    throw Error(ErrorCode::NonpositiveVolume, "volume " + std::to_string(rec.volume));
  return rec.area / std::pow(rec.volume, 2.0 / 3.0) - isoperimetric_sphere_ratio();
}

double dlm_ratio(const FunctionalRecord& rec, const VertexGeometry& geom) {
  if (!(rec.tracefreeEnergy > 1e-12)) {
    throw Error(ErrorCode::ZeroDenominator,
                "tracefree energy " + std::to_string(rec.tracefreeEnergy) + " is too small");
  }
  // int |S|^2 = int (H^2 - 2K); int |S - Hbar/2 Id|^2 = int |S|^2 - Htot^2 / (2A)
  double squaredShape = 0.0;
  for (std::size_t i = 0; i < geom.size(); ++i)
    squaredShape += geom.area[i] * (geom.scalarH[i] * geom.scalarH[i] - 2.0 * geom.gaussK[i]);
  const double numerator =
      squaredShape - rec.totalMeanCurv * rec.totalMeanCurv / (2.0 * rec.area);
  return numerator / rec.tracefreeEnergy;
}

}  // namespace wf
