#include "willflow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "triangle.hpp"
#include "willflow/error.hpp"

namespace wf {

namespace {

detail::Triangle face_triangle(const TriMesh& mesh, std::size_t f) {
  const Face& t = mesh.faces()[f];
  const auto& x = mesh.vertices();
  return detail::make_triangle(x[t[0]], x[t[1]], x[t[2]]);
}

void check_cotangents(const detail::Triangle& tri, std::size_t f) {
  for (double c : tri.cot) {
    if (!(std::abs(c) <= detail::kMaxCot)) {
      throw Error(ErrorCode::NumericallyDegenerate,
                  "face " + std::to_string(f) + " has cotangent weight " + std::to_string(c));
    }
  }
}

}  // namespace

VertexGeometry vertex_geometry(const TriMesh& mesh) {
  const std::size_t nv = mesh.num_vertices();
  VertexGeometry g;
  g.area.assign(nv, 0.0);
  g.meanCurvVec.assign(nv, Vec3::Zero());
  g.normal.assign(nv, Vec3::Zero());
  g.scalarH.assign(nv, 0.0);
  g.gaussK.assign(nv, 0.0);
  g.tracefreeSq.assign(nv, 0.0);

  std::vector<double> angleSum(nv, 0.0);
  std::vector<Vec3> laplace(nv, Vec3::Zero());
  std::vector<Vec3> outward(nv, Vec3::Zero());

  for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
    const Face& face = mesh.faces()[f];
    const detail::Triangle tri = face_triangle(mesh, f);
    check_cotangents(tri, f);
    for (int k = 0; k < 3; ++k) {
      const int i = face[k];
      const int j1 = face[(k + 1) % 3];
      const int j2 = face[(k + 2) % 3];
      g.area[i] += tri.mixedArea[k];
      angleSum[i] += tri.angle[k];
      outward[i] += tri.angle[k] * tri.unitNormal;
      // corner k is opposite edge (j1, j2)
      const Vec3 e = tri.cot[k] * (tri.p[(k + 2) % 3] - tri.p[(k + 1) % 3]);
      laplace[j1] += e;
      laplace[j2] -= e;
    }
  }

  for (std::size_t i = 0; i < nv; ++i) {
    const double a = g.area[i];
    g.normal[i] = -outward[i].normalized();
    g.meanCurvVec[i] = laplace[i] / (2.0 * a);
    const double mag = g.meanCurvVec[i].norm();
    g.scalarH[i] = g.meanCurvVec[i].dot(g.normal[i]) >= 0.0 ? mag : -mag;
    g.gaussK[i] = (2.0 * std::numbers::pi - angleSum[i]) / a;
    const double density = 0.5 * mag * mag - 2.0 * g.gaussK[i];
    if (density >= 0.0) {
      g.tracefreeSq[i] = density;
    } else {
      g.clampedMass -= a * density;
    }
  }
  return g;
}

std::vector<double> pl_gradient_norms(const TriMesh& mesh, std::span<const double> field) {
  if (field.size() != mesh.num_vertices())
    throw Error(ErrorCode::LengthMismatch, "field has " + std::to_string(field.size()) +
                                               " values for " +
                                               std::to_string(mesh.num_vertices()) + " vertices");
  std::vector<double> out(mesh.num_faces());
  const auto& x = mesh.vertices();
  for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
    const Face& t = mesh.faces()[f];
    const Vec3 cr = (x[t[1]] - x[t[0]]).cross(x[t[2]] - x[t[0]]);
    const double twiceArea = cr.norm();
    const Vec3 n = cr / twiceArea;
    // grad phi_k = n x (p_{k+2} - p_{k+1}) / (2 area)
    Vec3 grad = Vec3::Zero();
    for (int k = 0; k < 3; ++k)
      grad += field[t[k]] * n.cross(x[t[(k + 2) % 3]] - x[t[(k + 1) % 3]]);
    out[f] = grad.norm() / twiceArea;
  }
  return out;
}

double pl_gradient_sq_integral(const TriMesh& mesh, std::span<const double> field) {
  const std::vector<double> norms = pl_gradient_norms(mesh, field);
  const auto& x = mesh.vertices();
  double sum = 0.0;
  for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
    const Face& t = mesh.faces()[f];
    const double area = 0.5 * (x[t[1]] - x[t[0]]).cross(x[t[2]] - x[t[0]]).norm();
    sum += area * norms[f] * norms[f];
  }
  return sum;
}

double sup_tracefree(const VertexGeometry& geom) {
  if (geom.tracefreeSq.empty()) return 0.0;
  return *std::max_element(geom.tracefreeSq.begin(), geom.tracefreeSq.end());
}

std::vector<double> cotan_laplacian(const TriMesh& mesh, const VertexGeometry& geom,
                                    std::span<const double> field) {
  if (field.size() != mesh.num_vertices())
    throw Error(ErrorCode::LengthMismatch, "field length differs from vertex count");
  std::vector<double> out(mesh.num_vertices(), 0.0);
  for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
    const Face& face = mesh.faces()[f];
    const detail::Triangle tri = face_triangle(mesh, f);
    for (int k = 0; k < 3; ++k) {
      const int j1 = face[(k + 1) % 3];
      const int j2 = face[(k + 2) % 3];
      const double flux = tri.cot[k] * (field[j2] - field[j1]);
      out[j1] += flux;
      out[j2] -= flux;
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= 2.0 * geom.area[i];
  return out;
}

double total_angle_defect(const TriMesh& mesh) {
  // Per-vertex defects are small, so summing them avoids the cancellation of
  // 2 pi V against the total angle sum.
  std::vector<double> angleSum(mesh.num_vertices(), 0.0);
  for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
    const detail::Triangle tri = face_triangle(mesh, f);
    for (int k = 0; k < 3; ++k) angleSum[mesh.faces()[f][k]] += tri.angle[k];
  }
  double sum = 0.0;
  for (double a : angleSum) sum += 2.0 * std::numbers::pi - a;
  return sum;
}

double min_face_angle(const TriMesh& mesh) {
  double best = std::numbers::pi;
  for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
    const detail::Triangle tri = face_triangle(mesh, f);
    best = std::min({best, tri.angle[0], tri.angle[1], tri.angle[2]});
  }
  return best;
}

}  // namespace wf
