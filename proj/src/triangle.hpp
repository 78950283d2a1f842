#pragma once

// Per-triangle cotan / mixed-area quantities and their derivatives. Shared by
// the curvature assembly and the analytic Willmore-energy gradient.

#include <array>
#include <cmath>
#include <numbers>

#include "willflow/mesh.hpp"

namespace wf::detail {

inline constexpr double kMaxCot = 1e12;

struct Triangle {
  std::array<Vec3, 3> p;
  std::array<double, 3> cot;    // cot of the interior angle at corner k
  std::array<double, 3> angle;  // interior angle at corner k
  std::array<double, 3> mixedArea;
  double area = 0.0;
  Vec3 unitNormal;   // outward for counterclockwise faces
  int obtuseCorner = -1;
};

inline Triangle make_triangle(const Vec3& a, const Vec3& b, const Vec3& c) {
  Triangle t;
  t.p = {a, b, c};
  const Vec3 cr = (b - a).cross(c - a);
  const double twiceArea = cr.norm();
  t.area = 0.5 * twiceArea;
  t.unitNormal = cr / twiceArea;
  for (int k = 0; k < 3; ++k) {
    const Vec3 u = t.p[(k + 1) % 3] - t.p[k];
    const Vec3 v = t.p[(k + 2) % 3] - t.p[k];
    const double dot = u.dot(v);
    const double crs = u.cross(v).norm();
    t.cot[k] = dot / crs;
    t.angle[k] = std::atan2(crs, dot);
    if (dot < 0.0) t.obtuseCorner = k;
  }
  if (t.obtuseCorner < 0) {
    for (int k = 0; k < 3; ++k) {
      const int k1 = (k + 1) % 3;
      const int k2 = (k + 2) % 3;
      t.mixedArea[k] = 0.125 * ((t.p[k1] - t.p[k]).squaredNorm() * t.cot[k2] +
                                (t.p[k2] - t.p[k]).squaredNorm() * t.cot[k1]);
    }
  } else {
    for (int k = 0; k < 3; ++k) t.mixedArea[k] = (k == t.obtuseCorner ? 0.5 : 0.25) * t.area;
  }
  return t;
}

/// Derivatives of one triangle's cotangents, area and mixed areas with respect
/// to its three corner positions. dCot[j][m] = d cot_j / d p_m, etc.
struct TriangleDerivatives {
  std::array<std::array<Vec3, 3>, 3> dCot;
  std::array<Vec3, 3> dArea;
  std::array<std::array<Vec3, 3>, 3> dMixed;
};

inline TriangleDerivatives differentiate(const Triangle& t) {
  TriangleDerivatives d;
  const Vec3& n = t.unitNormal;
  for (int k = 0; k < 3; ++k) {
    const int k1 = (k + 1) % 3;
    const int k2 = (k + 2) % 3;
    const Vec3 u = t.p[k1] - t.p[k];
    const Vec3 v = t.p[k2] - t.p[k];
    const double s = 2.0 * t.area;  // |u x v|
    // cot = (u.v) / |u x v|; d|u x v| = du.(v x n) + dv.(n x u)
    const Vec3 du = (v - t.cot[k] * v.cross(n)) / s;
    const Vec3 dv = (u - t.cot[k] * n.cross(u)) / s;
    d.dCot[k][k1] = du;
    d.dCot[k][k2] = dv;
    d.dCot[k][k] = -(du + dv);
    d.dArea[k] = 0.5 * n.cross(t.p[k2] - t.p[k1]);
  }
  if (t.obtuseCorner < 0) {
    for (int k = 0; k < 3; ++k) {
      const int k1 = (k + 1) % 3;
      const int k2 = (k + 2) % 3;
      const Vec3 e1 = t.p[k1] - t.p[k];
      const Vec3 e2 = t.p[k2] - t.p[k];
      const double l1 = e1.squaredNorm();
      const double l2 = e2.squaredNorm();
      for (int m = 0; m < 3; ++m)
        d.dMixed[k][m] = 0.125 * (l1 * d.dCot[k2][m] + l2 * d.dCot[k1][m]);
      d.dMixed[k][k1] += 0.25 * t.cot[k2] * e1;
      d.dMixed[k][k2] += 0.25 * t.cot[k1] * e2;
      d.dMixed[k][k] -= 0.25 * (t.cot[k2] * e1 + t.cot[k1] * e2);
    }
  } else {
    for (int k = 0; k < 3; ++k) {
      const double w = (k == t.obtuseCorner ? 0.5 : 0.25);
      for (int m = 0; m < 3; ++m) d.dMixed[k][m] = w * d.dArea[m];
    }
  }
  return d;
}

}  // namespace wf::detail
