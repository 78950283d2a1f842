#include "willflow/shapes.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <unordered_map>

#include <Eigen/Dense>

#include "willflow/error.hpp"
#include "willflow/functionals.hpp"

namespace wf {

// ---------------------------------------------------------------------------
// Icosphere

TriMesh icosphere(int level) {
  if (level < 0 || level > kMaxIcosphereLevel) {
    throw Error(ErrorCode::LevelTooLarge, "icosphere level " + std::to_string(level) +
                                              " outside [0, " +
                                              std::to_string(kMaxIcosphereLevel) + "]");
  }
  const double g = std::numbers::phi;
  std::vector<Vec3> x = {{-1, g, 0}, {1, g, 0},  {-1, -g, 0}, {1, -g, 0},
                         {0, -1, g}, {0, 1, g},  {0, -1, -g}, {0, 1, -g},
                         {g, 0, -1}, {g, 0, 1},  {-g, 0, -1}, {-g, 0, 1}};
  std::vector<Face> faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (Vec3& p : x) p.normalize();

  for (int l = 0; l < level; ++l) {
    std::unordered_map<std::uint64_t, int> midpoint;
    midpoint.reserve(faces.size() * 2);
    auto mid = [&](int a, int b) {
      const std::uint64_t key = (static_cast<std::uint64_t>(std::min(a, b)) << 32) |
                                static_cast<std::uint32_t>(std::max(a, b));
      auto [it, inserted] = midpoint.try_emplace(key, static_cast<int>(x.size()));
      if (inserted) x.push_back((x[a] + x[b]).normalized());
      return it->second;
    };
    std::vector<Face> next;
    next.reserve(faces.size() * 4);
    for (const Face& f : faces) {
      const int ab = mid(f[0], f[1]);
      const int bc = mid(f[1], f[2]);
      const int ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }
  return TriMesh::build(std::move(x), std::move(faces));
}

TriMesh ellipsoid(double a, double b, double c, int level) {
  if (!(a > 0.0 && b > 0.0 && c > 0.0))
    throw Error(ErrorCode::InvalidArgument, "ellipsoid semi-axes must be positive");
  const TriMesh sphere = icosphere(level);
  std::vector<Vec3> x = sphere.vertices();
  for (Vec3& p : x) p = Vec3(a * p.x(), b * p.y(), c * p.z());
  return TriMesh::build(std::move(x), sphere.faces());
}

// ---------------------------------------------------------------------------
// Real spherical harmonics

namespace {

// Orthonormal associated Legendre functions (Condon-Shortley phase included)
// at x = cos(theta), s = sin(theta), for fixed order m >= 0 and degree l.
// Returns {P_l^m, P_{l-1}^m}.
std::pair<double, double> legendre_pair(int l, int m, double x, double s) {
  double pmm = std::sqrt(1.0 / (4.0 * std::numbers::pi));
  for (int k = 1; k <= m; ++k) pmm *= -std::sqrt((2.0 * k + 1.0) / (2.0 * k)) * s;
  if (l == m) return {pmm, 0.0};
  double prev = pmm;
  double cur = std::sqrt(2.0 * m + 3.0) * x * pmm;
  for (int n = m + 2; n <= l; ++n) {
    const double a = std::sqrt((4.0 * n * n - 1.0) / (static_cast<double>(n) * n - m * m));
    const double b = std::sqrt(((n - 1.0) * (n - 1.0) - m * m) / (4.0 * (n - 1.0) * (n - 1.0) - 1.0));
    const double next = a * (x * cur - b * prev);
    prev = cur;
    cur = next;
  }
  return {cur, prev};
}

struct Azimuthal {
  double value;
  double derivative;
};

Azimuthal azimuthal(int m, double phi) {
  const double r2 = std::numbers::sqrt2;
  if (m > 0) return {r2 * std::cos(m * phi), -r2 * m * std::sin(m * phi)};
  if (m < 0) return {r2 * std::sin(-m * phi), r2 * (-m) * std::cos(-m * phi)};
  return {1.0, 0.0};
}

void check_degree(int l, int m) {
  if (l < 0 || std::abs(m) > l)
    throw Error(ErrorCode::InvalidArgument,
                "invalid harmonic (" + std::to_string(l) + ", " + std::to_string(m) + ")");
}

}  // namespace

double real_harmonic(int l, int m, double theta, double phi) {
  check_degree(l, m);
  const auto [p, unused] = legendre_pair(l, std::abs(m), std::cos(theta), std::sin(theta));
  return p * azimuthal(m, phi).value;
}

HarmonicSample real_harmonic_derivatives(int l, int m, double theta, double phi) {
  check_degree(l, m);
  const int am = std::abs(m);
  const double x = std::cos(theta);
  const double s = std::sin(theta);
  const auto [p, pPrev] = legendre_pair(l, am, x, s);
  // (1 - x^2) dP/dx = c P_{l-1} - l x P_l
  const double c = std::sqrt((2.0 * l + 1.0) * (static_cast<double>(l) * l - am * am) / (2.0 * l - 1.0));
  const double pTheta = -(c * pPrev - l * x * p) / s;
  const double pThetaTheta = -(x / s) * pTheta - (l * (l + 1.0) - am * am / (s * s)) * p;
  const Azimuthal t = azimuthal(m, phi);
  HarmonicSample out;
  out.value = p * t.value;
  out.dTheta = pTheta * t.value;
  out.dPhi = p * t.derivative;
  out.dThetaTheta = pThetaTheta * t.value;
  out.dThetaPhi = pTheta * t.derivative;
  out.dPhiPhi = -static_cast<double>(m) * m * out.value;
  return out;
}

double HarmonicField::value(const Vec3& w) const {
  const double x = std::clamp(w.z(), -1.0, 1.0);
  const double s = std::hypot(w.x(), w.y());
  const double phi = std::atan2(w.y(), w.x());
  double u = 0.0;
  for (const auto& [lm, coeff] : coeffs) {
    const auto [l, m] = lm;
    const auto [p, unused] = legendre_pair(l, std::abs(m), x, s);
    u += coeff * p * azimuthal(m, phi).value;
  }
  return u;
}

HarmonicSample HarmonicField::sample(double theta, double phi) const {
  HarmonicSample out;
  for (const auto& [lm, coeff] : coeffs) {
    const HarmonicSample y = real_harmonic_derivatives(lm.first, lm.second, theta, phi);
    out.value += coeff * y.value;
    out.dTheta += coeff * y.dTheta;
    out.dPhi += coeff * y.dPhi;
    out.dThetaTheta += coeff * y.dThetaTheta;
    out.dThetaPhi += coeff * y.dThetaPhi;
    out.dPhiPhi += coeff * y.dPhiPhi;
  }
  return out;
}

HarmonicField seeded_field(int lmax, std::uint64_t seed) {
  if (lmax < 2) throw Error(ErrorCode::InvalidArgument, "lmax must be at least 2");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  HarmonicField field;
  for (int l = 2; l <= lmax; ++l)
    for (int m = -l; m <= l; ++m) field.coeffs[{l, m}] = dist(rng);
  return field;
}

HarmonicField normalized(HarmonicField field) {
  static const std::vector<Vec3> directions = icosphere(6).vertices();
  double peak = 0.0;
  for (const Vec3& w : directions) peak = std::max(peak, std::abs(field.value(w)));
  if (!(peak > 0.0)) throw Error(ErrorCode::InvalidArgument, "harmonic field vanishes");
  for (auto& [lm, coeff] : field.coeffs) coeff /= peak;
  return field;
}

PerturbedSphere perturbed_sphere(const PerturbationSpec& spec) {
  if (!(spec.amplitude >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "amplitude must be nonnegative");
  HarmonicField raw;
  if (spec.coeffs) {
    for (const auto& [lm, coeff] : *spec.coeffs) {
      check_degree(lm.first, lm.second);
      if (lm.first < 2)
        throw Error(ErrorCode::InvalidArgument, "degrees 0 and 1 are not shape modes");
    }
    raw.coeffs = *spec.coeffs;
  } else {
    raw = seeded_field(spec.lmax, spec.seed);
  }
  PerturbedSphere out{icosphere(spec.level), normalized(std::move(raw))};

  std::vector<Vec3> x = out.mesh.vertices();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double radius = 1.0 + spec.amplitude * out.field.value(x[i]);
    if (!(radius > 0.0)) {
      throw Error(ErrorCode::SelfIntersectingRadial,
                  "radius " + std::to_string(radius) + " at vertex " + std::to_string(i));
    }
    x[i] *= radius;
  }
  const TriMesh radial = out.mesh.with_positions(std::move(x));
  out.scale = std::sqrt(4.0 * std::numbers::pi / measure(radial).area);
  out.mesh = normalize_area(radial);
  out.energy = measure(out.mesh).tracefreeEnergy;
  return out;
}

TriMesh normalize_area(const TriMesh& mesh, double target) {
  if (!(target > 0.0)) throw Error(ErrorCode::InvalidArgument, "target area must be positive");
  const auto& x = mesh.vertices();
  double area = 0.0;
  Vec3 moment = Vec3::Zero();
  for (const Face& t : mesh.faces()) {
    const double a = 0.5 * (x[t[1]] - x[t[0]]).cross(x[t[2]] - x[t[0]]).norm();
    area += a;
    moment += a * (x[t[0]] + x[t[1]] + x[t[2]]) / 3.0;
  }
  const Vec3 center = moment / area;
  const double lambda = std::sqrt(target / area);
  std::vector<Vec3> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = center + lambda * (x[i] - center);
  return mesh.with_positions(std::move(y));
}

// ---------------------------------------------------------------------------
// Sphere fit

SphereFit fit_sphere(std::span<const Vec3> points, std::span<const double> weights) {
  if (points.size() != weights.size())
    throw Error(ErrorCode::LengthMismatch, "points and weights differ in length");
  if (points.size() < 4) throw Error(ErrorCode::SingularFit, "need at least four points");

  double wsum = 0.0;
  Vec3 centroid = Vec3::Zero();
  for (std::size_t i = 0; i < points.size(); ++i) {
    wsum += weights[i];
    centroid += weights[i] * points[i];
  }
  centroid /= wsum;
  double spread = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i)
    spread += weights[i] * (points[i] - centroid).squaredNorm();
  spread = std::sqrt(spread / wsum);
  if (!(spread > 0.0)) throw Error(ErrorCode::SingularFit, "all points coincide");

  // |q|^2 = 2 <y, q> + d in centered, scaled coordinates q = (p - centroid) / spread
  Eigen::Matrix4d normal = Eigen::Matrix4d::Zero();
  Eigen::Vector4d rhs = Eigen::Vector4d::Zero();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3 q = (points[i] - centroid) / spread;
    const Eigen::Vector4d row(2.0 * q.x(), 2.0 * q.y(), 2.0 * q.z(), 1.0);
    normal += weights[i] * row * row.transpose();
    rhs += weights[i] * q.squaredNorm() * row;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(normal);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 1e-12 * hi)) throw Error(ErrorCode::SingularFit, "points are (nearly) coplanar");
  const Eigen::Vector4d sol = normal.ldlt().solve(rhs);
  const Vec3 y = sol.head<3>();
  const double r2 = sol[3] + y.squaredNorm();
  if (!(r2 > 0.0)) throw Error(ErrorCode::SingularFit, "algebraic fit has no real radius");

  SphereFit fit;
  fit.center = centroid + spread * y;
  fit.radius = spread * std::sqrt(r2);

  for (int iter = 0; iter < 20; ++iter) {
    Eigen::Matrix4d jtj = Eigen::Matrix4d::Zero();
    Eigen::Vector4d jtr = Eigen::Vector4d::Zero();
    for (std::size_t i = 0; i < points.size(); ++i) {
      const Vec3 d = points[i] - fit.center;
      const double dist = d.norm();
      if (dist == 0.0) continue;
      const double r = dist - fit.radius;
      const Eigen::Vector4d jac(-d.x() / dist, -d.y() / dist, -d.z() / dist, -1.0);
      jtj += weights[i] * jac * jac.transpose();
      jtr += weights[i] * r * jac;
    }
    const Eigen::Vector4d step = jtj.ldlt().solve(-jtr);
    if (!step.allFinite()) break;
    fit.center += step.head<3>();
    fit.radius += step[3];
    if (step.norm() <= 1e-15 * (fit.radius + fit.center.norm())) break;
  }

  double ss = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double r = (points[i] - fit.center).norm() - fit.radius;
    ss += weights[i] * r * r;
  }
  fit.rms = std::sqrt(ss / wsum);
  return fit;
}

SphereFit fit_sphere(const TriMesh& mesh, const VertexGeometry& geom) {
  return fit_sphere(mesh.vertices(), geom.area);
}

}  // namespace wf
