#pragma once

#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "willflow/geometry.hpp"
#include "willflow/mesh.hpp"

namespace wf {

inline constexpr int kMaxIcosphereLevel = 8;

/// Icosahedron refined `level` times by 4-to-1 subdivision, vertices projected
/// to the unit sphere. 10 * 4^level + 2 vertices. Throws LevelTooLarge.
TriMesh icosphere(int level);

/// Icosphere vertices mapped by diag(a, b, c).
TriMesh ellipsoid(double a, double b, double c, int level);

// ---------------------------------------------------------------------------
// Real spherical harmonics

/// Orthonormal real spherical harmonic Y_lm at colatitude theta, longitude phi,
/// with derivatives. m > 0 uses cos(m phi), m < 0 uses sin(|m| phi).
struct HarmonicSample {
  double value = 0.0;
  double dTheta = 0.0;
  double dPhi = 0.0;
  double dThetaTheta = 0.0;
  double dThetaPhi = 0.0;
  double dPhiPhi = 0.0;
};

/// Value only; well defined at the poles.
double real_harmonic(int l, int m, double theta, double phi);

/// Value and derivatives up to second order; requires 0 < theta < pi.
HarmonicSample real_harmonic_derivatives(int l, int m, double theta, double phi);

/// Linear combination of real spherical harmonics, keyed by (l, m).
struct HarmonicField {
  std::map<std::pair<int, int>, double> coeffs;

  double value(const Vec3& unitDirection) const;
  HarmonicSample sample(double theta, double phi) const;
};

/// Input for perturbed_sphere. When `coeffs` is set it replaces the seeded draw.
struct PerturbationSpec {
  int lmax = 4;
  std::uint64_t seed = 0;
  double amplitude = 0.0;
  std::optional<std::map<std::pair<int, int>, double>> coeffs;
  int level = 4;
};

/// Seeded coefficients for 2 <= l <= lmax, uniform in [-1, 1], before normalization.
HarmonicField seeded_field(int lmax, std::uint64_t seed);

/// Rescales so that max |u| = 1 over a fixed dense sample of directions
/// (the vertices of a level-6 icosphere), independent of any mesh level.
HarmonicField normalized(HarmonicField field);

struct PerturbedSphere {
  TriMesh mesh;
  HarmonicField field;  ///< normalized u, so the radial graph is (1 + amplitude u) w
  double scale = 1.0;   ///< factor applied after the radial map to reach area 4 pi
  double energy = 0.0;  ///< measured tracefree energy of `mesh`
};

/// Radial graph (1 + amplitude * u(w)) w over an icosphere, area-normalized to
/// 4 pi about its barycenter. Throws SelfIntersectingRadial if 1 + amplitude u <= 0.
PerturbedSphere perturbed_sphere(const PerturbationSpec& spec);

/// Uniform scaling about the barycenter so that the area equals `target`.
TriMesh normalize_area(const TriMesh& mesh, double target = 4.0 * std::numbers::pi);

// ---------------------------------------------------------------------------
// Sphere fit

struct SphereFit {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
  double rms = 0.0;  ///< weighted RMS of |f_i - center| - radius
};

/// Weighted algebraic least-squares fit followed by up to 20 Gauss-Newton
/// iterations on sum w_i (|p_i - x| - R)^2. Throws SingularFit.
SphereFit fit_sphere(std::span<const Vec3> points, std::span<const double> weights);

/// Area-weighted fit using the mixed vertex areas.
SphereFit fit_sphere(const TriMesh& mesh, const VertexGeometry& geom);

}  // namespace wf
