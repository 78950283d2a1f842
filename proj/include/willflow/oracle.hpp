#pragma once

// Smooth-surface reference values. Everything here works from closed-form
// first and second fundamental forms of a (theta, phi) parametrization and
// tensor-product Gauss-Legendre quadrature; it shares no code with the mesh
// pipeline so it can serve as an independent check.

#include <functional>
#include <variant>
#include <vector>

#include "willflow/functionals.hpp"
#include "willflow/shapes.hpp"

namespace wf::oracle {

struct EllipsoidSurface {
  double a = 1.0;
  double b = 1.0;
  double c = 1.0;
};

/// scale * (1 + amplitude * u(w)) * w over the unit sphere.
struct RadialGraphSurface {
  HarmonicField field;
  double amplitude = 0.0;
  double scale = 1.0;
};

using SmoothSurface = std::variant<EllipsoidSurface, RadialGraphSurface>;

/// Local differential geometry at one parameter point. `H` is the mean
/// curvature (sum of principal curvatures) with respect to the interior
/// normal, so the unit sphere has H = 2.
struct SurfacePoint {
  double theta = 0.0;
  double phi = 0.0;
  Vec3 position = Vec3::Zero();
  Vec3 outwardNormal = Vec3::Zero();
  double areaElement = 0.0;  ///< sqrt(det g) in d theta d phi
  double H = 0.0;
  double K = 0.0;
  double metric[3] = {0, 0, 0};  ///< g_tt, g_tp, g_pp

  double tracefreeSq() const { return 0.5 * H * H - 2.0 * K; }
};

SurfacePoint evaluate(const SmoothSurface& surface, double theta, double phi);

/// Gauss-Legendre nodes and weights on [lo, hi].
struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
Rule gauss_legendre(int n, double lo, double hi);

/// int_surface integrand dmu with `order` nodes in theta and 2 * order in phi.
double integrate(const SmoothSurface& surface, int order,
                 const std::function<double(const SurfacePoint&)>& integrand);

/// All functionals on the exact surface. Checks that doubling the order moves
/// every value by at most 1e-8 relative; throws QuadratureNotConverged
/// otherwise. Throws InvalidArgument for order < 32.
FunctionalRecord analytic_functionals(const SmoothSurface& surface, int order = 64);

/// Laplace-Beltrami of H at a point, by nested central differences of the
/// closed-form H in parameter space.
double laplacian_of_H(const SmoothSurface& surface, double theta, double phi);

/// int (Delta H + |A°|^2 H)^2 dmu, the squared L2 norm of the scalar Willmore operator.
double willmore_operator_sq_integral(const SmoothSurface& surface, int order = 64);

/// max of H^2/2 - 2K over an n x 2n parameter grid (interior nodes).
double sup_tracefree(const SmoothSurface& surface, int n);

}  // namespace wf::oracle
