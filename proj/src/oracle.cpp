#include "willflow/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "willflow/error.hpp"

namespace wf::oracle {

namespace {

struct ParamDerivatives {
  Vec3 f, ft, fp, ftt, ftp, fpp;
};

ParamDerivatives derivatives(const EllipsoidSurface& s, double t, double p) {
  const double st = std::sin(t), ct = std::cos(t), sp = std::sin(p), cp = std::cos(p);
  const Vec3 axes(s.a, s.b, s.c);
  auto scaled = [&](double x, double y, double z) -> Vec3 { return Vec3(x, y, z).cwiseProduct(axes); };
  return {scaled(st * cp, st * sp, ct),      scaled(ct * cp, ct * sp, -st),
          scaled(-st * sp, st * cp, 0.0),    scaled(-st * cp, -st * sp, -ct),
          scaled(-ct * sp, ct * cp, 0.0),    scaled(-st * cp, -st * sp, 0.0)};
}

ParamDerivatives derivatives(const RadialGraphSurface& s, double t, double p) {
  const double st = std::sin(t), ct = std::cos(t), sp = std::sin(p), cp = std::cos(p);
  const Vec3 w(st * cp, st * sp, ct);
  const Vec3 wt(ct * cp, ct * sp, -st);
  const Vec3 wp(-st * sp, st * cp, 0.0);
  const Vec3 wtt = -w;
  const Vec3 wtp(-ct * sp, ct * cp, 0.0);
  const Vec3 wpp(-st * cp, -st * sp, 0.0);
  const HarmonicSample u = s.field.sample(t, p);
  const double e = s.amplitude;
  const double r = 1.0 + e * u.value;
  const double rt = e * u.dTheta, rp = e * u.dPhi;
  const double rtt = e * u.dThetaTheta, rtp = e * u.dThetaPhi, rpp = e * u.dPhiPhi;
  const double k = s.scale;
  return {k * r * w,
          k * (rt * w + r * wt),
          k * (rp * w + r * wp),
          k * (rtt * w + 2.0 * rt * wt + r * wtt),
          k * (rtp * w + rt * wp + rp * wt + r * wtp),
          k * (rpp * w + 2.0 * rp * wp + r * wpp)};
}

SurfacePoint from_derivatives(const ParamDerivatives& d, double t, double p) {
  SurfacePoint out;
  out.theta = t;
  out.phi = p;
  out.position = d.f;
  const double gtt = d.ft.dot(d.ft), gtp = d.ft.dot(d.fp), gpp = d.fp.dot(d.fp);
  const Vec3 cr = d.ft.cross(d.fp);
  const double jac = cr.norm();
  out.outwardNormal = cr / jac;
  out.areaElement = jac;
  const double L = d.ftt.dot(out.outwardNormal);
  const double M = d.ftp.dot(out.outwardNormal);
  const double N = d.fpp.dot(out.outwardNormal);
  const double det = jac * jac;
  out.K = (L * N - M * M) / det;
  out.H = -(gtt * N - 2.0 * gtp * M + gpp * L) / det;
  out.metric[0] = gtt;
  out.metric[1] = gtp;
  out.metric[2] = gpp;
  return out;
}

struct Sums {
  double area = 0, volume = 0, htot = 0, hsq = 0, ksum = 0, tracefree = 0, second = 0;
  Vec3 moment = Vec3::Zero();
  double supTracefree = 0;
};

Sums accumulate(const SmoothSurface& surface, int order) {
  const Rule rt = gauss_legendre(order, 0.0, std::numbers::pi);
  const Rule rp = gauss_legendre(2 * order, 0.0, 2.0 * std::numbers::pi);
  Sums s;
  for (std::size_t i = 0; i < rt.nodes.size(); ++i) {
    for (std::size_t j = 0; j < rp.nodes.size(); ++j) {
      const SurfacePoint q = evaluate(surface, rt.nodes[i], rp.nodes[j]);
      const double w = rt.weights[i] * rp.weights[j] * q.areaElement;
      s.area += w;
      s.moment += w * q.position;
      s.second += w * q.position.squaredNorm();
      s.volume += w * q.position.dot(q.outwardNormal) / 3.0;
      s.htot += w * q.H;
      s.hsq += w * q.H * q.H;
      s.ksum += w * q.K;
      s.tracefree += w * q.tracefreeSq();
      s.supTracefree = std::max(s.supTracefree, q.tracefreeSq());
    }
  }
  return s;
}

FunctionalRecord to_record(const Sums& s) {
  FunctionalRecord rec;
  rec.area = s.area;
  rec.barycenter = s.moment / s.area;
  rec.quadMoment = s.second / s.area - rec.barycenter.squaredNorm();
  rec.volume = s.volume;
  rec.totalMeanCurv = s.htot;
  rec.willmore = 0.25 * s.hsq;
  rec.tracefreeEnergy = s.tracefree;
  rec.isoDeficit = s.area / std::pow(s.volume, 2.0 / 3.0) - isoperimetric_sphere_ratio();
  if (s.tracefree > 1e-12)
    rec.dlmRatio = (s.hsq - 2.0 * s.ksum - s.htot * s.htot / (2.0 * s.area)) / s.tracefree;
  rec.supTracefree = s.supTracefree;
  return rec;
}

void check_close(const char* name, double coarse, double fine) {
  const double scale = std::max(std::abs(coarse), std::abs(fine));
  if (std::abs(coarse - fine) > 1e-8 * scale + 1e-12) {
    throw Error(ErrorCode::QuadratureNotConverged,
                std::string(name) + " changed from " + std::to_string(coarse) + " to " +
                    std::to_string(fine) + " when doubling the quadrature order");
  }
}

}  // namespace

SurfacePoint evaluate(const SmoothSurface& surface, double theta, double phi) {
  return std::visit(
      [&](const auto& s) { return from_derivatives(derivatives(s, theta, phi), theta, phi); },
      surface);
}

Rule gauss_legendre(int n, double lo, double hi) {
  Rule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = mid - half * x;
    rule.nodes[n - 1 - i] = mid + half * x;
    rule.weights[i] = rule.weights[n - 1 - i] = half * w;
  }
  return rule;
}

double integrate(const SmoothSurface& surface, int order,
                 const std::function<double(const SurfacePoint&)>& integrand) {
  const Rule rt = gauss_legendre(order, 0.0, std::numbers::pi);
  const Rule rp = gauss_legendre(2 * order, 0.0, 2.0 * std::numbers::pi);
  double sum = 0.0;
  for (std::size_t i = 0; i < rt.nodes.size(); ++i) {
    for (std::size_t j = 0; j < rp.nodes.size(); ++j) {
      const SurfacePoint q = evaluate(surface, rt.nodes[i], rp.nodes[j]);
      sum += rt.weights[i] * rp.weights[j] * q.areaElement * integrand(q);
    }
  }
  return sum;
}

FunctionalRecord analytic_functionals(const SmoothSurface& surface, int order) {
  if (order < 32) throw Error(ErrorCode::InvalidArgument, "quadrature order must be >= 32");
  const FunctionalRecord coarse = to_record(accumulate(surface, order));
  const FunctionalRecord fine = to_record(accumulate(surface, 2 * order));
  check_close("area", coarse.area, fine.area);
  for (int k = 0; k < 3; ++k) check_close("barycenter", coarse.barycenter[k], fine.barycenter[k]);
  check_close("quad_moment", coarse.quadMoment, fine.quadMoment);
  check_close("volume", coarse.volume, fine.volume);
  check_close("total_mean_curvature", coarse.totalMeanCurv, fine.totalMeanCurv);
  check_close("willmore", coarse.willmore, fine.willmore);
  check_close("tracefree_energy", coarse.tracefreeEnergy, fine.tracefreeEnergy);
  check_close("iso_deficit", coarse.isoDeficit, fine.isoDeficit);
  return coarse;
}

double laplacian_of_H(const SmoothSurface& surface, double theta, double phi) {
  const double h = 1e-4;
  auto H = [&](double t, double p) { return evaluate(surface, t, p).H; };
  // Flux components sqrt(g) g^{ij} d_j H at a parameter point.
  auto flux = [&](double t, double p) {
    const SurfacePoint q = evaluate(surface, t, p);
    const double ht = (H(t + h, p) - H(t - h, p)) / (2.0 * h);
    const double hp = (H(t, p + h) - H(t, p - h)) / (2.0 * h);
    const double det = q.areaElement * q.areaElement;
    const double itt = q.metric[2] / det, itp = -q.metric[1] / det, ipp = q.metric[0] / det;
    return std::pair<double, double>{q.areaElement * (itt * ht + itp * hp),
                                     q.areaElement * (itp * ht + ipp * hp)};
  };
  const double divT = (flux(theta + h, phi).first - flux(theta - h, phi).first) / (2.0 * h);
  const double divP = (flux(theta, phi + h).second - flux(theta, phi - h).second) / (2.0 * h);
  return (divT + divP) / evaluate(surface, theta, phi).areaElement;
}

double willmore_operator_sq_integral(const SmoothSurface& surface, int order) {
  return integrate(surface, order, [&](const SurfacePoint& q) {
    const double w = laplacian_of_H(surface, q.theta, q.phi) + q.tracefreeSq() * q.H;
    return w * w;
  });
}

double sup_tracefree(const SmoothSurface& surface, int n) {
  double best = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = std::numbers::pi * (i + 0.5) / n;
    for (int j = 0; j < 2 * n; ++j) {
      const double p = std::numbers::pi * (j + 0.5) / n;
      best = std::max(best, evaluate(surface, t, p).tracefreeSq());
    }
  }
  return best;
}

}  // namespace wf::oracle
