#include <Eigen/Geometry>

#include "doctest.h"
#include "support.hpp"
#include "willflow/error.hpp"
#include "willflow/functionals.hpp"

using namespace wf;
using wftest::kPi;
using wftest::rel;

namespace {

TriMesh transformed(const TriMesh& m, const Eigen::Matrix3d& r, double s, const Vec3& c) {
  std::vector<Vec3> p = m.vertices();
  for (Vec3& x : p) x = s * (r * x) + c;
  return m.with_positions(std::move(p));
}

const nlohmann::json& ellipsoid_fixture() { return wftest::fixtures()["ellipsoid_1_1_1.25"]; }

double fixture(const char* key) { return ellipsoid_fixture()[key].get<double>(); }

}  // namespace

TEST_SUITE("functionals") {
  TEST_CASE("level-5 unit icosphere") {
    const FunctionalRecord r = measure(icosphere(5));
    CHECK(rel(r.area, 4 * kPi) <= 0.005);
    CHECK(r.barycenter.norm() <= 1e-10);
    CHECK(rel(r.quadMoment, 1.0) <= 0.005);
    CHECK(rel(r.volume, 4 * kPi / 3) <= 0.005);
    CHECK(rel(r.totalMeanCurv, 8 * kPi) <= 0.02);
    CHECK(rel(r.willmore, 4 * kPi) <= 0.02);
    CHECK(r.tracefreeEnergy <= 0.05);
    CHECK(std::abs(iso_deficit(r)) <= 0.02);
    CHECK(r.isoDeficit == iso_deficit(r));
  }

  TEST_CASE("translation equivariance") {
    const TriMesh m = ellipsoid(1, 1.1, 1.25, 4);
    const FunctionalRecord a = measure(m);
    const FunctionalRecord b = measure(transformed(m, Eigen::Matrix3d::Identity(), 1.0, Vec3(5, 0, 0)));
    CHECK(std::abs(a.area - b.area) <= 1e-10);
    CHECK(std::abs(a.quadMoment - b.quadMoment) <= 1e-10);
    CHECK(std::abs(a.volume - b.volume) <= 1e-10);
    CHECK(std::abs(a.totalMeanCurv - b.totalMeanCurv) <= 1e-10);
    CHECK(std::abs(a.willmore - b.willmore) <= 1e-10);
    CHECK(std::abs(a.tracefreeEnergy - b.tracefreeEnergy) <= 1e-10);
    CHECK((b.barycenter - a.barycenter - Vec3(5, 0, 0)).norm() <= 1e-12);
  }

  TEST_CASE("rigid motion and scaling") {
    const TriMesh m = wftest::noisy_sphere(3, 0.05, 21, Vec3(1, 0.9, 1.2));
    const Eigen::Matrix3d rot =
        Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
    const Vec3 c(0.3, -1.0, 2.0);
    const FunctionalRecord a = measure(m);
    const FunctionalRecord r = measure(transformed(m, rot, 1.0, c));
    CHECK((r.barycenter - (rot * a.barycenter + c)).norm() <= 1e-10);
    CHECK(std::abs(r.area - a.area) <= 1e-10);
    CHECK(std::abs(r.quadMoment - a.quadMoment) <= 1e-10);
    CHECK(std::abs(r.volume - a.volume) <= 1e-10);
    CHECK(std::abs(r.willmore - a.willmore) <= 1e-10);
    CHECK(std::abs(r.tracefreeEnergy - a.tracefreeEnergy) <= 1e-10);

    const double s = 2.5;
    const FunctionalRecord b = measure(transformed(m, Eigen::Matrix3d::Identity(), s, Vec3::Zero()));
    CHECK(rel(b.area, s * s * a.area) <= 1e-12);
    CHECK((b.barycenter - s * a.barycenter).norm() <= 1e-12);
    CHECK(rel(b.quadMoment, s * s * a.quadMoment) <= 1e-12);
    CHECK(rel(b.volume, s * s * s * a.volume) <= 1e-12);
    CHECK(rel(b.totalMeanCurv, s * a.totalMeanCurv) <= 1e-12);
    CHECK(rel(b.willmore, a.willmore) <= 1e-12);
    CHECK(std::abs(b.tracefreeEnergy - a.tracefreeEnergy) <= 1e-10);
    CHECK(std::abs(iso_deficit(b) - iso_deficit(a)) <= 1e-10);
    REQUIRE(a.dlmRatio.has_value());
    CHECK(std::abs(*b.dlmRatio - *a.dlmRatio) <= 1e-8);
  }

  TEST_CASE("record invariants on random meshes") {
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
      const TriMesh m = wftest::noisy_sphere(3, 0.08, seed, Vec3(1, 1, 1 + 0.1 * seed));
      const VertexGeometry g = vertex_geometry(m);
      const FunctionalRecord r = measure(m, g);
      CHECK(r.area > 0.0);
      CHECK(r.tracefreeEnergy >= 0.0);
      CHECK(r.quadMoment >= 0.0);
      CHECK(r.volume > 0.0);
      CHECK(r.willmore >= 4 * kPi * 0.95);
      // E = 2W - 8 pi up to the clamping correction.
      const double gap = r.tracefreeEnergy - (2 * r.willmore - 8 * kPi);
      CHECK(gap >= -1e-9);
      CHECK(gap <= r.clampedMass + 1e-9);
      CHECK(std::abs(gap - r.clampedMass) <= 1e-9);
      // Parallel axis: Q = (1/A) int |f|^2 - |C|^2.
      double second = 0.0;
      for (const Face& f : m.faces()) {
        const auto& p = m.vertices();
        const double area = 0.5 * (p[f[1]] - p[f[0]]).cross(p[f[2]] - p[f[0]]).norm();
        const Vec3 m01 = 0.5 * (p[f[0]] + p[f[1]]), m12 = 0.5 * (p[f[1]] + p[f[2]]),
                   m20 = 0.5 * (p[f[2]] + p[f[0]]);
        second += area * (m01.squaredNorm() + m12.squaredNorm() + m20.squaredNorm()) / 3.0;
      }
      CHECK(std::abs(r.quadMoment - (second / r.area - r.barycenter.squaredNorm())) <= 1e-12);
      // Volume does not depend on the origin.
      const FunctionalRecord shifted =
          measure(transformed(m, Eigen::Matrix3d::Identity(), 1.0, Vec3(10, -4, 3)));
      CHECK(std::abs(shifted.volume - r.volume) <= 1e-10);
    }
  }

  TEST_CASE("ellipsoid (1, 1, 1.25) against the oracle") {
    const FunctionalRecord r = measure(ellipsoid(1, 1, 1.25, 5));
    CHECK(rel(r.area, fixture("area")) <= 0.01);
    CHECK(r.barycenter.norm() <= 1e-10);
    CHECK(rel(r.quadMoment, fixture("quad_moment")) <= 0.01);
    CHECK(rel(r.volume, fixture("volume")) <= 0.01);
    CHECK(rel(r.totalMeanCurv, fixture("total_mean_curvature")) <= 0.01);
    CHECK(rel(r.willmore, fixture("willmore")) <= 0.01);
    CHECK(rel(r.tracefreeEnergy, fixture("tracefree_energy")) <= 0.05);
    CHECK(rel(iso_deficit(r), fixture("iso_deficit")) <= 0.02);
    REQUIRE(r.dlmRatio.has_value());
    CHECK(rel(*r.dlmRatio, fixture("dlm_ratio")) <= 0.05);
  }

  TEST_CASE("deficit tends to zero on refined icospheres") {
    double prev = 1e9;
    for (int level : {2, 3, 4, 5}) {
      const double d = iso_deficit(measure(icosphere(level)));
      CHECK(std::abs(d) < prev);
      prev = std::abs(d);
    }
    CHECK(prev <= 0.02);
  }

  TEST_CASE("deficit errors") {
    FunctionalRecord r;
    r.area = 1.0;
    r.volume = 0.0;
    try {
      iso_deficit(r);
      FAIL("no throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NonpositiveVolume);
    }
    CHECK(isoperimetric_sphere_ratio() == doctest::Approx(std::cbrt(36 * kPi)));
  }

  TEST_CASE("dlm ratio is undefined on an umbilic mesh") {
    const TriMesh m = icosphere(4);
    const VertexGeometry g = vertex_geometry(m);
    const FunctionalRecord r = measure(m, g);
    CHECK_FALSE(r.dlmRatio.has_value());
    try {
      dlm_ratio(r, g);
      FAIL("no throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ZeroDenominator);
    }
  }

  TEST_CASE("dlm ratio stays bounded on a shrinking perturbation family") {
    PerturbationSpec spec;
    spec.lmax = 4;
    spec.seed = 7;
    spec.level = 5;
    for (double eps : {0.06, 0.03, 0.015, 0.0075}) {
      spec.amplitude = eps;
      const FunctionalRecord r = measure(perturbed_sphere(spec).mesh);
      REQUIRE(r.dlmRatio.has_value());
      CHECK(*r.dlmRatio >= 1.0);
      CHECK(*r.dlmRatio <= 10.0);
    }
  }
}
