#pragma once

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "willflow/flow.hpp"
#include "willflow/mesh.hpp"
#include "willflow/remesh.hpp"
#include "willflow/shapes.hpp"

namespace wftest {

inline constexpr double kPi = std::numbers::pi;

inline const nlohmann::json& fixtures() {
  static const nlohmann::json j = [] {
    std::ifstream in(std::string(WF_FIXTURE_DIR) + "/oracle.json");
    return nlohmann::json::parse(in);
  }();
  return j;
}

inline double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

inline wf::TriMesh tetrahedron() {
  return wf::TriMesh::build({{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}},
                            {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}});
}

/// Icosphere level `level` with i.i.d. radial noise of relative size `noise`,
/// optionally scaled anisotropically. Always a valid mesh for small noise.
inline wf::TriMesh noisy_sphere(int level, double noise, std::uint64_t seed,
                                wf::Vec3 axes = wf::Vec3(1, 1, 1)) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const wf::TriMesh base = wf::icosphere(level);
  std::vector<wf::Vec3> p = base.vertices();
  for (wf::Vec3& x : p) x = (x * (1.0 + noise * u(rng))).cwiseProduct(axes);
  return base.with_positions(std::move(p));
}

/// Icosphere level 1 (42 vertices) with eight extra edge splits, then noise:
/// 50 vertices of irregular valence.
inline wf::TriMesh mesh50(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  wf::TriMesh m = wf::icosphere(1);
  while (m.num_vertices() < 50) {
    const wf::Edge& e = m.edges()[rng() % m.num_edges()];
    m = wf::split_edge(m, e.v0, e.v1);
  }
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<wf::Vec3> p = m.vertices();
  for (wf::Vec3& x : p) x = x.normalized() * (1.0 + 0.05 * u(rng));
  return m.with_positions(std::move(p));
}


/// Largest componentwise relative error between energy_gradient and central
/// differences of discrete_energy with step 1e-6 * mean edge. Components below
/// 1e-3 * max |g| are compared against that floor, since their relative error
/// is dominated by the roundoff of W itself.
inline double fd_gradient_error(const wf::TriMesh& mesh) {
  const std::vector<wf::Vec3> g = wf::energy_gradient(mesh);
  double gmax = 0.0;
  for (const wf::Vec3& v : g) gmax = std::max(gmax, v.cwiseAbs().maxCoeff());
  const double h = 1e-6 * mesh.mean_edge_length();
  double worst = 0.0;
  std::vector<wf::Vec3> p = mesh.vertices();
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const double x0 = p[i][c];
      p[i][c] = x0 + h;
      const double wp = wf::discrete_energy(mesh.with_positions(p));
      p[i][c] = x0 - h;
      const double wm = wf::discrete_energy(mesh.with_positions(p));
      p[i][c] = x0;
      const double fd = (wp - wm) / (2.0 * h);
      const double scale = std::max({std::abs(fd), std::abs(g[i][c]), 1e-3 * gmax});
      worst = std::max(worst, std::abs(fd - g[i][c]) / scale);
    }
  }
  return worst;
}

}  // namespace wftest
