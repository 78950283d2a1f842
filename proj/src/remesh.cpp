#include "willflow/remesh.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "willflow/error.hpp"

namespace wf {

namespace {

double min_angle(const Vec3& a, const Vec3& b, const Vec3& c) {
  auto angle = [](const Vec3& p, const Vec3& q, const Vec3& r) {
    const Vec3 u = q - p, v = r - p;
    return std::atan2(u.cross(v).norm(), u.dot(v));
  };
  return std::min({angle(a, b, c), angle(b, c, a), angle(c, a, b)});
}

Vec3 face_normal(const Vec3& a, const Vec3& b, const Vec3& c) { return (b - a).cross(c - a); }

struct Working {
  std::vector<Vec3> pos;
  std::vector<Face> faces;

  double face_min_angle(const Face& f) const { return min_angle(pos[f[0]], pos[f[1]], pos[f[2]]); }
};

std::vector<std::vector<int>> vertex_faces(std::size_t nv, const std::vector<Face>& faces) {
  std::vector<std::vector<int>> out(nv);
  for (std::size_t f = 0; f < faces.size(); ++f)
    for (int v : faces[f]) out[v].push_back(static_cast<int>(f));
  return out;
}

std::vector<int> neighbours(int v, const std::vector<int>& ring, const std::vector<Face>& faces) {
  std::vector<int> out;
  for (int f : ring)
    for (int u : faces[f])
      if (u != v) out.push_back(u);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

TriMesh rebuild(Working w) {
  try {
    return TriMesh::build(std::move(w.pos), std::move(w.faces));
  } catch (const Error& e) {
    throw Error(ErrorCode::RemeshFailed, std::string("remeshed mesh is invalid: ") + e.what());
  }
}

// Replace faces f0 = (v0, v1, a) and f1 = (v1, v0, b) by four faces around the midpoint.
void apply_split(Working& w, const Edge& e) {
  const int m = static_cast<int>(w.pos.size());
  w.pos.push_back(0.5 * (w.pos[e.v0] + w.pos[e.v1]));
  w.faces[e.face0] = {e.v0, m, e.opp0};
  w.faces.push_back({m, e.v1, e.opp0});
  w.faces[e.face1] = {e.v1, m, e.opp1};
  w.faces.push_back({m, e.v0, e.opp1});
}

}  // namespace

TriMesh split_edge(const TriMesh& mesh, int v0, int v1) {
  const int lo = std::min(v0, v1), hi = std::max(v0, v1);
  for (const Edge& e : mesh.edges()) {
    if (e.v0 == lo && e.v1 == hi) {
      Working w{mesh.vertices(), mesh.faces()};
      apply_split(w, e);
      return rebuild(std::move(w));
    }
  }
  throw Error(ErrorCode::InvalidArgument,
              "edge (" + std::to_string(v0) + ", " + std::to_string(v1) + ") does not exist");
}

RemeshResult remesh(const TriMesh& mesh, const RemeshOptions& options) {
  const double h = mesh.mean_edge_length();
  const double longEdge = options.edgeLenBand.second * h;
  const double shortEdge = options.edgeLenBand.first * h;
  // No operation may create an angle below the smallest one present on entry.
  double angleFloor = std::numbers::pi;
  for (const Face& f : mesh.faces())
    angleFloor = std::min(angleFloor, min_angle(mesh.vertices()[f[0]], mesh.vertices()[f[1]],
                                                mesh.vertices()[f[2]]));

  RemeshStats stats;
  TriMesh current = mesh;
  for (int pass = 0; pass < options.maxPasses; ++pass) {
    Working w{current.vertices(), current.faces()};
    const std::size_t nv = w.pos.size();
    const auto ring = vertex_faces(nv, w.faces);
    std::vector<char> faceUsed(w.faces.size(), 0);
    std::vector<char> vertexUsed(nv, 0);
    std::vector<char> touched(nv, 0);
    std::vector<int> removedVertex(nv, -1);  // collapse target, or -1
    std::vector<char> faceDead(w.faces.size(), 0);
    int ops = 0;

    // Longest first; independent splits only.
    std::vector<std::size_t> order(current.num_edges());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<double> edgeLength(current.num_edges());
    for (std::size_t i = 0; i < edgeLength.size(); ++i) {
      const Edge& e = current.edges()[i];
      edgeLength[i] = (w.pos[e.v0] - w.pos[e.v1]).norm();
    }
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return edgeLength[a] > edgeLength[b]; });

    for (std::size_t idx : order) {
      const Edge& e = current.edges()[idx];
      if (edgeLength[idx] <= longEdge) break;
      if (faceUsed[e.face0] || faceUsed[e.face1]) continue;
      const Vec3 m = 0.5 * (w.pos[e.v0] + w.pos[e.v1]);
      const double worst = std::min({min_angle(w.pos[e.v0], m, w.pos[e.opp0]),
                                     min_angle(m, w.pos[e.v1], w.pos[e.opp0]),
                                     min_angle(w.pos[e.v1], m, w.pos[e.opp1]),
                                     min_angle(m, w.pos[e.v0], w.pos[e.opp1])});
      if (worst < angleFloor) continue;
      faceUsed[e.face0] = faceUsed[e.face1] = 1;
      vertexUsed[e.v0] = vertexUsed[e.v1] = vertexUsed[e.opp0] = vertexUsed[e.opp1] = 1;
      apply_split(w, e);
      touched.resize(w.pos.size(), 0);
      touched.back() = 1;
      touched[e.v0] = touched[e.v1] = 1;
      ++stats.splits;
      ++ops;
    }
    faceUsed.resize(w.faces.size(), 1);
    faceDead.resize(w.faces.size(), 0);

    // Shortest first; collapse to the midpoint when the link condition holds.
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const Edge& e = current.edges()[*it];
      if (edgeLength[*it] >= shortEdge) break;
      const int a = e.v0, b = e.v1;
      bool conflict = vertexUsed[a] || vertexUsed[b];
      for (int f : ring[a]) conflict = conflict || faceUsed[f];
      for (int f : ring[b]) conflict = conflict || faceUsed[f];
      if (conflict) continue;
      const auto na = neighbours(a, ring[a], w.faces);
      const auto nb = neighbours(b, ring[b], w.faces);
      std::vector<int> common;
      std::set_intersection(na.begin(), na.end(), nb.begin(), nb.end(), std::back_inserter(common));
      if (common.size() != 2 || na.size() <= 3 || nb.size() <= 3) continue;
      if (ring[e.opp0].size() <= 3 || ring[e.opp1].size() <= 3) continue;
      const Vec3 m = 0.5 * (w.pos[a] + w.pos[b]);
      bool ok = true;
      for (int v : {a, b}) {
        for (int f : ring[v]) {
          if (f == e.face0 || f == e.face1) continue;
          Face nf = w.faces[f];
          for (int& u : nf)
            if (u == b) u = a;
          std::array<Vec3, 3> p{w.pos[nf[0]], w.pos[nf[1]], w.pos[nf[2]]};
          for (int k = 0; k < 3; ++k)
            if (nf[k] == a) p[k] = m;
          const Vec3 before = face_normal(w.pos[w.faces[f][0]], w.pos[w.faces[f][1]],
                                          w.pos[w.faces[f][2]]);
          const Vec3 after = face_normal(p[0], p[1], p[2]);
          if (after.dot(before) <= 0.5 * before.norm() * after.norm() ||
              min_angle(p[0], p[1], p[2]) < angleFloor) {
            ok = false;
          }
        }
      }
      if (!ok) continue;
      for (int v : {a, b}) {
        for (int f : ring[v]) {
          faceUsed[f] = 1;
          for (int u : w.faces[f]) vertexUsed[u] = 1;
        }
      }
      faceDead[e.face0] = faceDead[e.face1] = 1;
      for (int f : ring[b])
        for (int& u : w.faces[f])
          if (u == b) u = a;
      w.pos[a] = m;
      removedVertex[b] = a;
      touched[a] = 1;
      ++stats.collapses;
      ++ops;
    }

    // Delaunay flips on edges untouched so far: flip when the opposite angles sum past pi.
    for (const Edge& e : current.edges()) {
      if (faceUsed[e.face0] || faceUsed[e.face1]) continue;
      if (vertexUsed[e.v0] || vertexUsed[e.v1] || vertexUsed[e.opp0] || vertexUsed[e.opp1]) continue;
      const Vec3 &p0 = w.pos[e.v0], &p1 = w.pos[e.v1], &a = w.pos[e.opp0], &b = w.pos[e.opp1];
      auto cot = [](const Vec3& apex, const Vec3& x, const Vec3& y) {
        const Vec3 u = x - apex, v = y - apex;
        return u.dot(v) / u.cross(v).norm();
      };
      if (cot(a, p0, p1) + cot(b, p0, p1) >= -1e-10) continue;
      if (e.opp0 == e.opp1 || ring[e.v0].size() <= 3 || ring[e.v1].size() <= 3) continue;
      const auto nopp = neighbours(e.opp0, ring[e.opp0], w.faces);
      if (std::binary_search(nopp.begin(), nopp.end(), e.opp1)) continue;
      const Vec3 n0 = face_normal(p0, p1, a), n1 = face_normal(p1, p0, b);
      if (n0.normalized().dot(n1.normalized()) < std::cos(std::numbers::pi / 6.0)) continue;
      // (v0, v1, a), (v1, v0, b) -> (a, v0, b), (b, v1, a)
      const Face f0{e.opp0, e.v0, e.opp1};
      const Face f1{e.opp1, e.v1, e.opp0};
      const Vec3 m0 = face_normal(a, p0, b), m1 = face_normal(b, p1, a);
      if (m0.dot(n0 + n1) <= 0.0 || m1.dot(n0 + n1) <= 0.0) continue;
      if (std::min(w.face_min_angle(f0), w.face_min_angle(f1)) < angleFloor) continue;
      faceUsed[e.face0] = faceUsed[e.face1] = 1;
      vertexUsed[e.v0] = vertexUsed[e.v1] = vertexUsed[e.opp0] = vertexUsed[e.opp1] = 1;
      w.faces[e.face0] = f0;
      w.faces[e.face1] = f1;
      touched[e.v0] = touched[e.v1] = touched[e.opp0] = touched[e.opp1] = 1;
      ++stats.flips;
      ++ops;
    }

    if (ops == 0) break;

    // Compact away collapsed vertices and dead faces.
    std::vector<int> remap(w.pos.size(), -1);
    Working next;
    for (std::size_t v = 0; v < w.pos.size(); ++v) {
      if (v < removedVertex.size() && removedVertex[v] >= 0) continue;
      remap[v] = static_cast<int>(next.pos.size());
      next.pos.push_back(w.pos[v]);
    }
    std::vector<char> nextTouched(next.pos.size(), 0);
    for (std::size_t v = 0; v < w.pos.size(); ++v)
      if (remap[v] >= 0 && v < touched.size() && touched[v]) nextTouched[remap[v]] = 1;
    for (std::size_t f = 0; f < w.faces.size(); ++f) {
      if (faceDead[f]) continue;
      const Face& t = w.faces[f];
      next.faces.push_back({remap[t[0]], remap[t[1]], remap[t[2]]});
    }

    // Tangential relaxation of touched vertices toward their neighbour centroid.
    if (options.tangentialSmoothWeight > 0.0) {
      const auto nring = vertex_faces(next.pos.size(), next.faces);
      for (std::size_t v = 0; v < next.pos.size(); ++v) {
        if (!nextTouched[v]) continue;
        const auto nbrs = neighbours(static_cast<int>(v), nring[v], next.faces);
        Vec3 centroid = Vec3::Zero();
        double local = 0.0;
        for (int u : nbrs) {
          centroid += next.pos[u];
          local += (next.pos[u] - next.pos[v]).norm();
        }
        centroid /= static_cast<double>(nbrs.size());
        local /= static_cast<double>(nbrs.size());
        Vec3 n = Vec3::Zero();
        for (int f : nring[v]) {
          const Face& t = next.faces[f];
          n += face_normal(next.pos[t[0]], next.pos[t[1]], next.pos[t[2]]);
        }
        n.normalize();
        Vec3 d = centroid - next.pos[v];
        d -= d.dot(n) * n;
        d *= options.tangentialSmoothWeight;
        const Vec3 target = next.pos[v] + d;
        bool ok = true;
        for (int f : nring[v]) {
          std::array<Vec3, 3> p{next.pos[next.faces[f][0]], next.pos[next.faces[f][1]],
                                next.pos[next.faces[f][2]]};
          const Vec3 before = face_normal(p[0], p[1], p[2]);
          for (int k = 0; k < 3; ++k)
            if (next.faces[f][k] == static_cast<int>(v)) p[k] = target;
          if (min_angle(p[0], p[1], p[2]) < angleFloor ||
              face_normal(p[0], p[1], p[2]).dot(before) <= 0.0) {
            ok = false;
          }
        }
        if (!ok) continue;
        next.pos[v] = target;
        stats.maxNormalDisplacement =
            std::max(stats.maxNormalDisplacement, std::abs(d.dot(n)) / local);
        ++stats.smoothed;
      }
    }
    current = rebuild(std::move(next));
  }
  return {std::move(current), stats};
}

}  // namespace wf
