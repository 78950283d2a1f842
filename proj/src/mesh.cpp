#include "willflow/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "willflow/error.hpp"

namespace wf {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonManifold: return "NonManifold";
    case ErrorCode::OpenBoundary: return "OpenBoundary";
    case ErrorCode::WrongGenus: return "WrongGenus";
    case ErrorCode::InconsistentOrientation: return "InconsistentOrientation";
    case ErrorCode::DegenerateFace: return "DegenerateFace";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::NumericallyDegenerate: return "NumericallyDegenerate";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NonpositiveVolume: return "NonpositiveVolume";
    case ErrorCode::ZeroDenominator: return "ZeroDenominator";
    case ErrorCode::EnergyCapExceeded: return "EnergyCapExceeded";
    case ErrorCode::LineSearchStalled: return "LineSearchStalled";
    case ErrorCode::InsufficientTrace: return "InsufficientTrace";
    case ErrorCode::RemeshFailed: return "RemeshFailed";
    case ErrorCode::LevelTooLarge: return "LevelTooLarge";
    case ErrorCode::SelfIntersectingRadial: return "SelfIntersectingRadial";
    case ErrorCode::SingularFit: return "SingularFit";
    case ErrorCode::QuadratureNotConverged: return "QuadratureNotConverged";
    case ErrorCode::RunDiverged: return "RunDiverged";
    case ErrorCode::GenerationFailed: return "GenerationFailed";
    case ErrorCode::FitResidualTooLarge: return "FitResidualTooLarge";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

namespace {

struct HalfEdge {
  int lo;
  int hi;
  int face;
  int opposite;
  bool forward;  // traversed lo -> hi
};

std::string face_name(std::size_t f, const Face& face) {
  return "face " + std::to_string(f) + " (" + std::to_string(face[0]) + ", " +
         std::to_string(face[1]) + ", " + std::to_string(face[2]) + ")";
}

std::string edge_name(int a, int b) {
  return "edge (" + std::to_string(a) + ", " + std::to_string(b) + ")";
}

std::vector<Edge> build_edges(const std::vector<Face>& faces) {
  std::vector<HalfEdge> half;
  half.reserve(3 * faces.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (int k = 0; k < 3; ++k) {
      const int a = faces[f][k];
      const int b = faces[f][(k + 1) % 3];
      const int c = faces[f][(k + 2) % 3];
      half.push_back({std::min(a, b), std::max(a, b), static_cast<int>(f), c, a < b});
    }
  }
  std::sort(half.begin(), half.end(), [](const HalfEdge& x, const HalfEdge& y) {
    return x.lo != y.lo ? x.lo < y.lo : (x.hi != y.hi ? x.hi < y.hi : x.face < y.face);
  });

  std::vector<Edge> edges;
  edges.reserve(half.size() / 2);
  for (std::size_t i = 0; i < half.size();) {
    std::size_t j = i;
    while (j < half.size() && half[j].lo == half[i].lo && half[j].hi == half[i].hi) ++j;
    const std::size_t count = j - i;
    if (count == 1) {
      throw Error(ErrorCode::OpenBoundary,
                  edge_name(half[i].lo, half[i].hi) + " has only one incident face");
    }
    if (count > 2) {
      throw Error(ErrorCode::NonManifold, edge_name(half[i].lo, half[i].hi) + " has " +
                                              std::to_string(count) + " incident faces");
    }
    const HalfEdge& p = half[i];
    const HalfEdge& q = half[i + 1];
    if (p.forward == q.forward) {
      throw Error(ErrorCode::InconsistentOrientation,
                  edge_name(p.lo, p.hi) + " is traversed in the same direction by faces " +
                      std::to_string(p.face) + " and " + std::to_string(q.face));
    }
    const HalfEdge& fwd = p.forward ? p : q;
    const HalfEdge& bwd = p.forward ? q : p;
    edges.push_back({p.lo, p.hi, fwd.face, bwd.face, fwd.opposite, bwd.opposite});
    i = j;
  }
  return edges;
}

// Every vertex must be referenced and its link must be a single cycle.
void check_vertex_links(std::size_t nv, const std::vector<Face>& faces) {
  std::vector<int> start(nv + 1, 0);
  for (const Face& f : faces)
    for (int v : f) ++start[v + 1];
  for (std::size_t v = 0; v < nv; ++v) {
    if (start[v + 1] == 0) {
      throw Error(ErrorCode::NonManifold,
                  "vertex " + std::to_string(v) + " is not referenced by any face");
    }
    start[v + 1] += start[v];
  }
  // link[v] holds (next, prev) pairs: in face (v, b, c) the link goes b -> c.
  std::vector<std::pair<int, int>> link(start[nv]);
  std::vector<int> fill(start.begin(), start.end() - 1);
  for (const Face& f : faces) {
    for (int k = 0; k < 3; ++k) link[fill[f[k]]++] = {f[(k + 1) % 3], f[(k + 2) % 3]};
  }
  for (std::size_t v = 0; v < nv; ++v) {
    auto first = link.begin() + start[v];
    auto last = link.begin() + start[v + 1];
    std::sort(first, last);
    const auto deg = last - first;
    int cur = first->first;
    for (long step = 0; step < deg; ++step) {
      auto it = std::lower_bound(first, last, std::pair<int, int>{cur, -1});
      if (it == last || it->first != cur) {
        throw Error(ErrorCode::NonManifold,
                    "vertex " + std::to_string(v) + " has a broken one-ring");
      }
      cur = it->second;
      if (cur == first->first && step + 1 < deg) {
        throw Error(ErrorCode::NonManifold,
                    "vertex " + std::to_string(v) + " has more than one fan of faces");
      }
    }
  }
}

}  // namespace

double mean_edge_length(std::span<const Vec3> positions, std::span<const Edge> edges) {
  double sum = 0.0;
  for (const Edge& e : edges) sum += (positions[e.v0] - positions[e.v1]).norm();
  return edges.empty() ? 0.0 : sum / static_cast<double>(edges.size());
}

double signed_volume(std::span<const Vec3> positions, std::span<const Face> faces) {
  double vol = 0.0;
  for (const Face& f : faces) vol += positions[f[0]].dot(positions[f[1]].cross(positions[f[2]]));
  return vol / 6.0;
}

TriMesh TriMesh::build(std::vector<Vec3> vertices, std::vector<Face> faces) {
  if (vertices.empty() || faces.empty())
    throw Error(ErrorCode::InvalidArgument, "mesh needs at least one vertex and one face");
  const int nv = static_cast<int>(vertices.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (int v : faces[f]) {
      if (v < 0 || v >= nv)
        throw Error(ErrorCode::InvalidArgument, face_name(f, faces[f]) + " index out of range");
    }
    if (faces[f][0] == faces[f][1] || faces[f][1] == faces[f][2] || faces[f][0] == faces[f][2])
      throw Error(ErrorCode::DegenerateFace, face_name(f, faces[f]) + " repeats a vertex");
  }
  for (std::size_t v = 0; v < vertices.size(); ++v) {
    if (!vertices[v].allFinite())
      throw Error(ErrorCode::InvalidArgument, "vertex " + std::to_string(v) + " is not finite");
  }

  TriMesh mesh;
  mesh.edges_ = build_edges(faces);
  check_vertex_links(vertices.size(), faces);
  mesh.vertices_ = std::move(vertices);
  mesh.faces_ = std::move(faces);
  if (mesh.euler_characteristic() != 2) {
    throw Error(ErrorCode::WrongGenus,
                "V - E + F = " + std::to_string(mesh.euler_characteristic()) + ", expected 2");
  }
  mesh.check_geometry();
  return mesh;
}

TriMesh TriMesh::with_positions(std::vector<Vec3> positions) const {
  if (positions.size() != vertices_.size())
    throw Error(ErrorCode::LengthMismatch, "position count differs from vertex count");
  TriMesh mesh;
  mesh.vertices_ = std::move(positions);
  mesh.faces_ = faces_;
  mesh.edges_ = edges_;
  mesh.check_geometry();
  return mesh;
}

void TriMesh::check_geometry() const {
  const double h = mean_edge_length();
  const double min_area = 1e-12 * h * h;
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    const Face& t = faces_[f];
    const double area =
        0.5 * (vertices_[t[1]] - vertices_[t[0]]).cross(vertices_[t[2]] - vertices_[t[0]]).norm();
    if (!(area > min_area))
      throw Error(ErrorCode::DegenerateFace, face_name(f, t) + " has area " + std::to_string(area));
  }
  const double vol = signed_volume();
  if (!(vol > 0.0)) {
    throw Error(ErrorCode::InconsistentOrientation,
                "signed volume " + std::to_string(vol) + " is not positive (inward orientation)");
  }
}

double TriMesh::mean_edge_length() const { return wf::mean_edge_length(vertices_, edges_); }

double TriMesh::signed_volume() const { return wf::signed_volume(vertices_, faces_); }

}  // namespace wf
