#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace wf {

using Vec3 = Eigen::Vector3d;
using Face = std::array<int, 3>;

/// Undirected edge with its two incident faces. `face0` traverses v0 -> v1,
/// `face1` traverses v1 -> v0; `opp0` / `opp1` are the vertices opposite the
/// edge in those faces.
struct Edge {
  int v0;
  int v1;
  int face0;
  int face1;
  int opp0;
  int opp1;
};

/// Closed, consistently oriented, genus-0 triangle mesh. Every instance that
/// exists has passed validation, so downstream code may rely on the invariants
/// (2-manifold, no boundary, chi = 2, non-degenerate faces, positive volume).
class TriMesh {
 public:
  /// Validates and builds. Throws wf::Error (NonManifold, OpenBoundary,
  /// WrongGenus, InconsistentOrientation, DegenerateFace, InvalidArgument).
  static TriMesh build(std::vector<Vec3> vertices, std::vector<Face> faces);

  /// Same connectivity, new positions. Re-checks the geometric invariants
  /// (degeneracy, positive volume) but skips the combinatorial ones.
  TriMesh with_positions(std::vector<Vec3> positions) const;

  const std::vector<Vec3>& vertices() const noexcept { return vertices_; }
  const std::vector<Face>& faces() const noexcept { return faces_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  std::size_t num_vertices() const noexcept { return vertices_.size(); }
  std::size_t num_faces() const noexcept { return faces_.size(); }
  std::size_t num_edges() const noexcept { return edges_.size(); }

  /// V - E + F.
  long euler_characteristic() const noexcept {
    return static_cast<long>(num_vertices()) - static_cast<long>(num_edges()) +
           static_cast<long>(num_faces());
  }

  double mean_edge_length() const;
  double signed_volume() const;

 private:
  TriMesh() = default;
  void check_geometry() const;

  std::vector<Vec3> vertices_;
  std::vector<Face> faces_;
  std::vector<Edge> edges_;
};

double mean_edge_length(std::span<const Vec3> positions, std::span<const Edge> edges);
double signed_volume(std::span<const Vec3> positions, std::span<const Face> faces);

// ---------------------------------------------------------------------------
// I/O

enum class MeshFormat { Off, Obj };

/// Format from the file extension (.off / .obj, case-insensitive).
MeshFormat format_from_path(const std::filesystem::path& path);

/// Throws ParseError (with 1-based line number) or any TriMesh::build error.
TriMesh read_mesh(const std::filesystem::path& path, MeshFormat format);
TriMesh read_mesh(const std::filesystem::path& path);

/// Positions are written with 17 significant digits, which round-trips doubles.
void write_mesh(const TriMesh& mesh, const std::filesystem::path& path, MeshFormat format);
void write_mesh(const TriMesh& mesh, const std::filesystem::path& path);

}  // namespace wf
