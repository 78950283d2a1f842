#pragma once

#include <utility>

#include "willflow/mesh.hpp"

namespace wf {

struct RemeshOptions {
  /// Edges shorter than lo * mean or longer than hi * mean are collapsed / split.
  std::pair<double, double> edgeLenBand{0.5, 2.0};
  /// Relaxation factor for tangential smoothing of vertices touched by an operation.
  double tangentialSmoothWeight = 0.5;
  int maxPasses = 10;
};

struct RemeshStats {
  int splits = 0;
  int collapses = 0;
  int flips = 0;
  int smoothed = 0;
  /// Largest |normal component| / (local mean edge length) among smoothing moves.
  double maxNormalDisplacement = 0.0;

  bool changed() const { return splits + collapses + flips > 0; }
};

struct RemeshResult {
  TriMesh mesh;
  RemeshStats stats;
};

/// Splits long edges at their midpoints, collapses short ones when the link
/// condition allows, flips interior edges toward Delaunay, and relaxes the
/// vertices touched by any of these within their tangent planes. Meshes with
/// every edge in band and every edge locally Delaunay come back unchanged.
/// Throws RemeshFailed if the result would not be a valid TriMesh.
RemeshResult remesh(const TriMesh& mesh, const RemeshOptions& options);

/// Splits a single edge (v0, v1) at its midpoint: +1 vertex, +3 edges, +2 faces.
TriMesh split_edge(const TriMesh& mesh, int v0, int v1);

}  // namespace wf
