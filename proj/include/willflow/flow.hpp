#pragma once

#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "willflow/error.hpp"
#include "willflow/functionals.hpp"
#include "willflow/geometry.hpp"
#include "willflow/mesh.hpp"

namespace wf {

struct FlowConfig {
  int maxSteps = 2000;
  /// Initial time step; empty means 0.1 * (mean edge length)^4 of the input mesh.
  std::optional<double> dtInit;
  double armijoFactor = 0.1;
  double shrink = 0.5;
  /// Stop when the L2 norm of the mass-normalized gradient, rescaled to area
  /// 4 pi, drops below this.
  double gradTol = 1e-6 / std::sqrt(4.0 * std::numbers::pi);
  double energyTol = 1e-4;
  int remeshEvery = 25;
  std::pair<double, double> edgeLenBand{0.5, 2.0};
  double tangentialSmoothWeight = 0.5;
  double energyCap = 8.0 * std::numbers::pi;
  /// Solve (M + dt P) d = -dt M Wvec with P = K M^-1 K (K the cotan stiffness
  /// matrix) instead of the explicit step d = -dt Wvec.
  bool semiImplicit = true;
  /// Upper bound on the step size; the step grows by dtGrowth after each
  /// accepted step until it hits this.
  double dtMax = 1e-3;
  double dtGrowth = 1.5;

  /// Throws InvalidArgument when a field is out of range.
  void validate() const;
};

/// Discrete Willmore energy  W = 1/4 sum_i A_i |Hvec_i|^2.
double discrete_energy(const TriMesh& mesh);

/// Exact gradient dW/df_i of discrete_energy (not mass-normalized).
std::vector<Vec3> energy_gradient(const TriMesh& mesh);

/// The flow moves vertex i with velocity -Wvec_i, Wvec_i = kWillmoreVectorScale * g_i / A_i.
/// The L2 gradient of 1/4 int |H|^2 is (Delta H + |A°|^2 H) nu / 2; the Willmore
/// vector drops the 1/2, so that Wvec ~ (Delta H + |A°|^2 H) nu.
inline constexpr double kWillmoreVectorScale = 2.0;

/// sqrt(sum_i |g_i|^2 / A_i): L2 norm of the mass-normalized gradient.
double mass_normalized_norm(std::span<const Vec3> gradient, std::span<const double> area);

/// Delta H + |A°|^2 H at every vertex, using the cotan Laplacian.
std::vector<double> willmore_operator_pointwise(const TriMesh& mesh, const VertexGeometry& geom);

enum class KillingField { TranslationX, TranslationY, TranslationZ, Dilation, RotationZ };

/// sum_i <-g_i, X(f_i)> / (sum_i |g_i| * max_i |X(f_i)|). X is centered at the
/// barycenter for the dilation and rotation fields.
double conformal_killing_residual(const TriMesh& mesh, KillingField kind);

struct FlowState {
  double t = 0.0;
  TriMesh mesh;
  VertexGeometry geom;
  FunctionalRecord record;
  std::vector<Vec3> gradient;  ///< dW/df_i
  double gradNorm = 0.0;       ///< mass-normalized, rescaled to area 4 pi
  bool stepAccepted = false;
  double dtUsed = 0.0;
  double dtNext = 0.0;
  int connectivityEpoch = 0;
};

/// Builds the state (geometry, record, gradient) for a mesh at time t.
FlowState make_state(TriMesh mesh, const FlowConfig& config, double t = 0.0);

/// One backtracking step along -Wvec (or its preconditioned version). Returns the input unchanged with stepAccepted =
/// false when the gradient is already below gradTol. Throws
/// EnergyCapExceeded when E >= energyCap and LineSearchStalled when no step
/// size >= 1e-14 * dtInit satisfies the Armijo condition.
FlowState step(const FlowState& state, const FlowConfig& config);

/// One row of the per-step trace. Moment and volume entries feed the
/// evolution-identity diagnostics.
struct TraceRow {
  int step = 0;
  double t = 0.0;
  double dt = 0.0;
  FunctionalRecord record;
  double gradNorm = 0.0;
  double supAoSq = 0.0;
  double aAccum = 0.0;
  double bAccum = 0.0;
  double supAccum = 0.0;
  bool remeshed = false;
  int connectivityEpoch = 0;

  double alpha = 0.0;  ///< int |grad H|^2 + |A°|^2 H^2
  double beta = 0.0;   ///< int |A°|^2 |H| + |grad H| |A°|
  double gapRatio = 0.0;  ///< sup |A°|^2 / (A * ||Wvec||^2)

  Vec3 lumpedMoment = Vec3::Zero();  ///< sum_i A_i f_i
  double lumpedHalfSq = 0.0;         ///< sum_i A_i |f_i|^2 / 2
  Vec3 momentRhs = Vec3::Zero();     ///< sum_i A_i f_i <Hvec_i, Wvec_i>
  double halfSqRhs = 0.0;            ///< sum_i A_i |f_i|^2 / 2 <Hvec_i, Wvec_i>
  double volumeRhs = 0.0;            ///< sum_i A_i |A°|^2_i H_i
};

struct RemeshEvent {
  int step = 0;
  FunctionalRecord before;
  FunctionalRecord after;
  int splits = 0;
  int collapses = 0;
  int flips = 0;
};

enum class Termination { GradTol, EnergyTol, MaxSteps, Stalled };
std::string to_string(Termination reason);

struct FlowTrace {
  std::vector<TraceRow> rows;
  std::vector<RemeshEvent> remeshEvents;
  Termination termination = Termination::MaxSteps;
  double maxGapRatio = 0.0;
  bool energyMonotone = true;

  const TraceRow& first() const { return rows.front(); }
  const TraceRow& last() const { return rows.back(); }
};

/// Row for the current state, with accumulators continued from `previous`.
TraceRow trace_row(const FlowState& state, int stepIndex, const TraceRow* previous);

struct FlowResult {
  FlowTrace trace;
  TriMesh finalMesh;
};

/// Carries the trace recorded up to the failure.
class FlowError : public Error {
 public:
  FlowError(const Error& cause, std::shared_ptr<const FlowTrace> trace)
      : Error(cause.code(), cause.what(), Formatted{}), trace_(std::move(trace)) {}
  const FlowTrace& trace() const { return *trace_; }

 private:
  std::shared_ptr<const FlowTrace> trace_;
};

/// Iterates step() until gradTol, energyTol, maxSteps or a stalled line
/// search, remeshing every remeshEvery accepted steps. Errors from step()
/// are rethrown as FlowError.
FlowResult run(const TriMesh& mesh, const FlowConfig& config);

enum class MomentKind { Coordinate, HalfSquare };

/// Relative residual between central differences of sum_i A_i u(f_i) along the
/// trace and sum_i u(f_i) <Hvec_i, g_i>, pooled over all interior rows whose
/// neighbours share their connectivity. Coordinate uses u = x^axis.
/// Throws InsufficientTrace when fewer than three such rows exist.
double moment_evolution_residual(const FlowTrace& trace, MomentKind kind, int axis = 0);

/// Same pooling for dV/dt against sum_i A_i |A°|^2_i H_i.
double volume_evolution_residual(const FlowTrace& trace);

}  // namespace wf
