#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "willflow/flow.hpp"
#include "willflow/functionals.hpp"
#include "willflow/shapes.hpp"

namespace wf {

inline constexpr int kReportSchemaVersion = 1;

/// A ladder of perturbed spheres sharing seed, degree and level, with amplitudes
/// epsilon * ladder[k], plus the thresholds the verdicts use.
struct FamilySpec {
  int lmax = 4;
  std::uint64_t seed = 7;
  double epsilon = 0.06;
  std::vector<double> ladder{1.0, 0.5, 0.25, 0.125};
  int level = 5;
  int quadOrder = 64;
  FlowConfig flow;

  double spreadBound = 4.0;
  double dlmBound = 10.0;
  double dlmStability = 0.2;
  double deficitBound = 5.0;
  double deficitFloor = -0.02;
  double fitTolerance = 1e-2;  ///< relative to R
  /// Extra (a, b, c) ellipsoids for the DLM and deficit experiments.
  std::vector<std::array<double, 3>> ellipsoids;

  PerturbationSpec rung(std::size_t k) const;
};

FamilySpec family_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FamilySpec& family);

/// Keys are the snake_case names of the FlowConfig fields; unknown keys are
/// rejected with InvalidArgument.
FlowConfig flow_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FlowConfig& config);

/// Keys: area, barycenter, quad_moment, volume, total_mean_curvature, willmore,
/// tracefree_energy, iso_deficit, dlm_ratio (null when undefined),
/// sup_tracefree, clamped_mass.
nlohmann::json to_json(const FunctionalRecord& rec);
nlohmann::json to_json(const SphereFit& fit);

/// Per-step trace table: step, t, dt, area, cx, cy, cz, q, volume, htot,
/// willmore, energy, grad_norm, sup_aosq, a_accum, b_accum, sup_accum, remesh_flag.
void write_trace_csv(const FlowTrace& trace, const std::filesystem::path& path);

/// Mesh as OFF plus `<path>.json` with the spec and the measured energy.
void write_generated(const PerturbedSphere& shape, const PerturbationSpec& spec,
                     const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Reports

enum class ExperimentKind { Stability, Limit, Dlm, Deficit };
std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& name);

inline constexpr std::array<const char*, 5> kDriftNames{"area", "barycenter", "quad_moment",
                                                        "volume", "htot"};
inline constexpr std::array<const char*, 5> kGapNames{"radius", "center", "quad_moment", "volume",
                                                      "htot"};

/// One flowed rung of a family.
struct RunEntry {
  std::size_t rung = 0;
  PerturbationSpec spec;
  /// Tracefree energy of the smooth initial surface (quadrature oracle); all
  /// ratios divide by this.
  double e0 = 0.0;
  double e0Mesh = 0.0;  ///< same, measured on the generated mesh
  FunctionalRecord initial;       ///< mesh at t = 0
  FunctionalRecord initialExact;  ///< smooth initial surface
  FunctionalRecord final;
  SphereFit fit;
  Termination termination = Termination::MaxSteps;
  int steps = 0;
  bool energyMonotone = true;
  double maxGapRatio = 0.0;

  /// |dA|, |dC|, |dQ|, |dV|, |dHtot| between the first and the last mesh.
  std::array<double, 5> drifts{};
  /// Part of each drift accumulated in remeshing jumps (sum of |jump|).
  std::array<double, 5> remeshJumps{};
  /// |R - r0|, |x - C(f0)|, |R^2 - Q(f0)|, |4 pi R^3 / 3 - V(f0)|, |8 pi R - Htot(f0)|
  /// with the smooth initial surface; r0 = sqrt(A(f0) / 4 pi).
  std::array<double, 5> gaps{};
  /// The same gaps against the mesh functionals at t = 0 and r0 = 1.
  std::array<double, 5> meshGaps{};
  double volumeExcess = 0.0;  ///< V(f0) - 4 pi R^3 / 3
  double htotExcess = 0.0;    ///< Htot(f0) - 8 pi R

  double aAccum = 0.0;
  double bAccum = 0.0;
  double supAccum = 0.0;

  bool converged() const {
    return termination == Termination::EnergyTol || termination == Termination::GradTol;
  }
};

/// One mesh of a DLM or deficit experiment.
struct MeshRow {
  std::string label;
  double energy = 0.0;  ///< E used for ratios
  std::optional<double> value;         ///< DLM ratio or deficit
  std::optional<double> refinedValue;  ///< same quantity one level finer
  std::optional<double> reference;     ///< oracle value when known
  std::string error;                   ///< error code name when the value is undefined
};

/// max / min of a per-rung ratio over the rungs with positive E0.
struct Spread {
  std::string name;
  double min = 0.0;
  double max = 0.0;
  double spread = 0.0;
  double slope = 0.0;  ///< least-squares slope through the origin of value vs E0
};

struct Check {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  bool pass = false;
  bool gating = true;  ///< false: reported, but does not decide the verdict
};

struct ExperimentReport {
  ExperimentKind kind = ExperimentKind::Stability;
  FamilySpec family;
  std::vector<RunEntry> runs;
  std::vector<MeshRow> rows;
  std::vector<Spread> spreads;
  std::vector<Check> checks;
  double remarkVolumeC = 0.0;  ///< max over runs of max(0, volumeExcess / E0)
  double remarkHtotC = 0.0;

  bool pass() const;
};

/// Generates and flows every rung. Throws GenerationFailed naming the rung when
/// generation fails or E0 reaches the energy cap, and RunDiverged (a FlowError
/// carrying the trace) when a flow fails.
std::vector<RunEntry> run_family(const FamilySpec& family);

ExperimentReport stability_experiment(const FamilySpec& family);
ExperimentReport stability_report(const FamilySpec& family, std::vector<RunEntry> runs);

/// Throws FitResidualTooLarge when a fitted sphere has rms > fitTolerance * R.
ExperimentReport limit_sphere_experiment(const FamilySpec& family);
ExperimentReport limit_report(const FamilySpec& family, std::vector<RunEntry> runs);

/// A mesh for the DLM / deficit experiments; `refined` is the same surface one
/// level finer, `exact` the oracle record when available.
struct MeshCase {
  std::string label;
  TriMesh mesh;
  std::optional<TriMesh> refined;
  std::optional<double> energy;  ///< overrides the measured E for ratios
  std::optional<FunctionalRecord> exact;
};

/// The family's perturbed-sphere ladder followed by its ellipsoids.
std::vector<MeshCase> family_meshes(const FamilySpec& family, bool withRefined);

ExperimentReport dlm_experiment(const std::vector<MeshCase>& meshes, const FamilySpec& family);
ExperimentReport deficit_experiment(const std::vector<MeshCase>& meshes,
                                    const FamilySpec& family);

/// Writes `<stem>.csv`, `<stem>.json` and, for flow experiments, one
/// `<stem>.<quantity>.svg` per drift or gap. `stem` is the report path without
/// extension. Throws IoError.
void emit(const ExperimentReport& report, const std::filesystem::path& reportPath);

std::string report_csv(const ExperimentReport& report);
nlohmann::json report_json(const ExperimentReport& report);
/// Scatter of values against E0 with the least-squares line through the origin.
std::string report_svg(const ExperimentReport& report, std::size_t quantity);

}  // namespace wf
