#include "willflow/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>

#include "willflow/error.hpp"
#include "willflow/oracle.hpp"

namespace wf {

using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;
// Rungs with E0 below this have no meaningful ratio; they are checked for
// stationarity instead.
constexpr double kZeroEnergy = 1e-12;

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string short_num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json optional_number(const std::optional<double>& x) {
  return x ? number_or_null(*x) : json(nullptr);
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.empty()) throw Error(ErrorCode::IoError, "empty output path");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out = open_output(path);
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

template <class T>
void read_into(const json& j, const char* key, T& target) {
  if (j.contains(key)) target = j.at(key).get<T>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* what) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, std::string(what) + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find_if(known.begin(), known.end(),
                     [&](const char* k) { return it.key() == k; }) == known.end()) {
      throw Error(ErrorCode::InvalidArgument,
                  std::string("unknown key '") + it.key() + "' in " + what);
    }
  }
}

std::array<double, 5> drift_between(const FunctionalRecord& a, const FunctionalRecord& b) {
  return {std::abs(b.area - a.area), (b.barycenter - a.barycenter).norm(),
          std::abs(b.quadMoment - a.quadMoment), std::abs(b.volume - a.volume),
          std::abs(b.totalMeanCurv - a.totalMeanCurv)};
}

std::array<double, 5> limit_gaps(const SphereFit& fit, const FunctionalRecord& f0, double r0) {
  const double R = fit.radius;
  return {std::abs(R - r0), (fit.center - f0.barycenter).norm(), std::abs(R * R - f0.quadMoment),
          std::abs(4.0 * kPi * R * R * R / 3.0 - f0.volume),
          std::abs(8.0 * kPi * R - f0.totalMeanCurv)};
}

Spread make_spread(const std::string& name, const std::vector<double>& e0,
                   const std::vector<double>& values) {
  Spread s;
  s.name = name;
  s.min = std::numeric_limits<double>::infinity();
  s.max = 0.0;
  double xy = 0.0, xx = 0.0;
  int n = 0;
  for (std::size_t k = 0; k < e0.size(); ++k) {
    if (!(e0[k] > kZeroEnergy)) continue;
    const double ratio = values[k] / e0[k];
    s.min = std::min(s.min, ratio);
    s.max = std::max(s.max, ratio);
    xy += e0[k] * values[k];
    xx += e0[k] * e0[k];
    ++n;
  }
  if (n == 0) {
    s.min = s.max = 0.0;
    s.spread = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  s.spread = s.min > 0.0 ? s.max / s.min : std::numeric_limits<double>::infinity();
  s.slope = xx > 0.0 ? xy / xx : 0.0;
  return s;
}

void add_spread_checks(ExperimentReport& report, const std::string& prefix,
                       const std::vector<double>& e0,
                       const std::vector<std::array<double, 5>>& values,
                       const std::array<const char*, 5>& names, bool gating) {
  for (std::size_t q = 0; q < names.size(); ++q) {
    std::vector<double> column;
    for (const auto& v : values) column.push_back(v[q]);
    Spread s = make_spread(prefix + names[q], e0, column);
    if (std::isfinite(s.spread) || s.max > 0.0) {
      report.checks.push_back({"spread:" + s.name, s.spread, report.family.spreadBound,
                               s.spread <= report.family.spreadBound, gating});
    }
    report.spreads.push_back(std::move(s));
  }
}

std::vector<double> energies(const std::vector<RunEntry>& runs) {
  std::vector<double> out;
  for (const RunEntry& r : runs) out.push_back(r.e0);
  return out;
}

void add_run_checks(ExperimentReport& report) {
  for (const RunEntry& r : report.runs) {
    const std::string tag = "[" + std::to_string(r.rung) + "]";
    report.checks.push_back({"converged" + tag, r.converged() ? 1.0 : 0.0, 1.0, r.converged()});
    report.checks.push_back(
        {"energy_monotone" + tag, r.energyMonotone ? 1.0 : 0.0, 1.0, r.energyMonotone});
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Specs and configs

PerturbationSpec FamilySpec::rung(std::size_t k) const {
  PerturbationSpec spec;
  spec.lmax = lmax;
  spec.seed = seed;
  spec.amplitude = epsilon * ladder.at(k);
  spec.level = level;
  return spec;
}

FlowConfig flow_config_from_json(const json& j) {
  reject_unknown(j,
                 {"max_steps", "dt_init", "armijo_factor", "shrink", "grad_tol", "energy_tol",
                  "remesh_every", "edge_len_band", "tangential_smooth_weight", "energy_cap",
                  "semi_implicit", "dt_max", "dt_growth"},
                 "flow config");
  FlowConfig c;
  try {
    read_into(j, "max_steps", c.maxSteps);
    if (j.contains("dt_init") && !j.at("dt_init").is_null()) c.dtInit = j.at("dt_init").get<double>();
    read_into(j, "armijo_factor", c.armijoFactor);
    read_into(j, "shrink", c.shrink);
    read_into(j, "grad_tol", c.gradTol);
    read_into(j, "energy_tol", c.energyTol);
    read_into(j, "remesh_every", c.remeshEvery);
    if (j.contains("edge_len_band")) {
      const auto band = j.at("edge_len_band").get<std::vector<double>>();
      if (band.size() != 2) throw Error(ErrorCode::InvalidArgument, "edge_len_band needs two entries");
      c.edgeLenBand = {band[0], band[1]};
    }
    read_into(j, "tangential_smooth_weight", c.tangentialSmoothWeight);
    read_into(j, "energy_cap", c.energyCap);
    read_into(j, "semi_implicit", c.semiImplicit);
    read_into(j, "dt_max", c.dtMax);
    read_into(j, "dt_growth", c.dtGrowth);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("flow config: ") + e.what());
  }
  c.validate();
  return c;
}

json to_json(const FlowConfig& c) {
  return {{"max_steps", c.maxSteps},
          {"dt_init", c.dtInit ? json(*c.dtInit) : json(nullptr)},
          {"armijo_factor", c.armijoFactor},
          {"shrink", c.shrink},
          {"grad_tol", c.gradTol},
          {"energy_tol", c.energyTol},
          {"remesh_every", c.remeshEvery},
          {"edge_len_band", {c.edgeLenBand.first, c.edgeLenBand.second}},
          {"tangential_smooth_weight", c.tangentialSmoothWeight},
          {"energy_cap", c.energyCap},
          {"semi_implicit", c.semiImplicit},
          {"dt_max", c.dtMax},
          {"dt_growth", c.dtGrowth}};
}

FamilySpec family_from_json(const json& j) {
  reject_unknown(j,
                 {"lmax", "seed", "epsilon", "ladder", "level", "quad_order", "flow",
                  "spread_bound", "dlm_bound", "dlm_stability", "deficit_bound", "deficit_floor",
                  "fit_tolerance", "ellipsoids"},
                 "family spec");
  FamilySpec f;
  try {
    read_into(j, "lmax", f.lmax);
    read_into(j, "seed", f.seed);
    read_into(j, "epsilon", f.epsilon);
    read_into(j, "ladder", f.ladder);
    read_into(j, "level", f.level);
    read_into(j, "quad_order", f.quadOrder);
    if (j.contains("flow")) f.flow = flow_config_from_json(j.at("flow"));
    read_into(j, "spread_bound", f.spreadBound);
    read_into(j, "dlm_bound", f.dlmBound);
    read_into(j, "dlm_stability", f.dlmStability);
    read_into(j, "deficit_bound", f.deficitBound);
    read_into(j, "deficit_floor", f.deficitFloor);
    read_into(j, "fit_tolerance", f.fitTolerance);
    read_into(j, "ellipsoids", f.ellipsoids);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("family spec: ") + e.what());
  }
  if (f.lmax < 2) throw Error(ErrorCode::InvalidArgument, "lmax must be at least 2");
  if (!(f.epsilon >= 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be nonnegative");
  for (double k : f.ladder)
    if (!(k >= 0.0)) throw Error(ErrorCode::InvalidArgument, "ladder factors must be nonnegative");
  for (const auto& e : f.ellipsoids)
    if (!(e[0] > 0.0 && e[1] > 0.0 && e[2] > 0.0))
      throw Error(ErrorCode::InvalidArgument, "ellipsoid semi-axes must be positive");
  return f;
}

json to_json(const FamilySpec& f) {
  return {{"lmax", f.lmax},
          {"seed", f.seed},
          {"epsilon", f.epsilon},
          {"ladder", f.ladder},
          {"level", f.level},
          {"quad_order", f.quadOrder},
          {"flow", to_json(f.flow)},
          {"spread_bound", f.spreadBound},
          {"dlm_bound", f.dlmBound},
          {"dlm_stability", f.dlmStability},
          {"deficit_bound", f.deficitBound},
          {"deficit_floor", f.deficitFloor},
          {"fit_tolerance", f.fitTolerance},
          {"ellipsoids", f.ellipsoids}};
}

json to_json(const FunctionalRecord& r) {
  return {{"area", number_or_null(r.area)},
          {"barycenter",
           {number_or_null(r.barycenter[0]), number_or_null(r.barycenter[1]),
            number_or_null(r.barycenter[2])}},
          {"quad_moment", number_or_null(r.quadMoment)},
          {"volume", number_or_null(r.volume)},
          {"total_mean_curvature", number_or_null(r.totalMeanCurv)},
          {"willmore", number_or_null(r.willmore)},
          {"tracefree_energy", number_or_null(r.tracefreeEnergy)},
          {"iso_deficit", number_or_null(r.isoDeficit)},
          {"dlm_ratio", optional_number(r.dlmRatio)},
          {"sup_tracefree", number_or_null(r.supTracefree)},
          {"clamped_mass", number_or_null(r.clampedMass)}};
}

json to_json(const SphereFit& fit) {
  return {{"center", {fit.center[0], fit.center[1], fit.center[2]}},
          {"radius", fit.radius},
          {"rms", fit.rms}};
}

void write_trace_csv(const FlowTrace& trace, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "step,t,dt,area,cx,cy,cz,q,volume,htot,willmore,energy,grad_norm,sup_aosq,a_accum,"
         "b_accum,sup_accum,remesh_flag\n";
  for (const TraceRow& r : trace.rows) {
    const FunctionalRecord& f = r.record;
    out << r.step << ',' << num(r.t) << ',' << num(r.dt) << ',' << num(f.area) << ','
        << num(f.barycenter[0]) << ',' << num(f.barycenter[1]) << ',' << num(f.barycenter[2])
        << ',' << num(f.quadMoment) << ',' << num(f.volume) << ',' << num(f.totalMeanCurv) << ','
        << num(f.willmore) << ',' << num(f.tracefreeEnergy) << ',' << num(r.gradNorm) << ','
        << num(r.supAoSq) << ',' << num(r.aAccum) << ',' << num(r.bAccum) << ','
        << num(r.supAccum) << ',' << (r.remeshed ? 1 : 0) << '\n';
  }
  write_text(path, out.str());
}

void write_generated(const PerturbedSphere& shape, const PerturbationSpec& spec,
                     const std::filesystem::path& path) {
  write_mesh(shape.mesh, path);
  json coeffs = json::array();
  for (const auto& [lm, c] : shape.field.coeffs) coeffs.push_back({lm.first, lm.second, c});
  json sidecar = {{"spec",
                   {{"lmax", spec.lmax},
                    {"seed", spec.seed},
                    {"eps", spec.amplitude},
                    {"level", spec.level},
                    {"explicit_coeffs", spec.coeffs.has_value()}}},
                  {"normalized_coeffs", coeffs},
                  {"scale", shape.scale},
                  {"tracefree_energy", shape.energy},
                  {"vertices", shape.mesh.num_vertices()},
                  {"faces", shape.mesh.num_faces()}};
  std::filesystem::path side = path;
  side += ".json";
  write_text(side, sidecar.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Reports

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Stability: return "stability";
    case ExperimentKind::Limit: return "limit";
    case ExperimentKind::Dlm: return "dlm";
    case ExperimentKind::Deficit: return "deficit";
  }
  return "unknown";
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
  for (ExperimentKind k : {ExperimentKind::Stability, ExperimentKind::Limit, ExperimentKind::Dlm,
                           ExperimentKind::Deficit}) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown experiment '" + name + "'");
}

bool ExperimentReport::pass() const {
  for (const Check& c : checks)
    if (c.gating && !c.pass) return false;
  return true;
}

std::vector<RunEntry> run_family(const FamilySpec& family) {
  struct Generated {
    PerturbedSphere shape;
    FunctionalRecord exact;
  };
  std::vector<Generated> generated;
  for (std::size_t k = 0; k < family.ladder.size(); ++k) {
    const PerturbationSpec spec = family.rung(k);
    const std::string name =
        "rung " + std::to_string(k) + " (eps = " + num(spec.amplitude) + ")";
    try {
      PerturbedSphere shape = perturbed_sphere(spec);
      oracle::RadialGraphSurface surface{shape.field, spec.amplitude, shape.scale};
      FunctionalRecord exact = oracle::analytic_functionals(surface, family.quadOrder);
      const double e0 = std::max(shape.energy, exact.tracefreeEnergy);
      if (!(e0 < family.flow.energyCap)) {
        throw Error(ErrorCode::EnergyCapExceeded,
                    "E0 = " + num(e0) + " is not below the cap " + num(family.flow.energyCap));
      }
      generated.push_back({std::move(shape), exact});
    } catch (const Error& e) {
      throw Error(ErrorCode::GenerationFailed, name + ": " + e.what());
    }
  }

  std::vector<RunEntry> runs;
  for (std::size_t k = 0; k < generated.size(); ++k) {
    const Generated& g = generated[k];
    RunEntry entry;
    entry.rung = k;
    entry.spec = family.rung(k);
    entry.e0 = g.exact.tracefreeEnergy;
    entry.e0Mesh = g.shape.energy;
    entry.initialExact = g.exact;

    FlowResult result = [&] {
      try {
        return run(g.shape.mesh, family.flow);
      } catch (const FlowError& e) {
        throw FlowError(Error(ErrorCode::RunDiverged, "rung " + std::to_string(k) + ": " + e.what()),
                        std::make_shared<FlowTrace>(e.trace()));
      }
    }();
    const FlowTrace& trace = result.trace;
    entry.initial = trace.first().record;
    entry.final = trace.last().record;
    entry.termination = trace.termination;
    entry.steps = trace.last().step;
    entry.energyMonotone = trace.energyMonotone;
    entry.maxGapRatio = trace.maxGapRatio;
    entry.aAccum = trace.last().aAccum;
    entry.bAccum = trace.last().bAccum;
    entry.supAccum = trace.last().supAccum;
    entry.drifts = drift_between(entry.initial, entry.final);
    for (const RemeshEvent& ev : trace.remeshEvents) {
      const auto jump = drift_between(ev.before, ev.after);
      for (std::size_t q = 0; q < jump.size(); ++q) entry.remeshJumps[q] += jump[q];
    }

    entry.fit = fit_sphere(result.finalMesh, vertex_geometry(result.finalMesh));
    const double r0 = std::sqrt(entry.initialExact.area / (4.0 * kPi));
    entry.gaps = limit_gaps(entry.fit, entry.initialExact, r0);
    entry.meshGaps = limit_gaps(entry.fit, entry.initial, 1.0);
    const double R = entry.fit.radius;
    entry.volumeExcess = entry.initialExact.volume - 4.0 * kPi * R * R * R / 3.0;
    entry.htotExcess = entry.initialExact.totalMeanCurv - 8.0 * kPi * R;
    runs.push_back(std::move(entry));
  }
  return runs;
}

ExperimentReport stability_report(const FamilySpec& family, std::vector<RunEntry> runs) {
  ExperimentReport report;
  report.kind = ExperimentKind::Stability;
  report.family = family;
  report.runs = std::move(runs);
  add_run_checks(report);
  const std::vector<double> e0 = energies(report.runs);

  std::vector<std::array<double, 5>> drifts;
  for (const RunEntry& r : report.runs) drifts.push_back(r.drifts);
  add_spread_checks(report, "drift:", e0, drifts, kDriftNames, true);

  // Space-time accumulators: reported with their own spread checks, which do
  // not enter the stability verdict.
  static constexpr std::array<const char*, 5> accNames{"a_accum", "b_accum", "sup_accum", "", ""};
  for (std::size_t q = 0; q < 3; ++q) {
    std::vector<double> column;
    for (const RunEntry& r : report.runs)
      column.push_back(q == 0 ? r.aAccum : q == 1 ? r.bAccum : r.supAccum);
    Spread s = make_spread(std::string("accumulator:") + accNames[q], e0, column);
    if (std::isfinite(s.spread))
      report.checks.push_back(
          {"spread:" + s.name, s.spread, family.spreadBound, s.spread <= family.spreadBound, false});
    report.spreads.push_back(std::move(s));
  }

  for (const RunEntry& r : report.runs) {
    if (r.e0 > kZeroEnergy) continue;
    const double worst = *std::max_element(r.drifts.begin(), r.drifts.end());
    report.checks.push_back(
        {"stationary[" + std::to_string(r.rung) + "]", worst, 1e-6, worst <= 1e-6});
  }
  return report;
}

ExperimentReport stability_experiment(const FamilySpec& family) {
  return stability_report(family, run_family(family));
}

ExperimentReport limit_report(const FamilySpec& family, std::vector<RunEntry> runs) {
  for (const RunEntry& r : runs) {
    if (r.fit.rms > family.fitTolerance * r.fit.radius) {
      throw Error(ErrorCode::FitResidualTooLarge,
                  "rung " + std::to_string(r.rung) + ": sphere-fit rms " + num(r.fit.rms) +
                      " exceeds " + num(family.fitTolerance) + " * R (R = " + num(r.fit.radius) +
                      ", termination " + to_string(r.termination) + ")");
    }
  }
  ExperimentReport report;
  report.kind = ExperimentKind::Limit;
  report.family = family;
  report.runs = std::move(runs);
  add_run_checks(report);
  const std::vector<double> e0 = energies(report.runs);

  std::vector<std::array<double, 5>> gaps, meshGaps;
  for (const RunEntry& r : report.runs) {
    gaps.push_back(r.gaps);
    meshGaps.push_back(r.meshGaps);
  }
  add_spread_checks(report, "gap:", e0, gaps, kGapNames, true);
  add_spread_checks(report, "mesh_gap:", e0, meshGaps, kGapNames, false);

  // One-sided bounds V(f0) <= 4 pi R^3 / 3 + c E0 and Htot(f0) <= 8 pi R + c E0:
  // c is the smallest constant that makes them hold on every run.
  for (const RunEntry& r : report.runs) {
    if (r.e0 > kZeroEnergy) {
      report.remarkVolumeC = std::max(report.remarkVolumeC, r.volumeExcess / r.e0);
      report.remarkHtotC = std::max(report.remarkHtotC, r.htotExcess / r.e0);
    } else {
      const double radius = r.gaps[0], center = r.gaps[1];
      report.checks.push_back({"stationary_radius[" + std::to_string(r.rung) + "]", radius, 1e-4,
                               radius <= 1e-4});
      report.checks.push_back({"stationary_center[" + std::to_string(r.rung) + "]", center, 1e-6,
                               center <= 1e-6});
    }
  }
  report.checks.push_back({"remark_volume_c", report.remarkVolumeC,
                           std::numeric_limits<double>::infinity(),
                           std::isfinite(report.remarkVolumeC)});
  report.checks.push_back({"remark_htot_c", report.remarkHtotC,
                           std::numeric_limits<double>::infinity(),
                           std::isfinite(report.remarkHtotC)});
  return report;
}

ExperimentReport limit_sphere_experiment(const FamilySpec& family) {
  return limit_report(family, run_family(family));
}

std::vector<MeshCase> family_meshes(const FamilySpec& family, bool withRefined) {
  std::vector<MeshCase> cases;
  for (std::size_t k = 0; k < family.ladder.size(); ++k) {
    PerturbationSpec spec = family.rung(k);
    PerturbedSphere shape = perturbed_sphere(spec);
    MeshCase c{"rung" + std::to_string(k), shape.mesh, std::nullopt, std::nullopt, std::nullopt};
    c.exact = oracle::analytic_functionals(
        oracle::RadialGraphSurface{shape.field, spec.amplitude, shape.scale}, family.quadOrder);
    c.energy = c.exact->tracefreeEnergy;
    if (withRefined) {
      spec.level += 1;
      c.refined = perturbed_sphere(spec).mesh;
    }
    cases.push_back(std::move(c));
  }
  for (const auto& [a, b, cAxis] : family.ellipsoids) {
    MeshCase c{"ellipsoid(" + short_num(a) + "," + short_num(b) + "," + short_num(cAxis) + ")",
               ellipsoid(a, b, cAxis, family.level), std::nullopt, std::nullopt, std::nullopt};
    c.exact = oracle::analytic_functionals(oracle::EllipsoidSurface{a, b, cAxis}, family.quadOrder);
    c.energy = c.exact->tracefreeEnergy;
    if (withRefined) c.refined = ellipsoid(a, b, cAxis, family.level + 1);
    cases.push_back(std::move(c));
  }
  return cases;
}

ExperimentReport dlm_experiment(const std::vector<MeshCase>& meshes, const FamilySpec& family) {
  ExperimentReport report;
  report.kind = ExperimentKind::Dlm;
  report.family = family;
  auto ratio_of = [](const TriMesh& mesh, std::string& error) -> std::optional<double> {
    const VertexGeometry geom = vertex_geometry(mesh);
    try {
      return dlm_ratio(measure(mesh, geom), geom);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ZeroDenominator) throw;
      error = std::string(to_string(e.code()));
      return std::nullopt;
    }
  };
  for (const MeshCase& c : meshes) {
    MeshRow row;
    row.label = c.label;
    row.energy = c.energy ? *c.energy : measure(c.mesh).tracefreeEnergy;
    row.value = ratio_of(c.mesh, row.error);
    if (c.refined) {
      std::string ignored;
      row.refinedValue = ratio_of(*c.refined, ignored);
    }
    if (c.exact) row.reference = c.exact->dlmRatio;
    if (row.value) {
      const double v = *row.value;
      if (row.energy < 4.0 * kPi) {
        report.checks.push_back({"dlm_bound:" + row.label, v, family.dlmBound,
                                 std::isfinite(v) && v <= family.dlmBound});
      } else {
        report.checks.push_back({"dlm_finite:" + row.label, v,
                                 std::numeric_limits<double>::infinity(), std::isfinite(v)});
      }
      if (row.refinedValue) {
        const double change = std::abs(v / *row.refinedValue - 1.0);
        report.checks.push_back({"dlm_refinement:" + row.label, change, family.dlmStability,
                                 change <= family.dlmStability});
      }
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

ExperimentReport deficit_experiment(const std::vector<MeshCase>& meshes,
                                    const FamilySpec& family) {
  ExperimentReport report;
  report.kind = ExperimentKind::Deficit;
  report.family = family;
  std::vector<double> ladderE, ladderDeficit;
  for (const MeshCase& c : meshes) {
    MeshRow row;
    row.label = c.label;
    const FunctionalRecord rec = measure(c.mesh);
    row.energy = c.energy ? *c.energy : rec.tracefreeEnergy;
    try {
      row.value = iso_deficit(rec);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonpositiveVolume) throw;
      row.error = std::string(to_string(e.code()));
    }
    if (c.exact) row.reference = c.exact->isoDeficit;
    if (row.value) {
      report.checks.push_back({"deficit_floor:" + row.label, *row.value, family.deficitFloor,
                               *row.value >= family.deficitFloor});
      if (row.energy > kZeroEnergy && row.energy < 4.0 * kPi) {
        const double ratio = *row.value / row.energy;
        report.checks.push_back({"deficit_ratio:" + row.label, ratio, family.deficitBound,
                                 ratio <= family.deficitBound});
      }
      if (row.label.rfind("rung", 0) == 0) {
        ladderE.push_back(row.energy);
        ladderDeficit.push_back(*row.value);
      }
    }
    report.rows.push_back(std::move(row));
  }
  Spread s = make_spread("deficit", ladderE, ladderDeficit);
  if (std::isfinite(s.spread)) {
    report.checks.push_back(
        {"spread:deficit", s.spread, family.spreadBound, s.spread <= family.spreadBound});
  }
  report.spreads.push_back(std::move(s));
  return report;
}

// ---------------------------------------------------------------------------
// Emit

std::string report_csv(const ExperimentReport& report) {
  std::ostringstream out;
  if (report.kind == ExperimentKind::Stability || report.kind == ExperimentKind::Limit) {
    out << "rung,eps,e0,e0_mesh,steps,termination,fit_radius,fit_rms";
    for (const char* n : kDriftNames) out << ",drift_" << n;
    for (const char* n : kDriftNames) out << ",remesh_jump_" << n;
    for (const char* n : kGapNames) out << ",gap_" << n;
    for (const char* n : kGapNames) out << ",mesh_gap_" << n;
    out << ",volume_excess,htot_excess,a_accum,b_accum,sup_accum,max_gap_ratio\n";
    for (const RunEntry& r : report.runs) {
      out << r.rung << ',' << num(r.spec.amplitude) << ',' << num(r.e0) << ',' << num(r.e0Mesh)
          << ',' << r.steps << ',' << to_string(r.termination) << ',' << num(r.fit.radius) << ','
          << num(r.fit.rms);
      for (double v : r.drifts) out << ',' << num(v);
      for (double v : r.remeshJumps) out << ',' << num(v);
      for (double v : r.gaps) out << ',' << num(v);
      for (double v : r.meshGaps) out << ',' << num(v);
      out << ',' << num(r.volumeExcess) << ',' << num(r.htotExcess) << ',' << num(r.aAccum) << ','
          << num(r.bAccum) << ',' << num(r.supAccum) << ',' << num(r.maxGapRatio) << '\n';
    }
  } else {
    out << "label,energy,value,ratio,refined_value,reference,error\n";
    auto opt = [](const std::optional<double>& x) { return x ? num(*x) : std::string(); };
    for (const MeshRow& r : report.rows) {
      std::optional<double> ratio;
      if (r.value && r.energy > kZeroEnergy) ratio = *r.value / r.energy;
      out << r.label << ',' << num(r.energy) << ',' << opt(r.value) << ',' << opt(ratio) << ','
          << opt(r.refinedValue) << ',' << opt(r.reference) << ',' << r.error << '\n';
    }
  }
  return out.str();
}

json report_json(const ExperimentReport& report) {
  json entries = json::array();
  for (const RunEntry& r : report.runs) {
    json drifts, jumps, gaps, meshGaps;
    for (std::size_t q = 0; q < 5; ++q) {
      drifts[kDriftNames[q]] = r.drifts[q];
      jumps[kDriftNames[q]] = r.remeshJumps[q];
      gaps[kGapNames[q]] = r.gaps[q];
      meshGaps[kGapNames[q]] = r.meshGaps[q];
    }
    entries.push_back({{"rung", r.rung},
                       {"spec",
                        {{"lmax", r.spec.lmax},
                         {"seed", r.spec.seed},
                         {"eps", r.spec.amplitude},
                         {"level", r.spec.level}}},
                       {"e0", r.e0},
                       {"e0_mesh", r.e0Mesh},
                       {"initial", to_json(r.initial)},
                       {"initial_exact", to_json(r.initialExact)},
                       {"final", to_json(r.final)},
                       {"fit", to_json(r.fit)},
                       {"termination", to_string(r.termination)},
                       {"steps", r.steps},
                       {"energy_monotone", r.energyMonotone},
                       {"max_gap_ratio", number_or_null(r.maxGapRatio)},
                       {"drifts", drifts},
                       {"remesh_jumps", jumps},
                       {"gaps", gaps},
                       {"mesh_gaps", meshGaps},
                       {"volume_excess", r.volumeExcess},
                       {"htot_excess", r.htotExcess},
                       {"accumulators",
                        {{"a", r.aAccum}, {"b", r.bAccum}, {"sup", r.supAccum}}}});
  }
  for (const MeshRow& r : report.rows) {
    entries.push_back({{"label", r.label},
                       {"energy", r.energy},
                       {"value", optional_number(r.value)},
                       {"refined_value", optional_number(r.refinedValue)},
                       {"reference", optional_number(r.reference)},
                       {"error", r.error.empty() ? json(nullptr) : json(r.error)}});
  }
  json spreads = json::array();
  for (const Spread& s : report.spreads) {
    spreads.push_back({{"name", s.name},
                       {"min", number_or_null(s.min)},
                       {"max", number_or_null(s.max)},
                       {"spread", number_or_null(s.spread)},
                       {"slope", number_or_null(s.slope)}});
  }
  json checks = json::array();
  for (const Check& c : report.checks) {
    checks.push_back({{"name", c.name},
                      {"value", number_or_null(c.value)},
                      {"bound", number_or_null(c.bound)},
                      {"pass", c.pass},
                      {"gating", c.gating}});
  }
  json out = {{"schema_version", kReportSchemaVersion},
              {"experiment", to_string(report.kind)},
              {"family", to_json(report.family)},
              {"entries", entries},
              {"spreads", spreads},
              {"checks", checks},
              {"verdict", report.pass() ? "PASS" : "FAIL"}};
  if (report.kind == ExperimentKind::Limit) {
    out["remark"] = {{"volume_c", report.remarkVolumeC}, {"htot_c", report.remarkHtotC}};
  }
  return out;
}

std::string report_svg(const ExperimentReport& report, std::size_t quantity) {
  const bool limit = report.kind == ExperimentKind::Limit;
  const std::string yLabel = limit ? "gap" : "drift";
  const std::string name = limit ? kGapNames.at(quantity) : kDriftNames.at(quantity);
  std::vector<double> xs, ys;
  for (const RunEntry& r : report.runs) {
    xs.push_back(r.e0);
    ys.push_back(limit ? r.gaps[quantity] : r.drifts[quantity]);
  }
  const Spread fit = make_spread(name, xs, ys);

  constexpr double W = 480, H = 360, L = 70, R = 20, T = 30, B = 50;
  double xMax = 0.0, yMax = 0.0;
  for (double x : xs) xMax = std::max(xMax, x);
  for (double y : ys) yMax = std::max(yMax, y);
  yMax = std::max(yMax, fit.slope * xMax);
  if (!(xMax > 0.0)) xMax = 1.0;
  if (!(yMax > 0.0)) yMax = 1.0;
  auto px = [&](double x) { return L + (W - L - R) * x / xMax; };
  auto py = [&](double y) { return H - B - (H - T - B) * y / yMax; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  svg << "<title>" << yLabel << ' ' << name << " vs E0</title>\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<line class=\"axis\" x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R
      << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  svg << "<line class=\"axis\" x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\""
      << H - B << "\" stroke=\"black\"/>\n";
  svg << "<text class=\"xlabel\" x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\">E0</text>\n";
  svg << "<text class=\"ylabel\" x=\"16\" y=\"" << (T + H - B) / 2
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << (T + H - B) / 2 << ")\">"
      << yLabel << "</text>\n";
  svg << "<text x=\"" << L << "\" y=\"" << T - 10 << "\">" << name << "  slope " << num(fit.slope)
      << "</text>\n";
  svg << "<text x=\"" << W - R << "\" y=\"" << H - B + 16 << "\" text-anchor=\"end\">"
      << num(xMax) << "</text>\n";
  svg << "<text x=\"" << L - 4 << "\" y=\"" << T + 4 << "\" text-anchor=\"end\">" << num(yMax)
      << "</text>\n";
  svg << "<line class=\"fit\" x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(xMax)
      << "\" y2=\"" << py(fit.slope * xMax) << "\" stroke=\"steelblue\"/>\n";
  for (std::size_t k = 0; k < xs.size(); ++k) {
    svg << "<circle class=\"point\" cx=\"" << px(xs[k]) << "\" cy=\"" << py(ys[k])
        << "\" r=\"4\" fill=\"black\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void emit(const ExperimentReport& report, const std::filesystem::path& reportPath) {
  if (reportPath.empty()) throw Error(ErrorCode::IoError, "empty report path");
  std::filesystem::path stem = reportPath;
  stem.replace_extension();
  std::filesystem::path jsonPath = reportPath;
  if (jsonPath.extension() != ".json") jsonPath = std::filesystem::path(stem) += ".json";
  write_text(jsonPath, report_json(report).dump(2) + "\n");
  write_text(std::filesystem::path(stem) += ".csv", report_csv(report));
  if (report.kind == ExperimentKind::Stability || report.kind == ExperimentKind::Limit) {
    const auto& names = report.kind == ExperimentKind::Limit ? kGapNames : kDriftNames;
    for (std::size_t q = 0; q < names.size(); ++q) {
      write_text(std::filesystem::path(stem) += std::string(".") + names[q] + ".svg",
                 report_svg(report, q));
    }
  }
}

}  // namespace wf
