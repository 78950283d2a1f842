// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
//   acceptance [--only 1,2,...] [--out DIR]

#include <chrono>
#include <cstdio>
#include <functional>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "support.hpp"
#include "willflow/error.hpp"
#include "willflow/harness.hpp"
#include "willflow/oracle.hpp"

using namespace wf;
using wftest::kPi;
using wftest::rel;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[violated] ";
    }
    detail << what << "; ";
  }
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

/// The perturbation family shared by criteria 6, 7, 9, 10 and 11.
FamilySpec acceptance_family() {
  FamilySpec f;
  f.lmax = 4;
  f.seed = 7;
  f.epsilon = 0.06;
  f.ladder = {1.0, 0.5, 0.25, 0.125};
  f.level = 5;
  f.ellipsoids = {{1, 1, 1.05}, {1, 1, 1.1}, {1, 1, 1.2}, {1, 1, 1.4}};
  return f;
}

PerturbedSphere seed7(double eps, int level) {
  PerturbationSpec s;
  s.lmax = 4;
  s.seed = 7;
  s.amplitude = eps;
  s.level = level;
  return perturbed_sphere(s);
}

void criterion1(Outcome& out) {
  double worstSum = 0.0, worstDil = 0.0, worstGb = 0.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const Vec3 axes(1.0 + 0.004 * seed, 1.0, 1.0 - 0.003 * seed);
    const TriMesh m = wftest::noisy_sphere(1 + seed % 3, 0.12, seed, axes);
    const std::vector<Vec3> g = energy_gradient(m);
    const Vec3 c = measure(m).barycenter;
    Vec3 sum = Vec3::Zero();
    double total = 0.0, dil = 0.0, diam = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      sum += g[i];
      total += g[i].norm();
      dil += g[i].dot(m.vertices()[i] - c);
      diam = std::max(diam, 2.0 * (m.vertices()[i] - c).norm());
    }
    worstSum = std::max(worstSum, sum.norm() / total);
    worstDil = std::max(worstDil, std::abs(dil) / (total * diam));
    const VertexGeometry geom = vertex_geometry(m);
    double gb = 0.0;
    for (std::size_t i = 0; i < geom.size(); ++i) gb += geom.area[i] * geom.gaussK[i];
    worstGb = std::max({worstGb, std::abs(gb - 4 * kPi), std::abs(total_angle_defect(m) - 4 * kPi)});
  }
  out.require(worstSum <= 1e-8, "max |sum g| / sum |g| = " + fmt(worstSum));
  out.require(worstDil <= 1e-8, "max |<g, f - C>| rel = " + fmt(worstDil));
  out.require(worstGb <= 1e-9, "max |Gauss-Bonnet - 4pi| = " + fmt(worstGb));
}

void criterion2(Outcome& out) {
  const TriMesh m = wftest::mesh50(1);
  const double err = wftest::fd_gradient_error(m);
  out.require(m.num_vertices() == 50, std::to_string(m.num_vertices()) + " vertices");
  out.require(err <= 1e-5, "max componentwise relative error = " + fmt(err));
}

void criterion3(Outcome& out) {
  const FunctionalRecord exact = oracle::analytic_functionals(oracle::EllipsoidSurface{1, 1, 1.25}, 64);
  std::array<FunctionalRecord, 2> mesh{measure(ellipsoid(1, 1, 1.25, 4)),
                                       measure(ellipsoid(1, 1, 1.25, 5))};
  struct Item {
    const char* name;
    std::function<double(const FunctionalRecord&)> err;
    double tol;
  };
  const std::vector<Item> items{
      {"A", [&](const FunctionalRecord& r) { return rel(r.area, exact.area); }, 0.01},
      // The exact barycenter is 0, so C is compared in absolute terms.
      {"C", [&](const FunctionalRecord& r) { return (r.barycenter - exact.barycenter).norm(); }, 0.01},
      {"Q", [&](const FunctionalRecord& r) { return rel(r.quadMoment, exact.quadMoment); }, 0.01},
      {"V", [&](const FunctionalRecord& r) { return rel(r.volume, exact.volume); }, 0.01},
      {"Htot", [&](const FunctionalRecord& r) { return rel(r.totalMeanCurv, exact.totalMeanCurv); }, 0.01},
      {"W", [&](const FunctionalRecord& r) { return rel(r.willmore, exact.willmore); }, 0.01},
      {"E", [&](const FunctionalRecord& r) { return rel(r.tracefreeEnergy, exact.tracefreeEnergy); }, 0.05},
      {"dlm", [&](const FunctionalRecord& r) { return rel(r.dlmRatio.value_or(1e9), *exact.dlmRatio); }, 0.05},
  };
  for (const Item& it : items) {
    const double e4 = it.err(mesh[0]), e5 = it.err(mesh[1]);
    out.require(e5 <= it.tol, std::string(it.name) + " err " + fmt(e5));
    // Both C errors sit at roundoff (symmetric mesh); no trend to check there.
    const bool roundoff = std::string(it.name) == "C" && e4 <= 1e-12 && e5 <= 1e-12;
    out.require(roundoff || e5 < e4, std::string(it.name) + " L4 " + fmt(e4) + " > L5");
  }
}

void criterion4(Outcome& out) {
  const FunctionalRecord r = measure(icosphere(5));
  out.require(rel(r.area, 4 * kPi) <= 0.005, "A/4pi - 1 = " + fmt(r.area / (4 * kPi) - 1));
  out.require(rel(r.volume, 4 * kPi / 3) <= 0.005, "V rel = " + fmt(r.volume / (4 * kPi / 3) - 1));
  out.require(rel(r.totalMeanCurv, 8 * kPi) <= 0.02, "Htot rel = " + fmt(r.totalMeanCurv / (8 * kPi) - 1));
  out.require(rel(r.willmore, 4 * kPi) <= 0.02, "W rel = " + fmt(r.willmore / (4 * kPi) - 1));
  out.require(r.tracefreeEnergy <= 0.05, "E = " + fmt(r.tracefreeEnergy));
  out.require(std::abs(r.isoDeficit) <= 0.02, "deficit = " + fmt(r.isoDeficit));
}

void criterion5(Outcome& out) {
  const PerturbedSphere p = seed7(0.04, 5);
  out.require(p.energy >= 0.1 && p.energy <= 0.4, "E0 = " + fmt(p.energy));
  const auto t0 = std::chrono::steady_clock::now();
  const FlowResult r = run(p.mesh, FlowConfig{});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const SphereFit fit = fit_sphere(r.finalMesh, vertex_geometry(r.finalMesh));
  out.require(r.trace.energyMonotone, "energy monotone over " + std::to_string(r.trace.last().step) + " steps");
  out.require(r.trace.last().record.tracefreeEnergy <= 1e-3,
              "terminal E = " + fmt(r.trace.last().record.tracefreeEnergy));
  out.require(fit.rms <= 1e-2, "fit rms = " + fmt(fit.rms));
  out.require(secs <= 300, fmt(secs) + " s at " + std::to_string(p.mesh.num_vertices()) + " vertices");
}

std::string spread_line(const ExperimentReport& r, const std::string& prefix) {
  std::string s;
  for (const Spread& sp : r.spreads)
    if (sp.name.rfind(prefix, 0) == 0) s += sp.name.substr(prefix.size()) + " " + fmt(sp.spread) + ", ";
  return s;
}

bool gating_checks_pass(const ExperimentReport& r, Outcome& out) {
  bool ok = true;
  for (const Check& c : r.checks)
    if (c.gating && !c.pass) {
      out.detail << "[violated] " << c.name << " = " << fmt(c.value) << " (bound " << fmt(c.bound) << "); ";
      ok = false;
    }
  return ok;
}

void criterion6(Outcome& out, const ExperimentReport& st, double secs) {
  out.pass = gating_checks_pass(st, out) && out.pass;
  out.require(true, "drift/E0 spreads: " + spread_line(st, "drift:"));
  out.require(secs <= 1200, "family flow time " + fmt(secs) + " s");
}

void criterion7(Outcome& out, const ExperimentReport& lim) {
  out.pass = gating_checks_pass(lim, out) && out.pass;
  out.require(true, "gap/E0 spreads: " + spread_line(lim, "gap:"));
  out.require(true, "remark c: volume " + fmt(lim.remarkVolumeC) + ", htot " + fmt(lim.remarkHtotC));
}

void criterion8(Outcome& out) {
  double vol[2], mom[2];
  for (int k = 0; k < 2; ++k) {
    const PerturbedSphere p = seed7(0.04, 4 + k);
    FlowConfig c;
    c.semiImplicit = false;
    c.maxSteps = 6;
    c.remeshEvery = 0;
    c.energyTol = 0.0;
    const double h = p.mesh.mean_edge_length();
    c.dtInit = 0.02 * h * h * h * h;
    c.dtMax = *c.dtInit;
    const FlowResult r = run(p.mesh, c);
    vol[k] = volume_evolution_residual(r.trace);
    mom[k] = moment_evolution_residual(r.trace, MomentKind::Coordinate, 0);
  }
  out.require(vol[1] <= 0.25, "volume residual L5 " + fmt(vol[1]));
  out.require(vol[1] < vol[0], "volume residual L4 " + fmt(vol[0]) + " > L5");
  out.require(mom[1] <= 0.25, "x1 moment residual L5 " + fmt(mom[1]));
  out.require(mom[1] < mom[0], "x1 moment residual L4 " + fmt(mom[0]) + " > L5");
}

void criterion9(Outcome& out, const ExperimentReport& dlm) {
  out.pass = gating_checks_pass(dlm, out) && out.pass;
  for (const MeshRow& r : dlm.rows)
    out.detail << r.label << " " << fmt(r.value.value_or(NAN)) << " (finer " << fmt(r.refinedValue.value_or(NAN))
               << "); ";
}

void criterion10(Outcome& out, const ExperimentReport& def) {
  out.pass = gating_checks_pass(def, out) && out.pass;
  for (const Spread& s : def.spreads) out.detail << "deficit/E0 spread " << fmt(s.spread) << "; ";
  double worst = 0.0;
  for (const MeshRow& r : def.rows)
    if (r.value && r.energy > 0) worst = std::max(worst, *r.value / r.energy);
  out.detail << "max deficit/E0 " << fmt(worst) << "; ";
}

void criterion11(Outcome& out, const ExperimentReport& st) {
  for (const RunEntry& r : st.runs)
    out.require(std::isfinite(r.aAccum) && std::isfinite(r.bAccum) && std::isfinite(r.supAccum),
                "rung " + std::to_string(r.rung) + " accumulators finite");
  for (const Spread& s : st.spreads)
    if (s.name.rfind("accumulator:", 0) == 0)
      out.require(s.spread <= st.family.spreadBound, s.name.substr(12) + "/E0 spread " + fmt(s.spread));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  std::string outDir = "acceptance_reports";
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  app.add_option("--out", outDir, "directory for experiment reports");
  CLI11_PARSE(app, argc, argv);
  const std::set<int> wanted(only.begin(), only.end());
  auto want = [&](int k) { return wanted.empty() || wanted.count(k) > 0; };
  std::filesystem::create_directories(outDir);
  const std::filesystem::path dir(outDir);

  int failures = 0;
  auto report = [&](int k, const std::function<void(Outcome&)>& body) {
    if (!want(k)) return;
    Outcome out;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      body(out);
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail << "[error] " << e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d: %s (%.1f s) %s\n", k, out.pass ? "PASS" : "FAIL", secs, out.detail.str().c_str());
    std::fflush(stdout);
    if (!out.pass) ++failures;
  };

  report(1, criterion1);
  report(2, criterion2);
  report(3, criterion3);
  report(4, criterion4);
  report(5, criterion5);

  const FamilySpec family = acceptance_family();
  // The flowed ladder is shared by criteria 6, 7 and 11 and computed once.
  std::optional<std::vector<RunEntry>> runs;
  double familySecs = 0.0;
  auto family_runs = [&]() -> const std::vector<RunEntry>& {
    if (!runs) {
      const auto t0 = std::chrono::steady_clock::now();
      runs = run_family(family);
      familySecs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    return *runs;
  };

  report(6, [&](Outcome& out) {
    const ExperimentReport st = stability_report(family, family_runs());
    emit(st, dir / "stability.json");
    criterion6(out, st, familySecs);
  });
  report(7, [&](Outcome& out) {
    const ExperimentReport lim = limit_report(family, family_runs());
    emit(lim, dir / "limit.json");
    criterion7(out, lim);
  });
  report(8, criterion8);
  report(9, [&](Outcome& out) {
    const ExperimentReport dlm = dlm_experiment(family_meshes(family, true), family);
    emit(dlm, dir / "dlm.json");
    criterion9(out, dlm);
  });
  report(10, [&](Outcome& out) {
    const ExperimentReport def = deficit_experiment(family_meshes(family, false), family);
    emit(def, dir / "deficit.json");
    criterion10(out, def);
  });
  report(11, [&](Outcome& out) { criterion11(out, stability_report(family, family_runs())); });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
