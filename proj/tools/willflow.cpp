// Command-line front end: generate, measure, flow, fit-sphere, verify.
// Exit codes: 0 PASS / success, 2 inequality verdict FAIL, 1 error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "willflow/error.hpp"
#include "willflow/flow.hpp"
#include "willflow/functionals.hpp"
#include "willflow/harness.hpp"
#include "willflow/shapes.hpp"

namespace {

using nlohmann::json;

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw wf::Error(wf::ErrorCode::IoError, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw wf::Error(wf::ErrorCode::ParseError, path + ": " + e.what());
  }
}

void print_record(const wf::FunctionalRecord& rec, bool asJson) {
  const json j = wf::to_json(rec);
  if (asJson) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  for (auto it = j.begin(); it != j.end(); ++it) std::cout << it.key() << " " << it.value().dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete Willmore flow and verification harness"};
  app.require_subcommand(1);

  wf::PerturbationSpec genSpec;
  std::string genOut;
  auto* generate = app.add_subcommand("generate", "perturbed sphere mesh (OFF/OBJ plus .json sidecar)");
  generate->add_option("--lmax", genSpec.lmax, "highest harmonic degree")->check(CLI::Range(2, 64));
  generate->add_option("--eps", genSpec.amplitude, "perturbation amplitude")->required();
  generate->add_option("--seed", genSpec.seed, "coefficient seed");
  generate->add_option("--level", genSpec.level, "icosphere subdivision level")->check(CLI::Range(0, 8));
  generate->add_option("--out", genOut, "output mesh")->required();

  std::string measureIn;
  bool measureJson = false;
  auto* measureCmd = app.add_subcommand("measure", "print every functional of a mesh");
  measureCmd->add_option("--in", measureIn, "input mesh")->required();
  measureCmd->add_flag("--json", measureJson, "JSON output");

  std::string flowIn, flowConfig, flowTrace, flowOut;
  auto* flowCmd = app.add_subcommand("flow", "run the Willmore flow");
  flowCmd->add_option("--in", flowIn, "input mesh")->required();
  flowCmd->add_option("--config", flowConfig, "FlowConfig JSON (snake_case keys)");
  flowCmd->add_option("--trace", flowTrace, "per-step trace CSV");
  flowCmd->add_option("--out", flowOut, "final mesh");

  std::string fitIn;
  auto* fitCmd = app.add_subcommand("fit-sphere", "least-squares sphere through the vertices");
  fitCmd->add_option("--in", fitIn, "input mesh")->required();

  std::string verifyKind, familyPath, reportPath;
  auto* verify = app.add_subcommand("verify", "run an experiment and write its report");
  verify->add_option("experiment", verifyKind, "stability | limit | dlm | deficit")
      ->required()
      ->check(CLI::IsMember({"stability", "limit", "dlm", "deficit"}));
  verify->add_option("--family", familyPath, "family spec JSON")->required();
  verify->add_option("--report", reportPath, "report path (.json)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*generate) {
      const wf::PerturbedSphere shape = wf::perturbed_sphere(genSpec);
      wf::write_generated(shape, genSpec, genOut);
      std::cout << "vertices " << shape.mesh.num_vertices() << "\nfaces " << shape.mesh.num_faces()
                << "\ntracefree_energy " << shape.energy << "\n";
      return 0;
    }
    if (*measureCmd) {
      print_record(wf::measure(wf::read_mesh(measureIn)), measureJson);
      return 0;
    }
    if (*flowCmd) {
      const wf::FlowConfig config =
          flowConfig.empty() ? wf::FlowConfig{} : wf::flow_config_from_json(read_json(flowConfig));
      config.validate();
      const wf::TriMesh mesh = wf::read_mesh(flowIn);
      try {
        const wf::FlowResult result = wf::run(mesh, config);
        if (!flowTrace.empty()) wf::write_trace_csv(result.trace, flowTrace);
        if (!flowOut.empty()) wf::write_mesh(result.finalMesh, flowOut);
        const wf::TraceRow& last = result.trace.last();
        std::cout << "termination " << wf::to_string(result.trace.termination) << "\nsteps "
                  << last.step << "\nt " << last.t << "\nenergy " << last.record.tracefreeEnergy
                  << "\nwillmore " << last.record.willmore << "\nenergy_monotone "
                  << (result.trace.energyMonotone ? "true" : "false") << "\n";
      } catch (const wf::FlowError& e) {
        if (!flowTrace.empty() && !e.trace().rows.empty()) wf::write_trace_csv(e.trace(), flowTrace);
        throw;
      }
      return 0;
    }
    if (*fitCmd) {
      const wf::TriMesh mesh = wf::read_mesh(fitIn);
      const wf::SphereFit fit = wf::fit_sphere(mesh, wf::vertex_geometry(mesh));
      std::cout << wf::to_json(fit).dump() << "\n";
      return 0;
    }
    if (*verify) {
      const wf::FamilySpec family = wf::family_from_json(read_json(familyPath));
      wf::ExperimentReport report;
      switch (wf::experiment_kind_from_string(verifyKind)) {
        case wf::ExperimentKind::Stability: report = wf::stability_experiment(family); break;
        case wf::ExperimentKind::Limit: report = wf::limit_sphere_experiment(family); break;
        case wf::ExperimentKind::Dlm:
          report = wf::dlm_experiment(wf::family_meshes(family, true), family);
          break;
        case wf::ExperimentKind::Deficit:
          report = wf::deficit_experiment(wf::family_meshes(family, false), family);
          break;
      }
      wf::emit(report, reportPath);
      for (const wf::Check& c : report.checks) {
        std::cout << (c.pass ? "ok   " : "FAIL ") << c.name << " " << c.value << " (bound "
                  << c.bound << ")" << (c.gating ? "" : " [informational]") << "\n";
      }
      std::cout << (report.pass() ? "PASS" : "FAIL") << "\n";
      return report.pass() ? 0 : 2;
    }
  } catch (const wf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
