#include "willflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "triangle.hpp"
#include "willflow/remesh.hpp"

namespace wf {

void FlowConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (maxSteps < 0) fail("max_steps must be nonnegative");
  if (dtInit && !(*dtInit > 0.0)) fail("dt_init must be positive");
  if (!(armijoFactor > 0.0 && armijoFactor < 1.0)) fail("armijo_factor must lie in (0, 1)");
  if (!(shrink > 0.0 && shrink < 1.0)) fail("shrink must lie in (0, 1)");
  if (!(gradTol >= 0.0)) fail("grad_tol must be nonnegative");
  if (!(energyTol >= 0.0)) fail("energy_tol must be nonnegative");
  if (remeshEvery < 0) fail("remesh_every must be nonnegative");
  if (!(edgeLenBand.first > 0.0 && edgeLenBand.first < 1.0 && edgeLenBand.second > 1.0))
    fail("edge_len_band must satisfy 0 < lo < 1 < hi");
  if (!(tangentialSmoothWeight >= 0.0 && tangentialSmoothWeight <= 1.0))
    fail("tangential_smooth_weight must lie in [0, 1]");
  if (!(energyCap > 0.0 && energyCap <= 8.0 * std::numbers::pi))
    fail("energy_cap must lie in (0, 8 pi]");
  if (!(dtMax > 0.0)) fail("dt_max must be positive");
  if (!(dtGrowth >= 1.0)) fail("dt_growth must be at least 1");
}

std::string to_string(Termination reason) {
  switch (reason) {
    case Termination::GradTol: return "grad_tol";
    case Termination::EnergyTol: return "energy_tol";
    case Termination::MaxSteps: return "max_steps";
    case Termination::Stalled: return "stalled";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Energy and gradient

namespace {

struct Assembly {
  std::vector<detail::Triangle> triangles;
  std::vector<Vec3> laplace;  // L_i = sum_j w_ij (f_j - f_i)
  std::vector<double> area;
};

Assembly assemble(const TriMesh& mesh) {
  Assembly a;
  const auto& x = mesh.vertices();
  a.triangles.reserve(mesh.num_faces());
  a.laplace.assign(mesh.num_vertices(), Vec3::Zero());
  a.area.assign(mesh.num_vertices(), 0.0);
  for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
    const Face& face = mesh.faces()[f];
    detail::Triangle tri = detail::make_triangle(x[face[0]], x[face[1]], x[face[2]]);
    for (int k = 0; k < 3; ++k) {
      if (!(std::abs(tri.cot[k]) <= detail::kMaxCot)) {
        throw Error(ErrorCode::NumericallyDegenerate,
                    "face " + std::to_string(f) + " has cotangent weight " +
                        std::to_string(tri.cot[k]));
      }
      const Vec3 e = tri.cot[k] * (tri.p[(k + 2) % 3] - tri.p[(k + 1) % 3]);
      a.laplace[face[(k + 1) % 3]] += e;
      a.laplace[face[(k + 2) % 3]] -= e;
      a.area[face[k]] += tri.mixedArea[k];
    }
    a.triangles.push_back(tri);
  }
  return a;
}

}  // namespace

double discrete_energy(const TriMesh& mesh) {
  const Assembly a = assemble(mesh);
  double w = 0.0;
  for (std::size_t i = 0; i < a.area.size(); ++i) w += a.laplace[i].squaredNorm() / a.area[i];
  return w / 16.0;
}

std::vector<Vec3> energy_gradient(const TriMesh& mesh) {
  const Assembly a = assemble(mesh);
  const std::size_t nv = mesh.num_vertices();
  // W = sum_i |L_i|^2 / (16 A_i); adjoints dW/dL_i and dW/dA_i.
  std::vector<Vec3> dL(nv);
  std::vector<double> dA(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    dL[i] = a.laplace[i] / (8.0 * a.area[i]);
    dA[i] = -a.laplace[i].squaredNorm() / (16.0 * a.area[i] * a.area[i]);
  }
  std::vector<Vec3> grad(nv, Vec3::Zero());
  for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
    const Face& face = mesh.faces()[f];
    const detail::Triangle& tri = a.triangles[f];
    const detail::TriangleDerivatives d = detail::differentiate(tri);
    for (int k = 0; k < 3; ++k) {
      const int k1 = (k + 1) % 3;
      const int k2 = (k + 2) % 3;
      const Vec3 diff = dL[face[k1]] - dL[face[k2]];
      const double s = diff.dot(tri.p[k2] - tri.p[k1]);
      grad[face[k2]] += tri.cot[k] * diff;
      grad[face[k1]] -= tri.cot[k] * diff;
      for (int m = 0; m < 3; ++m) {
        grad[face[m]] += s * d.dCot[k][m] + dA[face[k]] * d.dMixed[k][m];
      }
    }
  }
  return grad;
}

double mass_normalized_norm(std::span<const Vec3> gradient, std::span<const double> area) {
  double sum = 0.0;
  for (std::size_t i = 0; i < gradient.size(); ++i) sum += gradient[i].squaredNorm() / area[i];
  return std::sqrt(sum);
}

std::vector<double> willmore_operator_pointwise(const TriMesh& mesh, const VertexGeometry& geom) {
  std::vector<double> out = cotan_laplacian(mesh, geom, geom.scalarH);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += geom.tracefreeSq[i] * geom.scalarH[i];
  return out;
}

double conformal_killing_residual(const TriMesh& mesh, KillingField kind) {
  const std::vector<Vec3> g = energy_gradient(mesh);
  const Vec3 c = measure(mesh).barycenter;
  auto field = [&](const Vec3& p) -> Vec3 {
    switch (kind) {
      case KillingField::TranslationX: return Vec3::UnitX();
      case KillingField::TranslationY: return Vec3::UnitY();
      case KillingField::TranslationZ: return Vec3::UnitZ();
      case KillingField::Dilation: return p - c;
      case KillingField::RotationZ: return Vec3::UnitZ().cross(p - c);
    }
    return Vec3::Zero();
  };
  double dot = 0.0, gsum = 0.0, xmax = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Vec3 x = field(mesh.vertices()[i]);
    dot -= g[i].dot(x);
    gsum += g[i].norm();
    xmax = std::max(xmax, x.norm());
  }
  const double scale = gsum * xmax;
  return scale > 0.0 ? std::abs(dot) / scale : 0.0;
}

// ---------------------------------------------------------------------------
// Stepping

namespace {

double area_rescale(double area) { return area / (4.0 * std::numbers::pi); }

void check_finite(const FlowState& s) {
  const FunctionalRecord& r = s.record;
  if (!std::isfinite(r.area) || !std::isfinite(r.willmore) || !std::isfinite(r.volume) ||
      !std::isfinite(s.gradNorm)) {
    throw Error(ErrorCode::RunDiverged, "non-finite functional at t = " + std::to_string(s.t));
  }
}

double default_dt(const TriMesh& mesh) {
  const double h = mesh.mean_edge_length();
  return 0.1 * h * h * h * h;
}

using SparseMatrix = Eigen::SparseMatrix<double>;

// P = K M^-1 K, the frozen-coefficient Hessian of 2W = 1/2 f^T K M^-1 K f.
SparseMatrix stiffness_preconditioner(const TriMesh& mesh, const VertexGeometry& geom) {
  const int nv = static_cast<int>(mesh.num_vertices());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(mesh.num_faces() * 12);
  const auto& x = mesh.vertices();
  for (const Face& face : mesh.faces()) {
    const detail::Triangle tri = detail::make_triangle(x[face[0]], x[face[1]], x[face[2]]);
    for (int k = 0; k < 3; ++k) {
      const int i = face[(k + 1) % 3];
      const int j = face[(k + 2) % 3];
      const double w = 0.5 * tri.cot[k];
      trip.emplace_back(i, j, -w);
      trip.emplace_back(j, i, -w);
      trip.emplace_back(i, i, w);
      trip.emplace_back(j, j, w);
    }
  }
  SparseMatrix K(nv, nv);
  K.setFromTriplets(trip.begin(), trip.end());
  Eigen::VectorXd invMass(nv);
  for (int i = 0; i < nv; ++i) invMass[i] = 1.0 / geom.area[i];
  SparseMatrix scaled = invMass.asDiagonal() * K;
  return SparseMatrix((K * scaled).pruned());
}

}  // namespace

FlowState make_state(TriMesh mesh, const FlowConfig& config, double t) {
  FlowState s{t, std::move(mesh), {}, {}, {}};
  s.geom = vertex_geometry(s.mesh);
  s.record = measure(s.mesh, s.geom);
  s.gradient = energy_gradient(s.mesh);
  s.gradNorm = mass_normalized_norm(s.gradient, s.geom.area) * area_rescale(s.record.area);
  s.dtNext = config.dtInit.value_or(default_dt(s.mesh));
  check_finite(s);
  return s;
}

FlowState step(const FlowState& state, const FlowConfig& config) {
  if (!(state.record.tracefreeEnergy < config.energyCap)) {
    throw Error(ErrorCode::EnergyCapExceeded,
                "tracefree energy " + std::to_string(state.record.tracefreeEnergy) +
                    " is not below the cap " + std::to_string(config.energyCap));
  }
  if (state.gradNorm < config.gradTol) {
    FlowState same = state;
    same.stepAccepted = false;
    same.dtUsed = 0.0;
    return same;
  }

  const std::size_t nv = state.mesh.num_vertices();
  const double dtInit = config.dtInit.value_or(default_dt(state.mesh));
  const double dtMin = 1e-14 * dtInit;
  const double energy0 = state.record.willmore;

  Eigen::MatrixXd rhs(nv, 3);
  for (std::size_t i = 0; i < nv; ++i) rhs.row(i) = -kWillmoreVectorScale * state.gradient[i].transpose();

  SparseMatrix P;
  SparseMatrix mass;
  Eigen::SimplicialLDLT<SparseMatrix> solver;
  if (config.semiImplicit) {
    P = stiffness_preconditioner(state.mesh, state.geom);
    Eigen::VectorXd m(nv);
    for (std::size_t i = 0; i < nv; ++i) m[i] = state.geom.area[i];
    mass = SparseMatrix(m.asDiagonal());
    solver.analyzePattern(mass + P);
  }

  double tau = state.dtNext > 0.0 ? state.dtNext : dtInit;
  while (tau >= dtMin) {
    Eigen::MatrixXd dir(nv, 3);
    if (config.semiImplicit) {
      SparseMatrix system = mass + tau * P;
      solver.factorize(system);
      if (solver.info() != Eigen::Success) {
        tau *= config.shrink;
        continue;
      }
      dir = solver.solve(tau * rhs);
    } else {
      for (std::size_t i = 0; i < nv; ++i) dir.row(i) = tau * rhs.row(i) / state.geom.area[i];
    }
    // <grad, d> < 0 for a descent direction
    const double slope = -(rhs.array() * dir.array()).sum() / kWillmoreVectorScale;

    std::vector<Vec3> trial(nv);
    for (std::size_t i = 0; i < nv; ++i) trial[i] = state.mesh.vertices()[i] + dir.row(i).transpose();
    try {
      TriMesh candidate = state.mesh.with_positions(std::move(trial));
      const double energy1 = discrete_energy(candidate);
      if (std::isfinite(energy1) && energy1 <= energy0 + config.armijoFactor * slope) {
        FlowState next = make_state(std::move(candidate), config, state.t + tau);
        next.stepAccepted = true;
        next.dtUsed = tau;
        next.dtNext = std::min(tau * config.dtGrowth, config.dtMax);
        next.connectivityEpoch = state.connectivityEpoch;
        return next;
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateFace && e.code() != ErrorCode::InconsistentOrientation &&
          e.code() != ErrorCode::NumericallyDegenerate) {
        throw;
      }
    }
    tau *= config.shrink;
  }
  throw Error(ErrorCode::LineSearchStalled,
              "no step size above " + std::to_string(dtMin) + " decreases the energy at t = " +
                  std::to_string(state.t));
}

// ---------------------------------------------------------------------------
// Trace

TraceRow trace_row(const FlowState& s, int stepIndex, const TraceRow* previous) {
  TraceRow row;
  row.step = stepIndex;
  row.t = s.t;
  row.dt = s.dtUsed;
  row.record = s.record;
  row.gradNorm = s.gradNorm;
  row.supAoSq = s.record.supTracefree;
  row.connectivityEpoch = s.connectivityEpoch;

  const VertexGeometry& g = s.geom;
  const auto& x = s.mesh.vertices();
  const std::vector<double> gradH = pl_gradient_norms(s.mesh, g.scalarH);
  double alpha = 0.0, beta = 0.0;
  for (std::size_t f = 0; f < s.mesh.num_faces(); ++f) {
    const Face& t = s.mesh.faces()[f];
    const double area = 0.5 * (x[t[1]] - x[t[0]]).cross(x[t[2]] - x[t[0]]).norm();
    const double aoMean = (std::sqrt(g.tracefreeSq[t[0]]) + std::sqrt(g.tracefreeSq[t[1]]) +
                           std::sqrt(g.tracefreeSq[t[2]])) / 3.0;
    alpha += area * gradH[f] * gradH[f];
    beta += area * gradH[f] * aoMean;
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double h = g.scalarH[i];
    alpha += g.area[i] * g.tracefreeSq[i] * h * h;
    beta += g.area[i] * g.tracefreeSq[i] * std::abs(h);
    row.volumeRhs += g.area[i] * g.tracefreeSq[i] * h;
    row.lumpedMoment += g.area[i] * x[i];
    row.lumpedHalfSq += 0.5 * g.area[i] * x[i].squaredNorm();
    const double hg = kWillmoreVectorScale * g.meanCurvVec[i].dot(s.gradient[i]);
    row.momentRhs += hg * x[i];
    row.halfSqRhs += 0.5 * x[i].squaredNorm() * hg;
  }
  row.alpha = alpha;
  row.beta = beta;

  const double wsq =
      std::pow(kWillmoreVectorScale * mass_normalized_norm(s.gradient, g.area), 2);
  row.gapRatio = wsq > 0.0 ? s.record.supTracefree / (s.record.area * wsq) : 0.0;

  if (previous) {
    const double dt = row.t - previous->t;
    row.aAccum = previous->aAccum + 0.5 * (previous->alpha + alpha) * dt;
    row.bAccum =
        previous->bAccum + 0.5 * (previous->alpha + previous->beta + alpha + beta) * dt;
    row.supAccum = previous->supAccum +
                   0.5 * (previous->supAoSq * previous->supAoSq + row.supAoSq * row.supAoSq) * dt;
  }
  return row;
}

FlowResult run(const TriMesh& mesh, const FlowConfig& config) {
  config.validate();
  auto trace = std::make_shared<FlowTrace>();
  FlowState state = make_state(mesh, config);
  trace->rows.push_back(trace_row(state, 0, nullptr));
  trace->maxGapRatio = trace->rows.back().gapRatio;

  if (!(state.record.tracefreeEnergy < config.energyCap)) {
    throw FlowError(Error(ErrorCode::EnergyCapExceeded,
                          "initial tracefree energy " +
                              std::to_string(state.record.tracefreeEnergy) +
                              " is not below the cap " + std::to_string(config.energyCap)),
                    trace);
  }

  RemeshOptions remeshOptions{config.edgeLenBand, config.tangentialSmoothWeight};
  int accepted = 0;
  trace->termination = Termination::MaxSteps;
  for (int k = 1; k <= config.maxSteps; ++k) {
    if (state.record.tracefreeEnergy < config.energyTol) {
      trace->termination = Termination::EnergyTol;
      break;
    }
    if (state.gradNorm < config.gradTol) {
      trace->termination = Termination::GradTol;
      break;
    }
    try {
      FlowState next = step(state, config);
      if (!next.stepAccepted) {
        trace->termination = Termination::GradTol;
        break;
      }
      if (next.record.willmore > state.record.willmore) trace->energyMonotone = false;
      state = std::move(next);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::LineSearchStalled) {
        trace->termination = Termination::Stalled;
        break;
      }
      throw FlowError(e, trace);
    }
    ++accepted;
    const TraceRow row = trace_row(state, k, &trace->rows.back());
    trace->maxGapRatio = std::max(trace->maxGapRatio, row.gapRatio);
    trace->rows.push_back(row);

    if (config.remeshEvery > 0 && accepted % config.remeshEvery == 0) {
      try {
        RemeshResult rm = remesh(state.mesh, remeshOptions);
        if (rm.stats.changed()) {
          RemeshEvent event{k, state.record, {}, rm.stats.splits, rm.stats.collapses,
                            rm.stats.flips};
          const double dtNext = state.dtNext;
          const int epoch = state.connectivityEpoch + 1;
          state = make_state(std::move(rm.mesh), config, state.t);
          state.dtNext = dtNext;
          state.connectivityEpoch = epoch;
          event.after = state.record;
          trace->remeshEvents.push_back(event);
          TraceRow rrow = trace_row(state, k, &trace->rows.back());
          rrow.remeshed = true;
          trace->rows.push_back(rrow);
        }
      } catch (const Error& e) {
        throw FlowError(e, trace);
      }
    }
  }
  if (trace->termination == Termination::MaxSteps) {
    if (state.record.tracefreeEnergy < config.energyTol) trace->termination = Termination::EnergyTol;
    else if (state.gradNorm < config.gradTol) trace->termination = Termination::GradTol;
  }
  return {std::move(*trace), state.mesh};
}

// ---------------------------------------------------------------------------
// Evolution identities

namespace {

template <class Lhs, class Rhs>
double pooled_residual(const FlowTrace& trace, Lhs lhsValue, Rhs rhsValue) {
  const auto& rows = trace.rows;
  double num = 0.0, den = 0.0;
  int used = 0;
  for (std::size_t k = 1; k + 1 < rows.size(); ++k) {
    const TraceRow& a = rows[k - 1];
    const TraceRow& b = rows[k];
    const TraceRow& c = rows[k + 1];
    if (a.connectivityEpoch != b.connectivityEpoch || b.connectivityEpoch != c.connectivityEpoch)
      continue;
    if (b.remeshed || c.remeshed || !(c.t > a.t)) continue;
    const double lhs = (lhsValue(c) - lhsValue(a)) / (c.t - a.t);
    const double rhs = rhsValue(b);
    num += (lhs - rhs) * (lhs - rhs);
    den += rhs * rhs;
    ++used;
  }
  if (used < 1) {
    throw Error(ErrorCode::InsufficientTrace,
                "need three consecutive accepted steps at fixed connectivity");
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace

double moment_evolution_residual(const FlowTrace& trace, MomentKind kind, int axis) {
  if (kind == MomentKind::Coordinate) {
    return pooled_residual(
        trace, [axis](const TraceRow& r) { return r.lumpedMoment[axis]; },
        [axis](const TraceRow& r) { return r.momentRhs[axis]; });
  }
  return pooled_residual(
      trace, [](const TraceRow& r) { return r.lumpedHalfSq; },
      [](const TraceRow& r) { return r.halfSqRhs; });
}

double volume_evolution_residual(const FlowTrace& trace) {
  return pooled_residual(
      trace, [](const TraceRow& r) { return r.record.volume; },
      [](const TraceRow& r) { return r.volumeRhs; });
}

}  // namespace wf
