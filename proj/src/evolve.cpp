#include "mcmps/evolve.hpp"

#include <cmath>

#include "mcmps/errors.hpp"
#include "mcmps/linalg.hpp"

namespace mcmps {

TrotterPlan TrotterPlan::build(const ModelParams& params, double dt, TimeKind kind, bool include_dissipation) {
  params.validate();
  if (!(dt >= 0.0) || !std::isfinite(dt)) throw ConfigError("time step must be finite and >= 0");
  if (kind == TimeKind::imaginary && include_dissipation)
    throw ConfigError("imaginary-time plans are built from the Hermitian Hamiltonian only");

  TrotterPlan plan;
  plan.params = params;
  plan.dt = dt;
  plan.kind = kind;
  plan.dissipative = include_dissipation;

  const cplx factor = (kind == TimeKind::real) ? cplx(0.0, -0.5 * dt) : cplx(-0.5 * dt, 0.0);
  for (const TwoSiteBlock& block : build_effective_blocks(params, include_dissipation)) {
    const Eigen::MatrixXcd g = expm(factor * block.matrix);
    plan.gates_forward.push_back(g);
  }
  plan.gates_backward.assign(plan.gates_forward.rbegin(), plan.gates_forward.rend());
  return plan;
}

namespace {

StepReport sweep_pair(MpsState& state, const TrotterPlan& plan, const TruncationPolicy& policy) {
  const int L = state.length();
  if (L != plan.params.L) throw InvariantError("plan and state have different chain lengths");
  state.canonicalize(0);
  StepReport report;
  for (int i = 0; i + 1 < L; ++i) report.discarded += apply_two_site_gate(state, plan.gates_forward[i], i, policy);
  for (int k = 0; k + 1 < L; ++k) {
    const int i = L - 2 - k;
    report.discarded += apply_two_site_gate(state, plan.gates_backward[k], i, policy);
  }
  state.truncation_log().close_sweep();
  report.norm_before = state.norm();
  return report;
}

}  // namespace

StepReport trotter_step(MpsState& state, const TrotterPlan& plan, const TruncationPolicy& policy) {
  StepReport report = sweep_pair(state, plan, policy);
  state.normalize();
  return report;
}

StepReport nonhermitian_step(MpsState& state, const TrotterPlan& plan, const TruncationPolicy& policy) {
  if (plan.kind != TimeKind::real || !plan.dissipative)
    throw ConfigError("nonhermitian_step needs a real-time plan built with dissipation");
  StepReport report = sweep_pair(state, plan, policy);
  if (!(report.norm_before * report.norm_before >= 1e-12))
    throw NumericError("norm underflow in non-Hermitian step");
  state.normalize();
  return report;
}

double energy(const MpsState& state, const std::vector<TwoSiteBlock>& blocks) {
  std::vector<Mat4> ops(std::max(0, state.length() - 1), Mat4::Zero());
  for (const TwoSiteBlock& b : blocks) ops.at(b.site) += b.matrix;
  double e = 0.0;
  for (const cplx& v : expect_bond_all(state, ops)) e += v.real();
  return e;
}

GroundStateResult imaginary_time_ground_state(const ModelParams& params, const GroundStateOptions& options) {
  params.validate();
  options.policy.validate();
  if (!(options.tau_max > 0.0) || !(options.dtau > 0.0)) throw ConfigError("tau_max and dtau must be > 0");

  const TrotterPlan plan = TrotterPlan::build(params, options.dtau, TimeKind::imaginary, false);
  const std::vector<TwoSiteBlock> blocks = build_effective_blocks(params, false);
  const auto steps = static_cast<long>(std::llround(options.tau_max / options.dtau));

  GroundStateResult result{random_mps(params.L, options.chi0, options.seed), 0.0, {}, false};
  result.energies.reserve(steps + 1);
  result.energies.push_back(energy(result.state, blocks));
  for (long k = 0; k < steps; ++k) {
    trotter_step(result.state, plan, options.policy);
    result.energies.push_back(energy(result.state, blocks));
  }
  result.energy = result.energies.back();
  const double last_change = result.energies.size() >= 2
                                 ? std::abs(result.energies.back() - result.energies[result.energies.size() - 2])
                                 : INFINITY;
  result.converged = last_change < options.energy_tol;
  return result;
}

}  // namespace mcmps
