#pragma once

#include <cstdint>
#include <vector>

#include "mcmps/model.hpp"
#include "mcmps/mps.hpp"

namespace mcmps {

enum class TimeKind { real, imaginary };

/// Half-step bond propagators for one second-order sweep pair.
///
/// Real kind: exp(-i h_eff^{i,i+1} dt/2). Imaginary kind: exp(-h^{i,i+1} dt/2).
/// A step applies gates_forward (bonds 0..L-2) then gates_backward
/// (bonds L-2..0). Plans are immutable; rebuild when dt or params change.
struct TrotterPlan {
  ModelParams params;
  double dt = 0.0;
  TimeKind kind = TimeKind::real;
  bool dissipative = false;
  std::vector<Mat4> gates_forward;
  std::vector<Mat4> gates_backward;

  static TrotterPlan build(const ModelParams& params, double dt, TimeKind kind, bool include_dissipation);
};

struct StepReport {
  double norm_before = 1.0;  // norm after the sweeps, before renormalization
  double discarded = 0.0;    // truncation weight discarded in this step
};

/// One forward + backward sweep; leaves the center at site 0 and renormalizes.
StepReport trotter_step(MpsState& state, const TrotterPlan& plan, const TruncationPolicy& policy);

/// No-jump propagation exp(-i H_eff dt)|psi>/||.||. Requires a dissipative real
/// plan. Throws NumericError when the squared norm drops below 1e-12.
StepReport nonhermitian_step(MpsState& state, const TrotterPlan& plan, const TruncationPolicy& policy);

/// <psi|sum_i h_i|psi> over bond blocks (for a normalized state).
double energy(const MpsState& state, const std::vector<TwoSiteBlock>& blocks);

struct GroundStateOptions {
  double tau_max = 10.0;
  double dtau = 1e-2;
  TruncationPolicy policy{};
  std::uint64_t seed = 0;
  int chi0 = 8;
  /// Converged when the energy change over the final step is below this.
  double energy_tol = 1e-8;
};

struct GroundStateResult {
  MpsState state;
  double energy = 0.0;
  std::vector<double> energies;  // after every imaginary-time step, first entry is the start
  bool converged = false;
};

/// Imaginary-time TEBD from a random MPS with a constant step dtau.
GroundStateResult imaginary_time_ground_state(const ModelParams& params, const GroundStateOptions& options);

}  // namespace mcmps
