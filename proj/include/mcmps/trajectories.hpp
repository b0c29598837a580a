#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mcmps/evolve.hpp"
#include "mcmps/mps.hpp"

namespace mcmps {

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) from the top 53 bits of one draw.
double uniform01(Rng& rng);

std::uint64_t splitmix64(std::uint64_t x);

/// Seed of trajectory `index`: splitmix64(base_seed ^ splitmix64(index + 1)).
/// Depends only on (base_seed, index), never on scheduling.
std::uint64_t trajectory_seed(std::uint64_t base_seed, std::uint64_t index);

/// Seed used for the single retry of a trajectory that failed numerically.
std::uint64_t retry_seed(std::uint64_t seed);

struct JumpEvent {
  double time = 0.0;
  int site = 0;  // 0-based

  bool operator==(const JumpEvent&) const = default;
};

struct StepResult {
  std::optional<JumpEvent> jump;
  double total_probability = 0.0;  // sum_i gamma_d dt <n_i> before the step
};

/// Total jump probability above which the first-order sampler is considered coarse.
inline constexpr double kJumpProbabilityWarning = 0.1;

/// One stochastic step of length plan.dt ending at time `t_end`.
///
/// With probability 1 - sum_i p_i, p_i = gamma_d dt <n_i> (pre-step values), the
/// state is propagated with the non-Hermitian plan; otherwise exactly one site
/// is drawn with probability p_i / sum p, projected with n_i and renormalized.
/// Leaves the center at site 0.
StepResult stochastic_step(MpsState& state, Rng& rng, const TrotterPlan& plan, const TruncationPolicy& policy,
                           double t_end);

struct ObservableSet {
  bool magnetization = true;  // F, mean magnetization and per-site <sz_i>
  bool entropy = true;        // half-chain entanglement entropy
  bool correlation = true;    // C(r) for r = 1..r_max
  int r_max = 0;              // 0 selects L/2

  int effective_r_max(int L) const;
};

struct TrajectoryConfig {
  ModelParams params;  // evolution parameters (post-quench)
  TruncationPolicy policy{};
  double dt = 1e-3;
  double t_max = 0.0;
  double output_dt = 0.1;
  ObservableSet observables{};

  void validate() const;
  long total_steps() const;
  long steps_per_output() const;
  std::vector<double> output_grid() const;
};

struct TrajectoryRecord {
  std::uint64_t seed = 0;
  std::vector<JumpEvent> events;
  std::vector<double> grid;
  std::map<std::string, std::vector<double>> series;
  std::uint64_t final_state_checksum = 0;
  long probability_warnings = 0;
  int max_bond_dim = 0;
  double discarded_weight = 0.0;
};

/// Series names produced by the runner.
std::string site_series_name(int site);         // "sz_<i>"
std::string correlation_series_name(int r);     // "C_<r>"

/// FNV-1a over the raw tensor data of a state.
std::uint64_t state_checksum(const MpsState& state);

/// Resumable single-trajectory integrator.
class TrajectoryRunner {
 public:
  TrajectoryRunner(TrajectoryConfig config, MpsState initial, std::uint64_t seed);

  bool done() const { return step_ >= config_.total_steps(); }
  long step() const { return step_; }
  double time() const { return static_cast<double>(step_) * config_.dt; }
  const MpsState& state() const { return state_; }

  /// Advances up to `max_steps` steps (or to the end) and samples on the grid.
  void advance(long max_steps);
  void run_to_end() { advance(config_.total_steps() - step_); }
  TrajectoryRecord finish() const;

  /// Two files: <stem>.json (metadata, RNG state, partial series) and <stem>.mps.
  void save_checkpoint(const std::filesystem::path& stem) const;
  static TrajectoryRunner load_checkpoint(const TrajectoryConfig& config, const std::filesystem::path& stem);

 private:
  TrajectoryConfig config_;
  TrotterPlan plan_;
  MpsState state_;
  Rng rng_;
  std::uint64_t seed_;
  long step_ = 0;
  std::vector<double> profile0_;
  TrajectoryRecord record_;
  int max_bond_ = 0;

  struct RestoreTag {};
  TrajectoryRunner(TrajectoryConfig config, MpsState state, std::uint64_t seed, RestoreTag);
  void sample();
};

/// Full trajectory from `initial` (already quenched) to t_max.
TrajectoryRecord run_trajectory(const TrajectoryConfig& config, const MpsState& initial, std::uint64_t seed);

struct TrajectorySummary {
  std::uint64_t seed = 0;
  std::size_t n_jumps = 0;
  int max_bond_dim = 0;
  double discarded_weight = 0.0;
  long probability_warnings = 0;
  std::uint64_t final_state_checksum = 0;
  bool retried = false;
};

struct EnsembleResult {
  int n_traj = 0;
  std::vector<double> grid;
  std::map<std::string, std::vector<double>> mean;
  /// Standard error Delta X / sqrt(N) with the sample standard deviation; NaN when N < 2.
  std::map<std::string, std::vector<double>> stderr_;
  std::vector<TrajectorySummary> summaries;
  std::vector<long> jumps_per_site;
  std::vector<long> jumps_per_interval;  // jumps in (t_{k-1}, t_k], entry 0 is always 0
};

struct EnsembleOptions {
  int workers = 1;
  /// Previously completed trajectory k, if any (used when resuming a run).
  std::function<std::optional<TrajectoryRecord>(int)> lookup_completed;
  /// Called once per newly finished trajectory, serialized under a lock.
  std::function<void(int, const TrajectoryRecord&)> on_complete;
  /// When set, trajectories checkpoint to <dir>/traj_<k> every interval of time.
  std::optional<std::filesystem::path> checkpoint_dir;
  double checkpoint_interval = 1.0;
};

/// Runs n_traj trajectories with seeds trajectory_seed(base_seed, k) and reduces
/// them in index order, so the result does not depend on worker count or
/// completion order. A trajectory failing with NumericError is retried once
/// with retry_seed(seed); a second failure aborts with diagnostics.
EnsembleResult run_ensemble(const TrajectoryConfig& config, const MpsState& initial, int n_traj,
                            std::uint64_t base_seed, const EnsembleOptions& options = {});

/// Reduction used by run_ensemble, exposed for tests and for resumed runs.
EnsembleResult aggregate(const std::vector<TrajectoryRecord>& records, int L);

/// One JSON line per trajectory: {"seed", "events":[{"t","site"}], "grid", "series", ...}.
std::string to_json_line(const TrajectoryRecord& record);
TrajectoryRecord from_json_line(const std::string& line);

}  // namespace mcmps
