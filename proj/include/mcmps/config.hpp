#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "mcmps/evolve.hpp"
#include "mcmps/model.hpp"
#include "mcmps/mps.hpp"
#include "mcmps/trajectories.hpp"

namespace mcmps {

/// Full run configuration. `model.hz` is a magnitude: the ground state is
/// prepared with +|hz| and evolved with -|hz|.
///
/// JSON schema (every key optional, defaults shown):
///   {"model": {"J": 1, "hx": 0.8, "hz": 0.08, "gamma_d": 0, "L": 100},
///    "truncation": {"cutoff": 1e-8, "chi_max": 128},
///    "time": {"dt": 1e-3, "t_max": 15, "output_dt": 0.1},
///    "ground_state": {"dtau": 1e-2, "tau_max": 10, "chi0": 8, "energy_tol": 1e-8, "seed": 0},
///    "ensemble": {"n_traj": 600, "base_seed": 0, "workers": 1, "checkpoint_interval": 1},
///    "observables": {"magnetization": true, "entropy": true, "correlation": true, "r_max": 0},
///    "output_dir": "run"}
struct SimulationConfig {
  ModelParams model{1.0, 0.8, 0.08, 0.0, 100};
  TruncationPolicy policy{};
  double dt = 1e-3;
  double t_max = 15.0;
  double output_dt = 0.1;
  double dtau = 1e-2;
  double tau_max = 10.0;
  int chi0 = 8;
  double energy_tol = 1e-8;
  std::uint64_t ground_state_seed = 0;
  int n_traj = 600;
  std::uint64_t base_seed = 0;
  int workers = 1;
  double checkpoint_interval = 1.0;
  ObservableSet observables{};
  std::string output_dir = "run";

  void validate() const;

  ModelParams preparation_params() const;  // hz -> +|hz|
  ModelParams evolution_params() const;    // hz -> -|hz|
  TrajectoryConfig trajectory_config() const;
  GroundStateOptions ground_state_options() const;
};

nlohmann::json to_json(const SimulationConfig& config);

/// Overlays the keys present in `j` onto `base`. Unknown keys are rejected.
SimulationConfig config_from_json(const nlohmann::json& j, SimulationConfig base = {});

SimulationConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const SimulationConfig& config);

/// FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const SimulationConfig& config);

/// FNV-1a of a byte string / file contents, as 16 hex digits.
std::string checksum_hex(const std::string& bytes);
std::string file_checksum(const std::filesystem::path& path);

}  // namespace mcmps
