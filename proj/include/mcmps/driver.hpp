#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcmps/analysis.hpp"
#include "mcmps/config.hpp"
#include "mcmps/trajectories.hpp"

namespace mcmps {

inline constexpr const char* kCodeVersion = "0.1.0";

struct GroundStateReport {
  int L = 0;
  double energy = 0.0;
  double bulk_sz = 0.0;  // mean <sz> over the central half of the chain
  int max_bond_dim = 0;
  bool converged = false;
  std::string checksum;  // of the snapshot file
  std::filesystem::path snapshot;
};

/// Imaginary-time ground state with +|hz|; writes ground_state.mps,
/// ground_state.json and manifest.json into config.output_dir.
GroundStateReport cmd_ground_state(const SimulationConfig& config);

struct EvolveOptions {
  /// Initial state; defaults to <output_dir>/ground_state.mps, computed if missing.
  std::optional<std::filesystem::path> snapshot;
  /// Continue from <output_dir>/progress if present.
  bool resume = false;
};

/// Quench to -|hz| and run the trajectory ensemble. Writes fidelity.csv,
/// magnetization.csv, magnetization_profile.csv, entropy.csv, correlation.csv,
/// jumps_per_site.csv, jumps_per_interval.csv, trajectories.jsonl, config.json
/// and manifest.json (the subset enabled by config.observables).
EnsembleResult cmd_evolve(const SimulationConfig& config, const EvolveOptions& options = {});

struct GapRow {
  double gamma_d = 0.0;
  int L = 0;
  double gap = 0.0;
  double zeno_pred = 0.0;  // 8 hx^2 / gamma_d
};

/// Liouvillian gap for each gamma_d at fixed (J, hx, hz, L). Writes gaps.csv
/// (gamma_d,L,gap,zeno_pred) and gaps_summary.json (crossover 8 hx^2, peak).
std::vector<GapRow> cmd_gap_sweep(const ModelParams& params, const std::vector<double>& gammas,
                                  const std::filesystem::path& output_dir);

enum class FitKind { fvd, thermalization, arrhenius, arrhenius_linear };

FitKind parse_fit_kind(const std::string& name);

struct FitRequest {
  FitKind kind = FitKind::fvd;
  std::filesystem::path input;       // fidelity.csv, or gamma_d,rate CSV for Arrhenius fits
  std::filesystem::path output_dir;  // receives fit_report.json and fit_overlay.csv
  std::optional<FitWindow> window;   // fvd: manual window; absent selects auto_window
  double gamma_d = 0.0;              // fvd: window-table key
  double h_z = 0.08;                 // arrhenius
  double t_min = 0.0;                // thermalization
  double t_max = -1.0;               // thermalization
  double min_span = 1.0;             // auto window
};

nlohmann::json cmd_fit(const FitRequest& request);

/// Runs the full protocol to t = probe_time for every L and tabulates F(probe_time).
/// Each L writes into <output_dir>/L<L>; the table goes to finite_size.csv.
FiniteSizeTable cmd_finite_size(const SimulationConfig& config, const std::vector<int>& sizes, double probe_time,
                                double tolerance);

/// Simple CSV reader: header row, then numeric rows.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::vector<double> column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

/// Writes `contents` to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

/// manifest.json: config hash, code version, timestamps, trajectory status and
/// a checksum for every other file under `dir`.
void write_manifest(const std::filesystem::path& dir, const std::string& command, const std::string& config_hash,
                    const std::string& started, const nlohmann::json& trajectories = nlohmann::json::array());

std::string timestamp_now();

}  // namespace mcmps
