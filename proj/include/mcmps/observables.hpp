#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mcmps/mps.hpp"

namespace mcmps {

/// <sz_i> for every site of a normalized state.
std::vector<double> magnetization_profile(const MpsState& state);

/// F = sum_i (m_i(t) + m_i(0)) / (2 sum_i m_i(0)).
double magnetization_fidelity(std::span<const double> profile_t, std::span<const double> profile_0);

/// C(r) for r = 1..r_max, averaged over the L - r open-chain pairs at separation r.
std::vector<double> connected_correlation(const MpsState& state, int r_max);

/// Entropy across the middle bond floor(L/2).
double half_chain_entropy(const MpsState& state);

/// A named scalar series on a time grid, with optional per-point errors.
struct ObservableSeries {
  std::string name;
  std::vector<double> grid;
  std::vector<double> values;
  std::vector<double> errors;  // empty for single trajectories

  void validate() const;
};

/// C(r, t) on a grid; values(t_index, r - 1).
struct CorrelationMap {
  std::vector<double> grid;
  std::vector<int> r_values;
  Eigen::MatrixXd values;
  Eigen::MatrixXd errors;

  void validate() const;
};

/// Decimal with 12 significant digits, as used in every CSV output.
std::string format_number(double value);

/// (t, <name>_mean, <name>_stderr) rows; header "t,<mean_col>,<err_col>".
void write_series_csv(const std::filesystem::path& path, const ObservableSeries& series,
                      const std::string& mean_column, const std::string& error_column);

/// Long format (t, r, C_mean, C_stderr).
void write_correlation_csv(const std::filesystem::path& path, const CorrelationMap& map);

}  // namespace mcmps
