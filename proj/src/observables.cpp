#include "mcmps/observables.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "mcmps/errors.hpp"

namespace mcmps {

std::vector<double> magnetization_profile(const MpsState& state) {
  const std::vector<cplx> raw = expect_local_all(state, pauli::z());
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (std::abs(raw[i].imag()) > 1e-10) throw InvariantError("complex expectation value of a Hermitian operator");
    out[i] = raw[i].real();
  }
  return out;
}

double magnetization_fidelity(std::span<const double> profile_t, std::span<const double> profile_0) {
  if (profile_t.size() != profile_0.size()) throw DomainError("profiles differ in length");
  const double m0 = std::accumulate(profile_0.begin(), profile_0.end(), 0.0);
  if (m0 == 0.0) throw DomainError("fidelity undefined for zero initial magnetization");
  const double mt = std::accumulate(profile_t.begin(), profile_t.end(), 0.0);
  return (mt + m0) / (2.0 * m0);
}

std::vector<double> connected_correlation(const MpsState& state, int r_max) {
  const int L = state.length();
  if (r_max >= L) throw DomainError("r_max must be <= L - 1");
  if (r_max < 1) return {};
  const std::vector<double> m = magnetization_profile(state);
  const Eigen::MatrixXcd zz = expect_two_point_band(state, pauli::z(), pauli::z(), r_max);
  std::vector<double> c(r_max, 0.0);
  for (int r = 1; r <= r_max; ++r) {
    double acc = 0.0;
    for (int i = 0; i + r < L; ++i) acc += zz(i, i + r).real() - m[i] * m[i + r];
    c[r - 1] = acc / static_cast<double>(L - r);
  }
  return c;
}

double half_chain_entropy(const MpsState& state) {
  const int bond = state.length() / 2;
  const auto c = state.center();
  if (c && (*c == bond - 1 || *c == bond)) return entanglement_entropy(state, bond);
  MpsState copy = state;
  copy.canonicalize(bond);
  return entanglement_entropy(copy, bond);
}

void ObservableSeries::validate() const {
  if (grid.size() != values.size()) throw InvariantError("series '" + name + "': grid and values differ in length");
  if (!errors.empty() && errors.size() != values.size())
    throw InvariantError("series '" + name + "': errors and values differ in length");
  for (std::size_t k = 1; k < grid.size(); ++k)
    if (!(grid[k] > grid[k - 1])) throw InvariantError("series '" + name + "': grid not strictly increasing");
}

void CorrelationMap::validate() const {
  if (values.rows() != static_cast<Eigen::Index>(grid.size()) ||
      values.cols() != static_cast<Eigen::Index>(r_values.size()))
    throw InvariantError("correlation map dimensions inconsistent");
  if (errors.size() != 0 && (errors.rows() != values.rows() || errors.cols() != values.cols()))
    throw InvariantError("correlation error matrix dimensions inconsistent");
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", value);
  return buf;
}

namespace {
std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}
}  // namespace

void write_series_csv(const std::filesystem::path& path, const ObservableSeries& series,
                      const std::string& mean_column, const std::string& error_column) {
  series.validate();
  std::ofstream out = open_csv(path);
  out << "t," << mean_column << ',' << error_column << '\n';
  for (std::size_t k = 0; k < series.grid.size(); ++k) {
    const double err = series.errors.empty() ? std::nan("") : series.errors[k];
    out << format_number(series.grid[k]) << ',' << format_number(series.values[k]) << ',' << format_number(err)
        << '\n';
  }
}

void write_correlation_csv(const std::filesystem::path& path, const CorrelationMap& map) {
  map.validate();
  std::ofstream out = open_csv(path);
  out << "t,r,C_mean,C_stderr\n";
  for (std::size_t k = 0; k < map.grid.size(); ++k)
    for (std::size_t j = 0; j < map.r_values.size(); ++j) {
      const double err = map.errors.size() == 0 ? std::nan("") : map.errors(k, j);
      out << format_number(map.grid[k]) << ',' << map.r_values[j] << ',' << format_number(map.values(k, j)) << ','
          << format_number(err) << '\n';
    }
}

}  // namespace mcmps
