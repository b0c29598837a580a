#pragma once

#include <filesystem>
#include <iosfwd>

#include <Eigen/Dense>

#include "mcmps/mps.hpp"

namespace mcmps {

/// Versioned binary MPS snapshot (little-endian host layout):
///
///   "MCMPSNAP"            8 bytes magic
///   u32 version           currently 1
///   u32 L
///   i32 left_ok, i32 right_ok
///   f64 truncation cumulative, i64 sweep count
///   per site: u32 D_left, u32 D_right, then D_left*2*D_right complex values
///             (f64 re, f64 im) in row-major (left, physical, right) order.
inline constexpr std::uint32_t kSnapshotVersion = 1;

void write_snapshot(std::ostream& out, const MpsState& state);
MpsState read_snapshot(std::istream& in);
void save_snapshot(const std::filesystem::path& path, const MpsState& state);
MpsState load_snapshot(const std::filesystem::path& path);

/// Dense density-matrix snapshot: "MCRHOSNP", u32 version, u64 dim, then dim*dim
/// complex values row-major.
void save_density_matrix(const std::filesystem::path& path, const Eigen::MatrixXcd& rho);
Eigen::MatrixXcd load_density_matrix(const std::filesystem::path& path);

}  // namespace mcmps
