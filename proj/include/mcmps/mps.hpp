#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "mcmps/model.hpp"

namespace mcmps {

struct TruncationPolicy {
  double cutoff = 1e-8;
  int chi_max = 128;
  bool normalize_after = false;

  void validate() const;
};

/// Running record of SVD truncation. Weights are relative to the norm of the
/// two-site block that was truncated.
struct TruncationLog {
  double cumulative = 0.0;
  double current_sweep = 0.0;
  double last_sweep = 0.0;
  double max_sweep = 0.0;
  std::int64_t sweeps = 0;

  void record(double discarded) {
    cumulative += discarded;
    current_sweep += discarded;
  }
  void close_sweep();
};

/// Open-boundary matrix product state of L spin-1/2 sites.
///
/// Site tensor i is stored as two matrices A_i[s] (D_i x D_{i+1}), one per
/// physical state s (0 = up, 1 = down). Bond k sits to the left of site k, so
/// bonds 0 and L have dimension 1. Sites [0, left_ok) are left isometries and
/// sites [right_ok, L) right isometries; the orthogonality center is defined
/// when right_ok == left_ok + 1.
class MpsState {
 public:
  using SiteTensor = std::array<Eigen::MatrixXcd, 2>;

  MpsState() = default;
  /// Takes ownership of raw tensors; no canonical structure is assumed.
  explicit MpsState(std::vector<SiteTensor> tensors);

  /// Product state from per-site amplitudes (up, down).
  static MpsState product(const std::vector<Eigen::Vector2cd>& local_states);
  /// Computational basis state; spins[i] is 0 for up and 1 for down.
  static MpsState basis_state(const std::vector<int>& spins);
  /// Rebuilds a state with a declared canonical range; throws InvariantError
  /// if the declared isometries do not hold to 1e-10.
  static MpsState from_parts(std::vector<SiteTensor> tensors, int left_ok, int right_ok);

  int length() const { return static_cast<int>(sites_.size()); }
  int bond_dim(int bond) const;
  std::vector<int> bond_dims() const;
  int max_bond_dim() const;

  std::optional<int> center() const;
  int left_ok() const { return left_ok_; }
  int right_ok() const { return right_ok_; }

  const SiteTensor& tensor(int site) const { return sites_.at(site); }
  /// Mutable access; site is no longer assumed to be an isometry.
  SiteTensor& mutable_tensor(int site);

  /// Brings the orthogonality center to `site` with QR sweeps over the
  /// non-canonical region only.
  void canonicalize(int site);

  /// sqrt(<psi|psi>); cheap when a center exists.
  double norm() const;
  void scale(cplx factor);
  /// Rescales to unit norm; throws NumericError on a zero or non-finite norm.
  void normalize();

  TruncationLog& truncation_log() { return log_; }
  const TruncationLog& truncation_log() const { return log_; }

  /// Bond-dimension consistency and canonical-form isometries to `tol`.
  void check_invariants(double tol = 1e-10) const;

  /// Internal hooks for the gate engine.
  void set_canonical_range(int left_ok, int right_ok);

 private:
  std::vector<SiteTensor> sites_;
  int left_ok_ = 0;
  int right_ok_ = 0;
  TruncationLog log_;

  void left_orthonormalize(int site);
  void right_orthonormalize(int site);
};

/// Normalized random state with bond dimensions min(chi0, 2^k, 2^(L-k)),
/// canonical with center 0; identical for identical seeds.
MpsState random_mps(int L, int chi0, std::uint64_t seed);

/// Applies a 4x4 gate (row index 2*s_site + s_site+1) to sites (site, site+1).
///
/// The center must sit at `site` or `site + 1`. It moves to the other site of
/// the pair (site -> site+1 for a left-to-right sweep, site+1 -> site for a
/// right-to-left sweep). Returns the discarded relative weight, which is also
/// recorded in the truncation log.
double apply_two_site_gate(MpsState& state, const Mat4& gate, int site,
                           const TruncationPolicy& policy);

/// op applied at `site`; the norm is left as is.
void apply_local_operator(MpsState& state, const Mat2& op, int site);

/// <psi|op_site|psi> for a normalized state.
cplx expect_local(const MpsState& state, const Mat2& op, int site);

/// <psi|op_i|psi> for every site in one environment pass.
std::vector<cplx> expect_local_all(const MpsState& state, const Mat2& op);

/// <psi|a_i b_j|psi> with i < j.
cplx expect_two_point(const MpsState& state, const Mat2& op_a, int i, const Mat2& op_b, int j);

/// Matrix of <a_i b_j> for all i < j <= i + max_separation (entries outside that
/// band are left at zero).
Eigen::MatrixXcd expect_two_point_band(const MpsState& state, const Mat2& op_a, const Mat2& op_b,
                                       int max_separation);

/// <psi|O|psi> for a two-site operator on (site, site+1).
cplx expect_bond(const MpsState& state, const Mat4& op, int site);
/// <op_i> on every bond (i, i+1) in one sweep; ops.size() must be L - 1.
std::vector<cplx> expect_bond_all(const MpsState& state, const std::vector<Mat4>& ops);

/// Schmidt values across `bond` (between sites bond-1 and bond). The center
/// must be adjacent to the bond.
Eigen::VectorXd schmidt_values(const MpsState& state, int bond);

/// Von Neumann entropy -sum l^2 ln l^2 across `bond`, natural log.
/// Throws DomainError when the state is not normalized to 1e-8.
double entanglement_entropy(const MpsState& state, int bond);

/// <phi|psi>.
cplx overlap(const MpsState& bra, const MpsState& ket);

}  // namespace mcmps
