#pragma once

#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "mcmps/model.hpp"
#include "mcmps/mps.hpp"

namespace mcmps::oracle {

// Dense conventions: basis index b = sum_i s_i 2^(L-1-i) with s_i = 0 for up,
// so site 0 is the most significant bit and kron(op_0, op_1, ...) ordering holds.
// Density matrices are vectorized by column stacking: vec(rho)[a + D*b] = rho(a, b),
// so vec(A rho B) = (B^T kron A) vec(rho).

using SparseMatrix = Eigen::SparseMatrix<cplx>;

inline constexpr int kMaxDenseStateSites = 12;
inline constexpr int kMaxLiouvillianSites = 6;

/// Spin of site i in basis state b: 0 up, 1 down.
inline int spin_of(std::size_t basis, int site, int L) { return static_cast<int>((basis >> (L - 1 - site)) & 1U); }

SparseMatrix sparse_hamiltonian(const ModelParams& params, bool include_dissipation = false);

/// Open-boundary H as a dense 2^L x 2^L matrix; ResourceError above 12 sites.
Eigen::MatrixXcd dense_hamiltonian(const ModelParams& params);

/// H - i gamma_d/2 sum_i n_i.
Eigen::MatrixXcd dense_effective_hamiltonian(const ModelParams& params);

/// op at `site` embedded in the full 2^L space.
SparseMatrix site_operator(const Mat2& op, int site, int L);

/// Full contraction of an MPS (L <= 12).
Eigen::VectorXcd mps_to_dense(const MpsState& state);

/// <v|op_site|v>.
cplx dense_expect_local(const Eigen::VectorXcd& v, const Mat2& op, int site, int L);

/// <v|a_i b_j|v>.
cplx dense_expect_two_point(const Eigen::VectorXcd& v, const Mat2& a, int i, const Mat2& b, int j, int L);

/// Reduced density matrix of sites [0, cut).
Eigen::MatrixXcd reduced_density_matrix(const Eigen::VectorXcd& v, int cut, int L);

/// Von Neumann entropy of a density matrix from its eigenvalues (natural log).
double von_neumann_entropy(const Eigen::MatrixXcd& rho);

struct GroundState {
  double energy = 0.0;
  Eigen::VectorXcd vector;
};

/// Lanczos ground state of H (matrix-free, L <= 12... 20 if memory allows).
GroundState ground_state(const ModelParams& params);

/// Vectorized Lindblad generator
///   L = -i (I kron H - H^T kron I) + gamma_d sum_i [n_i^T kron n_i - 1/2 (I kron n_i + n_i^T kron I)].
SparseMatrix sparse_liouvillian(const ModelParams& params);

/// Dissipator-only part (diagonal in the vectorized basis: -gamma_d/2 times the
/// number of sites where bra and ket spins differ).
SparseMatrix sparse_dissipator(const ModelParams& params);

struct LiouvillianMatrix {
  int dim = 0;  // 4^L
  Eigen::MatrixXcd matrix;
  ModelParams params;
};

/// Dense Liouvillian; ResourceError above 6 sites.
LiouvillianMatrix liouvillian_matrix(const ModelParams& params);

/// L[rho] assembled directly from the commutator and the dissipator, without vectorization.
Eigen::MatrixXcd apply_liouvillian(const ModelParams& params, const Eigen::MatrixXcd& rho);

Eigen::VectorXcd vectorize(const Eigen::MatrixXcd& rho);
Eigen::MatrixXcd unvectorize(const Eigen::VectorXcd& v);

enum class SpectrumMethod { automatic, dense, shift_invert };

struct SpectrumOptions {
  SpectrumMethod method = SpectrumMethod::automatic;
  /// Eigenvalues requested from the iterative solver (nearest to zero).
  int n_eigenvalues = 24;
  double shift = 1e-3;
  bool compute_steady_state = true;
};

struct SpectralResult {
  Eigen::VectorXcd eigenvalues;  // descending real part; dense: all, iterative: the ones found
  double gap = 0.0;              // -Re lambda_1
  Eigen::MatrixXcd steady_state; // trace-normalized zero mode (empty if not requested)
  int near_zero_modes = 0;       // eigenvalues with |Re| < 1e-8
  bool anomaly = false;          // zero mode not unique where uniqueness is expected
  bool iterative = false;
};

SpectralResult liouvillian_spectrum(const ModelParams& params, const SpectrumOptions& options = {});

/// -Re lambda_1 of the Liouvillian.
double liouvillian_gap(const ModelParams& params, const SpectrumOptions& options = {});

struct MasterEquationSeries {
  std::vector<double> grid;
  std::vector<Eigen::MatrixXcd> states;
};

/// Fixed-step RK4 integration of d rho/dt = L[rho], storing rho every output_dt.
/// Throws NumericError when the trace drifts by more than 1e-6.
MasterEquationSeries integrate_master_equation(const Eigen::MatrixXcd& rho0, const ModelParams& params, double t_max,
                                               double dt_ode, double output_dt);

/// Tr(op_site rho).
double density_expect_local(const Eigen::MatrixXcd& rho, const Mat2& op, int site, int L);

/// (1/2) sum |eigenvalues(a - b)|.
double trace_distance(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b);

/// The 2^L vectorized projectors |s><s| onto z-basis configurations.
std::vector<Eigen::VectorXcd> dark_state_projectors(int L);

/// Closed-form Zeno generator on diagonal density matrices (2^L x 2^L):
///   (4 hx^2/gamma_d) sum_i (X_i . X_i - id).
Eigen::MatrixXd sw_effective_liouvillian(double hx, double gamma_d, int L);

/// Gap of a generator given as a dense matrix (second-largest real part).
double generator_gap(const Eigen::MatrixXcd& generator);

}  // namespace mcmps::oracle
