#pragma once

#include <vector>

#include <Eigen/Dense>

#include "mcmps/model.hpp"

namespace mcmps::oracle {

/// Eigen-decomposition of an unperturbed generator L0 grouped into degenerate
/// sectors. Columns of `right` are right eigenvectors v_j, rows of `left` the
/// dual left eigenvectors u_j with u_j v_k = delta_jk.
struct SectorDecomposition {
  Eigen::VectorXcd eigenvalues;
  Eigen::MatrixXcd right;
  Eigen::MatrixXcd left;
  std::vector<int> sector;  // sector label of each eigenvector
  int n_sectors = 0;

  /// Members of sector `s`, in eigenvector order.
  std::vector<Eigen::Index> members(int s) const;
  /// Sector whose eigenvalue is closest to `value`.
  int sector_of(cplx value) const;
};

/// L0 already diagonal: eigenvectors are the unit vectors, kept in basis order.
SectorDecomposition decompose_diagonal(const Eigen::VectorXcd& diagonal, double tol = 1e-9);

/// General (diagonalizable) L0 via a dense eigen-solver.
SectorDecomposition decompose_generator(const Eigen::MatrixXcd& l0, double tol = 1e-9);

/// Second-order effective generator restricted to sector `target` of L0 + xi L1:
///   (L_eff)_{kj} = lambda_j delta_kj + xi <u_k|L1|v_j>
///                + xi^2/2 sum_{l not in target} <u_k|L1|v_l><u_l|L1|v_j>
///                  [1/(lambda_k - lambda_l) + 1/(lambda_j - lambda_l)].
/// Rows and columns follow the order of the target sector's members.
Eigen::MatrixXcd sw_second_order(const SectorDecomposition& dec, const Eigen::MatrixXcd& l1, int target,
                                 double xi = 1.0);

/// Ising specialization: L0 is the dephasing dissipator, L1 = -i[H, .] with
/// the full open-chain H of `params`, projected onto the dark sector
/// (diagonal density matrices, ordered by configuration index).
Eigen::MatrixXcd sw_ising_dark_sector(const ModelParams& params);

}  // namespace mcmps::oracle
