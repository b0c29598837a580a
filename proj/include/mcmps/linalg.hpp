#pragma once

#include <Eigen/Dense>

#include "mcmps/model.hpp"

namespace mcmps {

struct TruncationPolicy;

/// exp(A) for a small dense complex matrix.
///
/// Uses the eigendecomposition A = V D V^-1 when V is well conditioned
/// (cond(V) < 1e8), otherwise scaling-and-squaring of a truncated Taylor series.
Eigen::MatrixXcd expm(const Eigen::MatrixXcd& a);

/// exp(A) always through scaling-and-squaring; used as the cross-check route.
Eigen::MatrixXcd expm_taylor(const Eigen::MatrixXcd& a);

struct TruncatedSvd {
  Eigen::MatrixXcd u;         // rows x k
  Eigen::VectorXd s;          // k singular values, descending
  Eigen::MatrixXcd vh;        // k x cols
  double discarded = 0.0;     // sum of dropped s^2 relative to the total weight
};

/// Singular values whose relative magnitude is below this floor are always dropped.
inline constexpr double kSingularValueFloor = 1e-14;

/// SVD of m truncated with the policy: keep the smallest leading set whose
/// discarded relative weight is <= cutoff^2, drop values under the noise floor,
/// then cap at chi_max.
TruncatedSvd truncated_svd(const Eigen::MatrixXcd& m, const TruncationPolicy& policy);

/// Number of singular values kept by the policy (exposed for tests).
int truncation_rank(const Eigen::VectorXd& singular_values, const TruncationPolicy& policy);

}  // namespace mcmps
