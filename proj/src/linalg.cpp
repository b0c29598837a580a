#include "mcmps/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <iostream>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include "mcmps/mps.hpp"

namespace mcmps {

Eigen::MatrixXcd expm_taylor(const Eigen::MatrixXcd& a) {
  const Eigen::Index n = a.rows();
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Eigen::MatrixXcd scaled = a / std::ldexp(1.0, squarings);

  Eigen::MatrixXcd result = Eigen::MatrixXcd::Identity(n, n);
  Eigen::MatrixXcd term = Eigen::MatrixXcd::Identity(n, n);
  for (int k = 1; k <= 30; ++k) {
    term = term * scaled / static_cast<double>(k);
    result += term;
    if (term.cwiseAbs().maxCoeff() < 1e-18) break;
  }
  for (int i = 0; i < squarings; ++i) result = result * result;
  return result;
}

Eigen::MatrixXcd expm(const Eigen::MatrixXcd& a) {
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(a, true);
  if (es.info() == Eigen::Success) {
    const Eigen::MatrixXcd& v = es.eigenvectors();
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(v);
    if (lu.isInvertible()) {
      const Eigen::MatrixXcd vinv = lu.inverse();
      const double cond = v.norm() * vinv.norm();
      if (cond < 1e8) {
        const Eigen::VectorXcd d = es.eigenvalues().array().exp();
        return v * d.asDiagonal() * vinv;
      }
    }
  }
  return expm_taylor(a);
}

int truncation_rank(const Eigen::VectorXd& s, const TruncationPolicy& policy) {
  const Eigen::Index n = s.size();
  if (n == 0) return 0;
  const double total = s.squaredNorm();
  if (!(total > 0.0)) return 1;
  const double floor = kSingularValueFloor * std::sqrt(total);
  const double budget = policy.cutoff * policy.cutoff * total;

  // Tail weights: discard from the back while the accumulated weight fits the budget.
  int keep = static_cast<int>(n);
  double tail = 0.0;
  while (keep > 1) {
    const double w = s(keep - 1) * s(keep - 1);
    if (s(keep - 1) < floor || tail + w <= budget) {
      tail += w;
      --keep;
    } else {
      break;
    }
  }
  return std::clamp(keep, 1, std::max(1, policy.chi_max));
}

namespace {

// Thin SVD through LAPACK divide and conquer; false if it did not converge.
bool lapack_svd(const Eigen::MatrixXcd& m, Eigen::MatrixXcd& u, Eigen::VectorXd& s, Eigen::MatrixXcd& v) {
  const lapack_int rows = static_cast<lapack_int>(m.rows()), cols = static_cast<lapack_int>(m.cols());
  const lapack_int k = std::min(rows, cols);
  Eigen::MatrixXcd a = m;
  Eigen::MatrixXcd vt(k, cols);
  u.resize(rows, k);
  s.resize(k);
  const lapack_int info = LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'S', rows, cols, a.data(), rows, s.data(), u.data(), rows,
                                         vt.data(), k);
  if (info != 0) return false;
  v = vt.adjoint();
  return true;
}

// Some optimized BLAS kernels return wrong factors for larger matrices (seen with
// OpenBLAS 0.3.20 on Cooper Lake). Probe a few shapes once and fall back to Eigen if any
// reconstruction is off.
bool lapack_svd_trusted() {
  static const bool trusted = [] {
    for (auto [rows, cols] : {std::pair{256, 256}, {200, 114}, {114, 200}, {130, 130}, {40, 300}}) {
      Eigen::MatrixXcd m(rows, cols);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = cplx(std::sin(0.7 * i + 1.3 * j), std::cos(1.1 * i - 0.3 * j * j));
      Eigen::MatrixXcd u, v;
      Eigen::VectorXd s;
      if (!lapack_svd(m, u, s, v)) return false;
      const double err = (u * s.cast<cplx>().asDiagonal() * v.adjoint() - m).norm() / m.norm();
      const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(u.cols(), u.cols());
      if (!(err < 1e-12) || !((u.adjoint() * u - id).norm() < 1e-10) || !((v.adjoint() * v - id).norm() < 1e-10)) {
        std::cerr << "warning: LAPACK zgesdd failed a self-test; using the slower Eigen SVD. With OpenBLAS, setting "
                     "OPENBLAS_CORETYPE to an older core (e.g. Haswell) usually avoids this.\n";
        return false;
      }
    }
    return true;
  }();
  return trusted;
}

}  // namespace

TruncatedSvd truncated_svd(const Eigen::MatrixXcd& m, const TruncationPolicy& policy) {
  Eigen::MatrixXcd u, v;
  Eigen::VectorXd s;
  if (!lapack_svd_trusted() || !lapack_svd(m, u, s, v)) {
    Eigen::BDCSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    u = svd.matrixU();
    v = svd.matrixV();
    s = svd.singularValues();
  }
  const int k = truncation_rank(s, policy);
  const double total = s.squaredNorm();

  TruncatedSvd out;
  out.u = u.leftCols(k);
  out.s = s.head(k);
  out.vh = v.leftCols(k).adjoint();
  // Summing the tail directly avoids cancellation in 1 - kept.
  if (total > 0.0 && k < s.size()) out.discarded = s.tail(s.size() - k).squaredNorm() / total;
  return out;
}

}  // namespace mcmps
