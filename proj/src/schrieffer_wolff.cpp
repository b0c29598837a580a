#include "mcmps/schrieffer_wolff.hpp"

#include <cmath>

#include "mcmps/errors.hpp"
#include "mcmps/oracle.hpp"

namespace mcmps::oracle {

using Eigen::Index;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;

std::vector<Index> SectorDecomposition::members(int s) const {
  std::vector<Index> out;
  for (std::size_t k = 0; k < sector.size(); ++k)
    if (sector[k] == s) out.push_back(static_cast<Index>(k));
  return out;
}

int SectorDecomposition::sector_of(cplx value) const {
  int best = -1;
  double dist = INFINITY;
  for (std::size_t k = 0; k < sector.size(); ++k) {
    const double d = std::abs(eigenvalues(static_cast<Index>(k)) - value);
    if (d < dist) {
      dist = d;
      best = sector[k];
    }
  }
  return best;
}

namespace {

void label_sectors(SectorDecomposition& dec, double tol) {
  const Index n = dec.eigenvalues.size();
  dec.sector.assign(n, -1);
  std::vector<cplx> reps;
  for (Index k = 0; k < n; ++k) {
    int found = -1;
    for (std::size_t s = 0; s < reps.size(); ++s)
      if (std::abs(dec.eigenvalues(k) - reps[s]) < tol) {
        found = static_cast<int>(s);
        break;
      }
    if (found < 0) {
      found = static_cast<int>(reps.size());
      reps.push_back(dec.eigenvalues(k));
    }
    dec.sector[k] = found;
  }
  dec.n_sectors = static_cast<int>(reps.size());
}

}  // namespace

SectorDecomposition decompose_diagonal(const Eigen::VectorXcd& diagonal, double tol) {
  SectorDecomposition dec;
  dec.eigenvalues = diagonal;
  dec.right = MatrixXcd::Identity(diagonal.size(), diagonal.size());
  dec.left = dec.right;
  label_sectors(dec, tol);
  return dec;
}

SectorDecomposition decompose_generator(const Eigen::MatrixXcd& l0, double tol) {
  Eigen::ComplexEigenSolver<MatrixXcd> es(l0, true);
  if (es.info() != Eigen::Success) throw NumericError("eigen-decomposition of L0 failed");
  SectorDecomposition dec;
  dec.eigenvalues = es.eigenvalues();
  dec.right = es.eigenvectors();
  Eigen::PartialPivLU<MatrixXcd> lu(dec.right);
  dec.left = lu.inverse();
  label_sectors(dec, tol);
  return dec;
}

Eigen::MatrixXcd sw_second_order(const SectorDecomposition& dec, const Eigen::MatrixXcd& l1, int target, double xi) {
  const auto in = dec.members(target);
  if (in.empty()) throw DomainError("empty target sector");
  std::vector<Index> out;
  for (std::size_t k = 0; k < dec.sector.size(); ++k)
    if (dec.sector[k] != target) out.push_back(static_cast<Index>(k));

  const Index m = static_cast<Index>(in.size());
  MatrixXcd u_in(m, dec.left.cols()), v_in(dec.right.rows(), m);
  for (Index k = 0; k < m; ++k) {
    u_in.row(k) = dec.left.row(in[k]);
    v_in.col(k) = dec.right.col(in[k]);
  }
  const MatrixXcd l1_v_in = l1 * v_in;
  const MatrixXcd first = u_in * l1_v_in;

  MatrixXcd eff = xi * first;
  for (Index k = 0; k < m; ++k) eff(k, k) += dec.eigenvalues(in[k]);
  if (out.empty()) return eff;

  const Index q = static_cast<Index>(out.size());
  MatrixXcd u_out(q, dec.left.cols()), v_out(dec.right.rows(), q);
  for (Index l = 0; l < q; ++l) {
    u_out.row(l) = dec.left.row(out[l]);
    v_out.col(l) = dec.right.col(out[l]);
  }
  const MatrixXcd a = u_in * (l1 * v_out);  // <u_k|L1|v_l>
  const MatrixXcd b = u_out * l1_v_in;      // <u_l|L1|v_j>
  for (Index k = 0; k < m; ++k) {
    const cplx lk = dec.eigenvalues(in[k]);
    for (Index j = 0; j < m; ++j) {
      const cplx lj = dec.eigenvalues(in[j]);
      cplx sum = 0.0;
      for (Index l = 0; l < q; ++l) {
        const cplx ll = dec.eigenvalues(out[l]);
        const cplx ab = a(k, l) * b(l, j);
        if (ab == cplx(0.0)) continue;
        sum += ab * (1.0 / (lk - ll) + 1.0 / (lj - ll));
      }
      eff(k, j) += 0.5 * xi * xi * sum;
    }
  }
  return eff;
}

Eigen::MatrixXcd sw_ising_dark_sector(const ModelParams& params) {
  if (!(params.gamma_d > 0.0)) throw DomainError("dark-sector expansion needs gamma_d > 0");
  const SparseMatrix l0 = sparse_dissipator(params);
  const VectorXcd diag = l0.diagonal();
  const SectorDecomposition dec = decompose_diagonal(diag);
  // L1 = full Liouvillian minus the dissipator, i.e. -i[H, .].
  const MatrixXcd l1 = MatrixXcd(sparse_liouvillian(params) - l0);
  return sw_second_order(dec, l1, dec.sector_of(cplx(0.0)));
}

}  // namespace mcmps::oracle
