#include "mcmps/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include "mcmps/errors.hpp"

namespace mcmps::oracle {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;

namespace {

std::size_t dimension(int L) { return std::size_t{1} << L; }

void guard_state_size(int L) {
  if (L > kMaxDenseStateSites)
    throw ResourceError("dense state oracle limited to " + std::to_string(kMaxDenseStateSites) + " sites");
}

void guard_liouvillian_size(int L) {
  if (L > kMaxLiouvillianSites)
    throw ResourceError("Liouvillian oracle limited to " + std::to_string(kMaxLiouvillianSites) + " sites");
}

double sz_value(std::size_t b, int site, int L) { return spin_of(b, site, L) == 0 ? 1.0 : -1.0; }

// Diagonal of H (coupling + longitudinal field) for basis state b.
double diagonal_energy(const ModelParams& p, std::size_t b) {
  double e = 0.0;
  for (int i = 0; i + 1 < p.L; ++i) e -= p.J * sz_value(b, i, p.L) * sz_value(b, i + 1, p.L);
  for (int i = 0; i < p.L; ++i) e -= p.hz * sz_value(b, i, p.L);
  return e;
}

int up_count(std::size_t b, int L) { return L - std::popcount(b); }

}  // namespace

SparseMatrix sparse_hamiltonian(const ModelParams& params, bool include_dissipation) {
  params.validate();
  guard_state_size(params.L);
  const int L = params.L;
  const std::size_t d = dimension(L);
  std::vector<Eigen::Triplet<cplx>> t;
  t.reserve(d * (L + 1));
  for (std::size_t b = 0; b < d; ++b) {
    cplx diag = diagonal_energy(params, b);
    if (include_dissipation) diag += cplx(0.0, -0.5 * params.gamma_d * up_count(b, L));
    t.emplace_back(b, b, diag);
    if (params.hx != 0.0)
      for (int i = 0; i < L; ++i) t.emplace_back(b ^ (std::size_t{1} << (L - 1 - i)), b, -params.hx);
  }
  SparseMatrix h(d, d);
  h.setFromTriplets(t.begin(), t.end());
  return h;
}

Eigen::MatrixXcd dense_hamiltonian(const ModelParams& params) { return MatrixXcd(sparse_hamiltonian(params, false)); }

Eigen::MatrixXcd dense_effective_hamiltonian(const ModelParams& params) {
  return MatrixXcd(sparse_hamiltonian(params, true));
}

SparseMatrix site_operator(const Mat2& op, int site, int L) {
  guard_state_size(L);
  const std::size_t d = dimension(L);
  const std::size_t mask = std::size_t{1} << (L - 1 - site);
  std::vector<Eigen::Triplet<cplx>> t;
  t.reserve(2 * d);
  for (std::size_t b = 0; b < d; ++b) {
    const int s = spin_of(b, site, L);
    for (int sp = 0; sp < 2; ++sp) {
      const cplx v = op(sp, s);
      if (v == cplx(0.0)) continue;
      const std::size_t row = (sp == s) ? b : (b ^ mask);
      t.emplace_back(row, b, v);
    }
  }
  SparseMatrix m(d, d);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

Eigen::VectorXcd mps_to_dense(const MpsState& state) {
  const int L = state.length();
  guard_state_size(L);
  // Rows: configurations of the sites contracted so far; columns: open bond.
  MatrixXcd acc = MatrixXcd::Ones(1, 1);
  for (int i = 0; i < L; ++i) {
    const auto& a = state.tensor(i);
    MatrixXcd next(acc.rows() * 2, a[0].cols());
    for (Eigen::Index r = 0; r < acc.rows(); ++r)
      for (int s = 0; s < 2; ++s) next.row(2 * r + s) = acc.row(r) * a[s];
    acc = std::move(next);
  }
  return acc.col(0);
}

cplx dense_expect_local(const Eigen::VectorXcd& v, const Mat2& op, int site, int L) {
  return v.dot(site_operator(op, site, L) * v);
}

cplx dense_expect_two_point(const Eigen::VectorXcd& v, const Mat2& a, int i, const Mat2& b, int j, int L) {
  const VectorXcd w = site_operator(a, i, L) * (site_operator(b, j, L) * v);
  return v.dot(w);
}

Eigen::MatrixXcd reduced_density_matrix(const Eigen::VectorXcd& v, int cut, int L) {
  const std::size_t da = dimension(cut), db = dimension(L - cut);
  MatrixXcd m(da, db);
  for (std::size_t a = 0; a < da; ++a)
    for (std::size_t b = 0; b < db; ++b) m(a, b) = v(a * db + b);
  return m * m.adjoint();
}

double von_neumann_entropy(const Eigen::MatrixXcd& rho) {
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(rho, Eigen::EigenvaluesOnly);
  double s = 0.0;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
    const double p = es.eigenvalues()(k);
    if (p > 1e-300) s -= p * std::log(p);
  }
  return s;
}

GroundState ground_state(const ModelParams& params) {
  const SparseMatrix h = sparse_hamiltonian(params, false);
  const Eigen::Index d = h.rows();
  const int max_iter = static_cast<int>(std::min<Eigen::Index>(d, 300));

  std::vector<VectorXcd> basis;
  std::vector<double> alpha, beta;
  VectorXcd q = VectorXcd::Zero(d);
  // Deterministic start vector with overlap on every basis state.
  for (Eigen::Index k = 0; k < d; ++k) q(k) = 1.0 + 0.1 * std::sin(0.37 * static_cast<double>(k));
  q.normalize();

  double previous = INFINITY;
  Eigen::VectorXd ritz;
  Eigen::MatrixXd ritz_vectors;
  for (int it = 0; it < max_iter; ++it) {
    basis.push_back(q);
    VectorXcd w = h * q;
    const double a = q.dot(w).real();
    alpha.push_back(a);
    // Full reorthogonalization, twice.
    for (int pass = 0; pass < 2; ++pass)
      for (const VectorXcd& b : basis) w -= b * b.dot(w);
    const double bnorm = w.norm();

    const int m = static_cast<int>(alpha.size());
    Eigen::VectorXd diag = Eigen::Map<Eigen::VectorXd>(alpha.data(), m);
    Eigen::VectorXd off(std::max(0, m - 1));
    for (int k = 0; k + 1 < m; ++k) off(k) = beta[k];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
    tri.computeFromTridiagonal(diag, off, Eigen::ComputeEigenvectors);
    ritz = tri.eigenvalues();
    ritz_vectors = tri.eigenvectors();
    const double e0 = ritz(0);
    const bool converged = std::abs(e0 - previous) < 1e-13 * std::max(1.0, std::abs(e0)) &&
                           std::abs(bnorm * ritz_vectors(m - 1, 0)) < 1e-10;
    previous = e0;
    if (converged || bnorm < 1e-14 || it + 1 == max_iter) break;
    beta.push_back(bnorm);
    q = w / bnorm;
  }
  GroundState gs;
  gs.energy = ritz(0);
  gs.vector = VectorXcd::Zero(d);
  for (std::size_t k = 0; k < basis.size(); ++k) gs.vector += ritz_vectors(static_cast<Eigen::Index>(k), 0) * basis[k];
  gs.vector.normalize();
  return gs;
}

SparseMatrix sparse_liouvillian(const ModelParams& params) {
  params.validate();
  guard_liouvillian_size(params.L);
  const int L = params.L;
  const std::size_t d = dimension(L);
  const std::size_t dd = d * d;
  std::vector<double> diag_e(d);
  for (std::size_t b = 0; b < d; ++b) diag_e[b] = diagonal_energy(params, b);

  std::vector<Eigen::Triplet<cplx>> t;
  t.reserve(dd * (2 * L + 1));
  const cplx minus_i(0.0, -1.0);
  for (std::size_t b = 0; b < d; ++b) {
    for (std::size_t a = 0; a < d; ++a) {
      const std::size_t row = a + d * b;
      // -i (H rho - rho H) on the diagonal part, and the dephasing dissipator.
      const int differing = std::popcount(a ^ b);
      t.emplace_back(row, row, minus_i * (diag_e[a] - diag_e[b]) - 0.5 * params.gamma_d * differing);
      if (params.hx == 0.0) continue;
      for (int i = 0; i < L; ++i) {
        const std::size_t mask = std::size_t{1} << (L - 1 - i);
        // (I kron H): rho(a', b) feeds (a, b) with H(a, a') = -hx.
        t.emplace_back(row, (a ^ mask) + d * b, minus_i * (-params.hx));
        // -(H^T kron I): rho(a, b') feeds (a, b) with -H(b', b) = +hx.
        t.emplace_back(row, a + d * (b ^ mask), minus_i * (params.hx));
      }
    }
  }
  SparseMatrix l(dd, dd);
  l.setFromTriplets(t.begin(), t.end());
  return l;
}

SparseMatrix sparse_dissipator(const ModelParams& params) {
  params.validate();
  guard_liouvillian_size(params.L);
  const std::size_t d = dimension(params.L);
  SparseMatrix l(d * d, d * d);
  std::vector<Eigen::Triplet<cplx>> t;
  t.reserve(d * d);
  for (std::size_t b = 0; b < d; ++b)
    for (std::size_t a = 0; a < d; ++a)
      t.emplace_back(a + d * b, a + d * b, -0.5 * params.gamma_d * std::popcount(a ^ b));
  l.setFromTriplets(t.begin(), t.end());
  return l;
}

LiouvillianMatrix liouvillian_matrix(const ModelParams& params) {
  LiouvillianMatrix out;
  out.params = params;
  out.matrix = MatrixXcd(sparse_liouvillian(params));
  out.dim = static_cast<int>(out.matrix.rows());
  return out;
}

Eigen::MatrixXcd apply_liouvillian(const ModelParams& params, const Eigen::MatrixXcd& rho) {
  const int L = params.L;
  const MatrixXcd h = dense_hamiltonian(params);
  MatrixXcd out = cplx(0.0, -1.0) * (h * rho - rho * h);
  for (int i = 0; i < L; ++i) {
    const MatrixXcd n = MatrixXcd(site_operator(jump_operator(), i, L));
    out += params.gamma_d * (n * rho * n.adjoint() - 0.5 * (n.adjoint() * n * rho + rho * n.adjoint() * n));
  }
  return out;
}

Eigen::VectorXcd vectorize(const Eigen::MatrixXcd& rho) {
  return Eigen::Map<const VectorXcd>(rho.data(), rho.size());  // Eigen is column-major
}

Eigen::MatrixXcd unvectorize(const Eigen::VectorXcd& v) {
  const auto d = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(v.size()))));
  if (d * d != v.size()) throw DomainError("vector length is not a perfect square");
  return Eigen::Map<const MatrixXcd>(v.data(), d, d);
}

namespace {

// Eigenvalues sorted by descending real part (ties by |imag|, then imag).
std::vector<Eigen::Index> sort_descending_real(const VectorXcd& ev) {
  std::vector<Eigen::Index> idx(ev.size());
  for (Eigen::Index k = 0; k < ev.size(); ++k) idx[k] = k;
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index x, Eigen::Index y) {
    if (ev(x).real() != ev(y).real()) return ev(x).real() > ev(y).real();
    if (std::abs(ev(x).imag()) != std::abs(ev(y).imag())) return std::abs(ev(x).imag()) < std::abs(ev(y).imag());
    return ev(x).imag() < ev(y).imag();
  });
  return idx;
}

// Picks the zero mode (|lambda| < 1e-9 with a trace-carrying eigenmatrix when
// vectors are available) and returns the gap from the remaining eigenvalues.
void finish_spectrum(SpectralResult& res, const VectorXcd& values, const MatrixXcd* vectors, const ModelParams& p) {
  const auto order = sort_descending_real(values);
  res.eigenvalues.resize(values.size());
  for (std::size_t k = 0; k < order.size(); ++k) res.eigenvalues(k) = values(order[k]);

  const std::size_t d = dimension(p.L);
  Eigen::Index zero = -1;
  double best_trace = -1.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const cplx lam = values(order[k]);
    if (std::abs(lam) >= 1e-9) continue;
    double tr = 1.0;
    if (vectors) {
      const VectorXcd v = vectors->col(order[k]);
      cplx trace = 0.0;
      for (std::size_t a = 0; a < d; ++a) trace += v(a + d * a);
      tr = std::abs(trace) / v.norm();
    }
    if (tr > best_trace) {
      best_trace = tr;
      zero = order[k];
    }
  }
  res.near_zero_modes = 0;
  for (Eigen::Index k = 0; k < values.size(); ++k)
    if (std::abs(values(k).real()) < 1e-8) ++res.near_zero_modes;
  res.anomaly = (p.gamma_d > 0.0 && p.hx != 0.0 && res.near_zero_modes != 1);

  double gap = INFINITY;
  for (Eigen::Index k = 0; k < values.size(); ++k) {
    if (k == zero) continue;
    gap = std::min(gap, -values(k).real());
  }
  res.gap = std::isfinite(gap) ? std::max(0.0, gap) : 0.0;

  if (vectors && zero >= 0) {
    MatrixXcd rho = unvectorize(vectors->col(zero));
    const cplx tr = rho.trace();
    if (std::abs(tr) > 0.0) rho /= tr;
    res.steady_state = 0.5 * (rho + rho.adjoint());
  }
}

SpectralResult dense_spectrum(const ModelParams& p, bool vectors) {
  const MatrixXcd l = MatrixXcd(sparse_liouvillian(p));
  Eigen::ComplexEigenSolver<MatrixXcd> es(l, vectors);
  if (es.info() != Eigen::Success) throw NumericError("dense Liouvillian eigensolver failed");
  SpectralResult res;
  const MatrixXcd vecs = vectors ? es.eigenvectors() : MatrixXcd();
  finish_spectrum(res, es.eigenvalues(), vectors ? &vecs : nullptr, p);
  return res;
}

// Shift-invert Arnoldi: eigenvalues of (L - shift)^-1 of largest modulus are
// the Liouvillian eigenvalues nearest the shift.
SpectralResult shift_invert_spectrum(const ModelParams& p, const SpectrumOptions& opt) {
  // Fill-in makes a sparse LU of the Liouvillian nearly dense; LAPACK's blocked
  // dense LU is several times faster up to L = 6.
  const auto sparse = sparse_liouvillian(p);
  MatrixXcd shifted = MatrixXcd(sparse);
  const Eigen::Index n = shifted.rows();
  shifted.diagonal().array() -= opt.shift;
  const double scale = shifted.norm();
  const lapack_int ln = static_cast<lapack_int>(n);
  std::vector<lapack_int> pivots(n);
  if (LAPACKE_zgetrf(LAPACK_COL_MAJOR, ln, ln, shifted.data(), ln, pivots.data()) != 0)
    throw NumericError("LU factorization of the shifted Liouvillian failed");
  auto solve = [&](const VectorXcd& rhs) {
    VectorXcd x = rhs;
    if (LAPACKE_zgetrs(LAPACK_COL_MAJOR, 'N', ln, 1, shifted.data(), ln, pivots.data(), x.data(), ln) != 0)
      throw NumericError("shifted Liouvillian solve failed");
    return x;
  };
  // Guard against a faulty BLAS: the factorization must solve a test system backward-stably.
  {
    const VectorXcd b = VectorXcd::Ones(n);
    const VectorXcd x = solve(b);
    const VectorXcd r = sparse * x - opt.shift * x - b;
    if (!(r.norm() <= 1e-10 * scale * x.norm())) throw NumericError("LU solve of the shifted Liouvillian is inaccurate");
  }

  const int nev = std::max(2, std::min<int>(opt.n_eigenvalues, static_cast<int>(n) - 2));
  // The Krylov basis grows in place; Ritz values are checked every nev vectors
  // once it holds max(3 nev, 60) of them.
  const int m_max = std::min<int>(static_cast<int>(n), std::max(24 * nev, 480));
  int next_check = std::min<int>(static_cast<int>(n), std::max(3 * nev, 60));
  MatrixXcd v(n, m_max + 1);
  MatrixXcd hess = MatrixXcd::Zero(m_max + 1, m_max);
  VectorXcd start(n);
  for (Eigen::Index k = 0; k < n; ++k) start(k) = cplx(1.0 + 0.01 * std::cos(0.7 * k), 0.01 * std::sin(1.3 * k));
  v.col(0) = start.normalized();
  for (int j = 0; j < m_max; ++j) {
    VectorXcd w = solve(v.col(j));
    for (int pass = 0; pass < 2; ++pass) {
      const VectorXcd c = v.leftCols(j + 1).adjoint() * w;
      w -= v.leftCols(j + 1) * c;
      hess.col(j).head(j + 1) += c;
    }
    const double h = w.norm();
    hess(j + 1, j) = h;
    const bool invariant = h < 1e-13;
    if (!invariant) v.col(j + 1) = w / h;
    const int built = j + 1;
    if (!invariant && built < next_check && built < m_max) continue;
    next_check += nev;

    Eigen::ComplexEigenSolver<MatrixXcd> es(hess.topLeftCorner(built, built), true);
    const VectorXcd mu = es.eigenvalues();
    std::vector<Eigen::Index> idx(mu.size());
    for (Eigen::Index k = 0; k < mu.size(); ++k) idx[k] = k;
    std::sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return std::abs(mu(a)) > std::abs(mu(b)); });
    const int take = std::min<int>(nev, static_cast<int>(idx.size()));

    bool converged = true;
    VectorXcd lambdas(take);
    MatrixXcd ritz(n, take);
    for (int k = 0; k < take; ++k) {
      const Eigen::Index c = idx[k];
      const VectorXcd y = es.eigenvectors().col(c);
      const double residual = invariant ? 0.0 : std::abs(h * y(built - 1));
      if (residual > 1e-8 * std::abs(mu(c))) converged = false;
      lambdas(k) = opt.shift + 1.0 / mu(c);
      ritz.col(k) = v.leftCols(built) * y;
    }
    if (converged || invariant || built == m_max) {
      if (!converged && !invariant) throw NumericError("shift-invert Arnoldi did not converge");
      SpectralResult res;
      res.iterative = true;
      finish_spectrum(res, lambdas, opt.compute_steady_state ? &ritz : nullptr, p);
      return res;
    }
  }
  throw NumericError("shift-invert Arnoldi did not converge");
}

}  // namespace

SpectralResult liouvillian_spectrum(const ModelParams& params, const SpectrumOptions& options) {
  params.validate();
  guard_liouvillian_size(params.L);
  SpectrumMethod method = options.method;
  if (method == SpectrumMethod::automatic) method = params.L <= 4 ? SpectrumMethod::dense : SpectrumMethod::shift_invert;
  if (method == SpectrumMethod::dense) return dense_spectrum(params, options.compute_steady_state);
  return shift_invert_spectrum(params, options);
}

double liouvillian_gap(const ModelParams& params, const SpectrumOptions& options) {
  SpectrumOptions o = options;
  o.compute_steady_state = false;
  return liouvillian_spectrum(params, o).gap;
}

MasterEquationSeries integrate_master_equation(const Eigen::MatrixXcd& rho0, const ModelParams& params, double t_max,
                                               double dt_ode, double output_dt) {
  params.validate();
  guard_liouvillian_size(params.L);
  const int L = params.L;
  const Eigen::Index d = static_cast<Eigen::Index>(dimension(L));
  if (rho0.rows() != d || rho0.cols() != d) throw DomainError("rho0 has the wrong dimension");
  if (!(dt_ode > 0.0) || !(output_dt > 0.0) || !(t_max >= 0.0)) throw ConfigError("invalid integration times");
  const long per_output = std::lround(output_dt / dt_ode);
  if (per_output < 1 || std::abs(per_output * dt_ode - output_dt) > 1e-9)
    throw ConfigError("output_dt must be a multiple of dt_ode");
  const long n_out = std::lround(t_max / output_dt);

  // L[rho] = -i (Heff rho - rho Heff^dag) + gamma sum_i n_i rho n_i, where the
  // last term multiplies rho(a, b) by the number of sites up in both a and b.
  const SparseMatrix heff = sparse_hamiltonian(params, true);
  const SparseMatrix heff_dag = SparseMatrix(heff.adjoint());
  Eigen::MatrixXd both_up(d, d);
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = 0; b < d; ++b)
      both_up(a, b) = static_cast<double>(L - std::popcount(static_cast<std::size_t>(a) | static_cast<std::size_t>(b)));
  const cplx minus_i(0.0, -1.0);
  auto rhs = [&](const MatrixXcd& rho) -> MatrixXcd {
    MatrixXcd out = minus_i * (heff * rho);
    out -= minus_i * (heff_dag.transpose() * rho.transpose()).transpose();
    out.array() += params.gamma_d * (rho.array() * both_up.array());
    return out;
  };

  MasterEquationSeries series;
  MatrixXcd rho = rho0;
  const cplx trace0 = rho0.trace();
  series.grid.push_back(0.0);
  series.states.push_back(rho);
  for (long k = 1; k <= n_out; ++k) {
    for (long s = 0; s < per_output; ++s) {
      const MatrixXcd k1 = rhs(rho);
      const MatrixXcd k2 = rhs(rho + 0.5 * dt_ode * k1);
      const MatrixXcd k3 = rhs(rho + 0.5 * dt_ode * k2);
      const MatrixXcd k4 = rhs(rho + dt_ode * k3);
      rho += (dt_ode / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    if (!(std::abs(rho.trace() - trace0) <= 1e-6) || !rho.allFinite())
      throw NumericError("master-equation trace drift above 1e-6; reduce dt_ode");
    series.grid.push_back(static_cast<double>(k) * output_dt);
    series.states.push_back(rho);
  }
  return series;
}

double density_expect_local(const Eigen::MatrixXcd& rho, const Mat2& op, int site, int L) {
  return (MatrixXcd(site_operator(op, site, L)) * rho).trace().real();
}

double trace_distance(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  const MatrixXcd diff = a - b;
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(0.5 * (diff + diff.adjoint()), Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

std::vector<Eigen::VectorXcd> dark_state_projectors(int L) {
  guard_liouvillian_size(L);
  const std::size_t d = dimension(L);
  std::vector<VectorXcd> out;
  out.reserve(d);
  for (std::size_t a = 0; a < d; ++a) {
    VectorXcd v = VectorXcd::Zero(static_cast<Eigen::Index>(d * d));
    v(static_cast<Eigen::Index>(a + d * a)) = 1.0;
    out.push_back(std::move(v));
  }
  return out;
}

Eigen::MatrixXd sw_effective_liouvillian(double hx, double gamma_d, int L) {
  if (!(gamma_d > 0.0)) throw DomainError("effective Zeno generator needs gamma_d > 0");
  guard_liouvillian_size(L);
  const std::size_t d = dimension(L);
  const double rate = 4.0 * hx * hx / gamma_d;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t s = 0; s < d; ++s) {
    g(s, s) = -rate * L;
    for (int i = 0; i < L; ++i) g(s ^ (std::size_t{1} << (L - 1 - i)), s) += rate;
  }
  return g;
}

double generator_gap(const Eigen::MatrixXcd& generator) {
  Eigen::ComplexEigenSolver<MatrixXcd> es(generator, false);
  std::vector<double> re(es.eigenvalues().size());
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) re[k] = es.eigenvalues()(k).real();
  std::sort(re.begin(), re.end(), std::greater<>());
  if (re.size() < 2) return 0.0;
  return -re[1];
}

}  // namespace mcmps::oracle
