#include "mcmps/mps.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "mcmps/errors.hpp"
#include "mcmps/linalg.hpp"

namespace mcmps {

using Eigen::MatrixXcd;

void TruncationPolicy::validate() const {
  if (!(cutoff >= 0.0)) throw ConfigError("truncation cutoff must be >= 0");
  if (chi_max < 1) throw ConfigError("chi_max must be >= 1");
}

void TruncationLog::close_sweep() {
  last_sweep = current_sweep;
  max_sweep = std::max(max_sweep, current_sweep);
  current_sweep = 0.0;
  ++sweeps;
}

MpsState::MpsState(std::vector<SiteTensor> tensors) : sites_(std::move(tensors)) {
  left_ok_ = 0;
  right_ok_ = length();
  check_invariants();
}

MpsState MpsState::product(const std::vector<Eigen::Vector2cd>& local_states) {
  std::vector<SiteTensor> t(local_states.size());
  for (std::size_t i = 0; i < local_states.size(); ++i) {
    t[i][0] = MatrixXcd::Constant(1, 1, local_states[i](0));
    t[i][1] = MatrixXcd::Constant(1, 1, local_states[i](1));
  }
  return MpsState(std::move(t));
}

MpsState MpsState::basis_state(const std::vector<int>& spins) {
  std::vector<Eigen::Vector2cd> local;
  local.reserve(spins.size());
  for (int s : spins) {
    if (s != 0 && s != 1) throw ConfigError("basis spins must be 0 (up) or 1 (down)");
    local.push_back(s == 0 ? Eigen::Vector2cd(1, 0) : Eigen::Vector2cd(0, 1));
  }
  MpsState st = product(local);
  // Normalized basis tensors are isometries on both sides.
  st.set_canonical_range(0, 1);
  return st;
}

MpsState MpsState::from_parts(std::vector<SiteTensor> tensors, int left_ok, int right_ok) {
  MpsState st(std::move(tensors));
  st.set_canonical_range(left_ok, right_ok);
  st.check_invariants();
  return st;
}

int MpsState::bond_dim(int bond) const {
  if (bond < 0 || bond > length()) throw std::out_of_range("bond index");
  if (bond == length()) return static_cast<int>(sites_.back()[0].cols());
  return static_cast<int>(sites_[bond][0].rows());
}

std::vector<int> MpsState::bond_dims() const {
  std::vector<int> d(length() + 1);
  for (int k = 0; k <= length(); ++k) d[k] = bond_dim(k);
  return d;
}

int MpsState::max_bond_dim() const {
  const auto d = bond_dims();
  return *std::max_element(d.begin(), d.end());
}

std::optional<int> MpsState::center() const {
  if (right_ok_ == left_ok_ + 1) return left_ok_;
  return std::nullopt;
}

MpsState::SiteTensor& MpsState::mutable_tensor(int site) {
  left_ok_ = std::min(left_ok_, site);
  right_ok_ = std::max(right_ok_, site + 1);
  return sites_.at(site);
}

void MpsState::set_canonical_range(int left_ok, int right_ok) {
  if (left_ok < 0 || right_ok > length() || left_ok >= right_ok)
    throw InvariantError("invalid canonical range");
  left_ok_ = left_ok;
  right_ok_ = right_ok;
}

void MpsState::left_orthonormalize(int site) {
  SiteTensor& a = sites_[site];
  const Eigen::Index dl = a[0].rows(), dr = a[0].cols();
  MatrixXcd m(2 * dl, dr);
  m << a[0], a[1];
  Eigen::HouseholderQR<MatrixXcd> qr(m);
  const Eigen::Index k = std::min(2 * dl, dr);
  const MatrixXcd q = qr.householderQ() * MatrixXcd::Identity(2 * dl, k);
  const MatrixXcd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  a[0] = q.topRows(dl);
  a[1] = q.bottomRows(dl);
  if (site + 1 < length()) {
    SiteTensor& b = sites_[site + 1];
    b[0] = r * b[0];
    b[1] = r * b[1];
  } else {
    // Rightmost site: fold the remaining 1x1 factor back in.
    a[0] *= r(0, 0);
    a[1] *= r(0, 0);
  }
}

void MpsState::right_orthonormalize(int site) {
  SiteTensor& a = sites_[site];
  const Eigen::Index dl = a[0].rows(), dr = a[0].cols();
  MatrixXcd m(dl, 2 * dr);
  m << a[0], a[1];
  const MatrixXcd mh = m.adjoint();
  Eigen::HouseholderQR<MatrixXcd> qr(mh);
  const Eigen::Index k = std::min(dl, 2 * dr);
  const MatrixXcd q = qr.householderQ() * MatrixXcd::Identity(2 * dr, k);
  const MatrixXcd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  const MatrixXcd qh = q.adjoint();
  a[0] = qh.leftCols(dr);
  a[1] = qh.rightCols(dr);
  const MatrixXcd rh = r.adjoint();
  if (site > 0) {
    SiteTensor& b = sites_[site - 1];
    b[0] = b[0] * rh;
    b[1] = b[1] * rh;
  } else {
    a[0] *= rh(0, 0);
    a[1] *= rh(0, 0);
  }
}

void MpsState::canonicalize(int site) {
  if (site < 0 || site >= length()) throw std::out_of_range("canonicalize: site");
  if (center() == site) return;
  for (int i = left_ok_; i < site; ++i) left_orthonormalize(i);
  for (int i = right_ok_ - 1; i > site; --i) right_orthonormalize(i);
  left_ok_ = site;
  right_ok_ = site + 1;
}

namespace {

// E' = sum_{s,s'} O(s,s') A_s^dag E A_s'   (E indexed [bra, ket]).
MatrixXcd transfer_left(const MatrixXcd& e, const MpsState::SiteTensor& a) {
  return a[0].adjoint() * e * a[0] + a[1].adjoint() * e * a[1];
}

MatrixXcd transfer_left(const MatrixXcd& e, const MpsState::SiteTensor& a, const Mat2& op) {
  MatrixXcd out = MatrixXcd::Zero(a[0].cols(), a[0].cols());
  for (int s = 0; s < 2; ++s) {
    MatrixXcd ket = op(s, 0) * a[0] + op(s, 1) * a[1];
    out.noalias() += a[s].adjoint() * e * ket;
  }
  return out;
}

// R' = sum_{s,s'} O(s,s') A_s' R A_s^dag   (R indexed [ket, bra]).
MatrixXcd transfer_right(const MatrixXcd& r, const MpsState::SiteTensor& a) {
  return a[0] * r * a[0].adjoint() + a[1] * r * a[1].adjoint();
}

MatrixXcd identity_env(Eigen::Index d) { return MatrixXcd::Identity(d, d); }

// Left environment at `bond` (contraction of sites [0, bond)).
MatrixXcd left_env(const MpsState& st, int bond) {
  const int start = std::min(bond, st.left_ok());
  MatrixXcd e = identity_env(st.bond_dim(start));
  for (int i = start; i < bond; ++i) e = transfer_left(e, st.tensor(i));
  return e;
}

// Right environment at `bond` (contraction of sites [bond, L)).
MatrixXcd right_env(const MpsState& st, int bond) {
  const int start = std::max(bond, st.right_ok());
  MatrixXcd r = identity_env(st.bond_dim(start));
  for (int i = start - 1; i >= bond; --i) r = transfer_right(r, st.tensor(i));
  return r;
}

// All right environments R[k] for k in [0, L].
std::vector<MatrixXcd> right_envs(const MpsState& st) {
  const int L = st.length();
  std::vector<MatrixXcd> r(L + 1);
  const int start = st.right_ok();
  for (int k = L; k >= start; --k) r[k] = identity_env(st.bond_dim(k));
  for (int k = start - 1; k >= 0; --k) r[k] = transfer_right(r[k + 1], st.tensor(k));
  return r;
}

cplx trace_product(const MatrixXcd& e, const MatrixXcd& r) {
  // Tr(E R) without forming the product.
  return (e.array() * r.transpose().array()).sum();
}

void check_site(const MpsState& st, int site) {
  if (site < 0 || site >= st.length()) throw std::out_of_range("site index " + std::to_string(site));
}

}  // namespace

double MpsState::norm() const {
  if (auto c = center()) {
    const SiteTensor& a = sites_[*c];
    return std::sqrt(a[0].squaredNorm() + a[1].squaredNorm());
  }
  const MatrixXcd e = left_env(*this, length());
  return std::sqrt(std::max(0.0, e(0, 0).real()));
}

void MpsState::scale(cplx factor) {
  // Scaling the center (or any site when there is none) keeps isometries intact.
  const int site = center().value_or(0);
  sites_[site][0] *= factor;
  sites_[site][1] *= factor;
  if (!center()) {
    left_ok_ = std::min(left_ok_, site);
    right_ok_ = std::max(right_ok_, site + 1);
  }
}

void MpsState::normalize() {
  const double n = norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw NumericError("cannot normalize a state with norm " + std::to_string(n));
  scale(1.0 / n);
}

void MpsState::check_invariants(double tol) const {
  const int L = length();
  if (L < 1) throw InvariantError("empty MPS");
  if (sites_.front()[0].rows() != 1 || sites_.back()[0].cols() != 1)
    throw InvariantError("boundary bond dimensions must be 1");
  for (int i = 0; i < L; ++i) {
    if (sites_[i][0].rows() != sites_[i][1].rows() || sites_[i][0].cols() != sites_[i][1].cols())
      throw InvariantError("physical slices of site " + std::to_string(i) + " differ in shape");
    if (i + 1 < L && sites_[i][0].cols() != sites_[i + 1][0].rows())
      throw InvariantError("bond mismatch between sites " + std::to_string(i) + " and " + std::to_string(i + 1));
  }
  for (int i = 0; i < left_ok_; ++i) {
    const MatrixXcd g = transfer_left(identity_env(bond_dim(i)), sites_[i]);
    if ((g - identity_env(g.rows())).norm() > tol)
      throw InvariantError("site " + std::to_string(i) + " is not a left isometry");
  }
  for (int i = right_ok_; i < L; ++i) {
    const MatrixXcd g = transfer_right(identity_env(bond_dim(i + 1)), sites_[i]);
    if ((g - identity_env(g.rows())).norm() > tol)
      throw InvariantError("site " + std::to_string(i) + " is not a right isometry");
  }
}

MpsState random_mps(int L, int chi0, std::uint64_t seed) {
  if (L < 2) throw ConfigError("random_mps needs L >= 2");
  if (chi0 < 1) throw ConfigError("random_mps needs chi0 >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto dim = [&](int bond) {
    const int edge = std::min(bond, L - bond);
    const long cap = edge >= 30 ? (1L << 30) : (1L << edge);
    return static_cast<int>(std::min<long>(chi0, cap));
  };
  std::vector<MpsState::SiteTensor> t(L);
  for (int i = 0; i < L; ++i) {
    for (int s = 0; s < 2; ++s) {
      t[i][s].resize(dim(i), dim(i + 1));
      for (Eigen::Index a = 0; a < t[i][s].rows(); ++a)
        for (Eigen::Index b = 0; b < t[i][s].cols(); ++b) t[i][s](a, b) = cplx(gauss(rng), gauss(rng));
    }
  }
  MpsState st(std::move(t));
  st.canonicalize(0);
  st.normalize();
  return st;
}

double apply_two_site_gate(MpsState& state, const Mat4& gate, int site, const TruncationPolicy& policy) {
  const int L = state.length();
  if (site < 0 || site + 1 >= L) throw std::out_of_range("gate site " + std::to_string(site));
  const auto c = state.center();
  if (!c || (*c != site && *c != site + 1))
    throw InvariantError("two-site gate needs the orthogonality center at the gate");
  const bool move_right = (*c == site);

  const MpsState::SiteTensor& a = state.tensor(site);
  const MpsState::SiteTensor& b = state.tensor(site + 1);
  if (a[0].cols() != b[0].rows()) throw InvariantError("bond mismatch inside two-site gate");
  const Eigen::Index dl = a[0].rows(), dr = b[0].cols();

  std::array<MatrixXcd, 4> theta;
  for (int s1 = 0; s1 < 2; ++s1)
    for (int s2 = 0; s2 < 2; ++s2) theta[2 * s1 + s2] = a[s1] * b[s2];

  MatrixXcd m(2 * dl, 2 * dr);
  for (int t1 = 0; t1 < 2; ++t1)
    for (int t2 = 0; t2 < 2; ++t2) {
      auto block = m.block(t1 * dl, t2 * dr, dl, dr);
      block.setZero();
      for (int k = 0; k < 4; ++k) {
        const cplx g = gate(2 * t1 + t2, k);
        if (g != cplx(0.0)) block += g * theta[k];
      }
    }

  TruncatedSvd svd = truncated_svd(m, policy);
  if (policy.normalize_after) {
    const double n = svd.s.norm();
    if (n > 0.0) svd.s /= n;
  }

  MpsState::SiteTensor& na = state.mutable_tensor(site);
  MpsState::SiteTensor& nb = state.mutable_tensor(site + 1);
  if (move_right) {
    const MatrixXcd sv = svd.s.asDiagonal() * svd.vh;
    na[0] = svd.u.topRows(dl);
    na[1] = svd.u.bottomRows(dl);
    nb[0] = sv.leftCols(dr);
    nb[1] = sv.rightCols(dr);
    state.set_canonical_range(site + 1, site + 2);
  } else {
    const MatrixXcd us = svd.u * svd.s.asDiagonal();
    na[0] = us.topRows(dl);
    na[1] = us.bottomRows(dl);
    nb[0] = svd.vh.leftCols(dr);
    nb[1] = svd.vh.rightCols(dr);
    state.set_canonical_range(site, site + 1);
  }
  state.truncation_log().record(svd.discarded);
  return svd.discarded;
}

void apply_local_operator(MpsState& state, const Mat2& op, int site) {
  check_site(state, site);
  MpsState::SiteTensor& a = state.mutable_tensor(site);
  const MatrixXcd up = op(0, 0) * a[0] + op(0, 1) * a[1];
  const MatrixXcd down = op(1, 0) * a[0] + op(1, 1) * a[1];
  a[0] = up;
  a[1] = down;
}

cplx expect_local(const MpsState& state, const Mat2& op, int site) {
  check_site(state, site);
  const MatrixXcd e = transfer_left(left_env(state, site), state.tensor(site), op);
  return trace_product(e, right_env(state, site + 1));
}

std::vector<cplx> expect_local_all(const MpsState& state, const Mat2& op) {
  const int L = state.length();
  const std::vector<MatrixXcd> r = right_envs(state);
  std::vector<cplx> out(L);
  MatrixXcd e = left_env(state, 0);
  for (int i = 0; i < L; ++i) {
    out[i] = trace_product(transfer_left(e, state.tensor(i), op), r[i + 1]);
    if (i + 1 < L) e = (i + 1 <= state.left_ok()) ? identity_env(state.bond_dim(i + 1)) : transfer_left(e, state.tensor(i));
  }
  return out;
}

cplx expect_two_point(const MpsState& state, const Mat2& op_a, int i, const Mat2& op_b, int j) {
  check_site(state, i);
  check_site(state, j);
  if (i >= j) throw DomainError("expect_two_point needs i < j; use a single-site product operator for i == j");
  MatrixXcd e = transfer_left(left_env(state, i), state.tensor(i), op_a);
  for (int k = i + 1; k < j; ++k) e = transfer_left(e, state.tensor(k));
  e = transfer_left(e, state.tensor(j), op_b);
  return trace_product(e, right_env(state, j + 1));
}

Eigen::MatrixXcd expect_two_point_band(const MpsState& state, const Mat2& op_a, const Mat2& op_b,
                                       int max_separation) {
  const int L = state.length();
  const std::vector<MatrixXcd> r = right_envs(state);
  MatrixXcd out = MatrixXcd::Zero(L, L);
  MatrixXcd e = left_env(state, 0);
  for (int i = 0; i < L; ++i) {
    MatrixXcd ea = transfer_left(e, state.tensor(i), op_a);
    const int jmax = std::min(L - 1, i + max_separation);
    for (int j = i + 1; j <= jmax; ++j) {
      out(i, j) = trace_product(transfer_left(ea, state.tensor(j), op_b), r[j + 1]);
      if (j < jmax) ea = transfer_left(ea, state.tensor(j));
    }
    if (i + 1 < L) e = (i + 1 <= state.left_ok()) ? identity_env(state.bond_dim(i + 1)) : transfer_left(e, state.tensor(i));
  }
  return out;
}

namespace {

cplx bond_value(const MatrixXcd& e, const MpsState::SiteTensor& a, const MpsState::SiteTensor& b, const Mat4& op,
                const MatrixXcd& r) {
  std::array<MatrixXcd, 4> theta;
  for (int s1 = 0; s1 < 2; ++s1)
    for (int s2 = 0; s2 < 2; ++s2) theta[2 * s1 + s2] = a[s1] * b[s2];
  MatrixXcd x = MatrixXcd::Zero(b[0].cols(), b[0].cols());
  for (int t = 0; t < 4; ++t) {
    MatrixXcd ket = MatrixXcd::Zero(theta[0].rows(), theta[0].cols());
    for (int s = 0; s < 4; ++s)
      if (op(t, s) != cplx(0.0)) ket += op(t, s) * theta[s];
    x.noalias() += theta[t].adjoint() * e * ket;
  }
  return trace_product(x, r);
}

}  // namespace

cplx expect_bond(const MpsState& state, const Mat4& op, int site) {
  check_site(state, site);
  check_site(state, site + 1);
  return bond_value(left_env(state, site), state.tensor(site), state.tensor(site + 1), op,
                    right_env(state, site + 2));
}

std::vector<cplx> expect_bond_all(const MpsState& state, const std::vector<Mat4>& ops) {
  const int L = state.length();
  if (static_cast<int>(ops.size()) != L - 1) throw DomainError("expect_bond_all needs one operator per bond");
  const std::vector<MatrixXcd> r = right_envs(state);
  std::vector<cplx> out(L - 1);
  MatrixXcd e = left_env(state, 0);
  for (int i = 0; i + 1 < L; ++i) {
    out[i] = bond_value(e, state.tensor(i), state.tensor(i + 1), ops[i], r[i + 2]);
    e = (i + 1 <= state.left_ok()) ? identity_env(state.bond_dim(i + 1)) : transfer_left(e, state.tensor(i));
  }
  return out;
}

Eigen::VectorXd schmidt_values(const MpsState& state, int bond) {
  const int L = state.length();
  if (bond < 1 || bond >= L) throw std::out_of_range("cut bond must lie in [1, L-1]");
  const auto c = state.center();
  if (!c || (*c != bond - 1 && *c != bond))
    throw InvariantError("Schmidt values need the orthogonality center next to the cut");
  const MpsState::SiteTensor& a = state.tensor(*c);
  MatrixXcd m;
  if (*c == bond - 1) {
    m.resize(2 * a[0].rows(), a[0].cols());
    m << a[0], a[1];
  } else {
    m.resize(a[0].rows(), 2 * a[0].cols());
    m << a[0], a[1];
  }
  if (std::min(m.rows(), m.cols()) <= 16) return Eigen::JacobiSVD<MatrixXcd>(m).singularValues();
  return Eigen::BDCSVD<MatrixXcd>(m).singularValues();
}

double entanglement_entropy(const MpsState& state, int bond) {
  const Eigen::VectorXd s = schmidt_values(state, bond);
  const double weight = s.squaredNorm();
  if (std::abs(weight - 1.0) > 1e-8) throw DomainError("entanglement entropy needs a normalized state");
  double entropy = 0.0;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    const double p = s(k) * s(k);
    if (p > 0.0) entropy -= p * std::log(p);
  }
  return std::max(0.0, entropy);
}

cplx overlap(const MpsState& bra, const MpsState& ket) {
  if (bra.length() != ket.length()) throw InvariantError("overlap of states with different lengths");
  MatrixXcd e = MatrixXcd::Ones(1, 1);
  for (int i = 0; i < bra.length(); ++i) {
    const auto& a = bra.tensor(i);
    const auto& b = ket.tensor(i);
    e = a[0].adjoint() * e * b[0] + a[1].adjoint() * e * b[1];
  }
  return e(0, 0);
}

}  // namespace mcmps
