#include <doctest.h>

#include <cmath>
#include <random>

#include "mcmps/errors.hpp"
#include "mcmps/linalg.hpp"
#include "mcmps/mps.hpp"
#include "mcmps/oracle.hpp"

using namespace mcmps;
namespace orc = mcmps::oracle;

namespace {

Eigen::VectorXcd dense_apply_gate(const Eigen::VectorXcd& v, const Mat4& gate, int site, int L) {
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(v.size());
  const int shift_left = L - 1 - site, shift_right = L - 2 - site;
  for (Eigen::Index b = 0; b < v.size(); ++b) {
    const int sl = (b >> shift_left) & 1, sr = (b >> shift_right) & 1;
    const Eigen::Index rest = b & ~((Eigen::Index{1} << shift_left) | (Eigen::Index{1} << shift_right));
    for (int tl = 0; tl < 2; ++tl)
      for (int tr = 0; tr < 2; ++tr) {
        const Eigen::Index target = rest | (Eigen::Index{tl} << shift_left) | (Eigen::Index{tr} << shift_right);
        out(target) += gate(2 * tl + tr, 2 * sl + sr) * v(b);
      }
  }
  return out;
}

Mat4 random_unitary(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Mat4 m;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) m(i, j) = cplx(g(rng), g(rng));
  Eigen::HouseholderQR<Mat4> qr(m);
  return qr.householderQ();
}

TruncationPolicy exact() {
  TruncationPolicy p;
  p.cutoff = 0.0;
  p.chi_max = 1 << 10;
  return p;
}

}  // namespace

TEST_CASE("random_mps basics") {
  const MpsState a = random_mps(2, 1, 5);
  CHECK(a.norm() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(a.max_bond_dim() == 1);

  const MpsState b = random_mps(10, 4, 42), c = random_mps(10, 4, 42);
  for (int i = 0; i < 10; ++i)
    for (int s = 0; s < 2; ++s) CHECK(b.tensor(i)[s] == c.tensor(i)[s]);
  CHECK(b.max_bond_dim() <= 4);
  CHECK(b.center() == 0);
  b.check_invariants();

  const Eigen::VectorXcd v = orc::mps_to_dense(b);
  CHECK(std::abs(v.norm() - b.norm()) < 1e-12);
  CHECK(std::abs(v.squaredNorm() - overlap(b, b).real()) < 1e-12);
  const MpsState d = random_mps(10, 4, 43);
  CHECK(std::abs(orc::mps_to_dense(d).dot(v) - overlap(d, b)) < 1e-12);
}

TEST_CASE("mps_to_dense of product and basis states") {
  const MpsState s = MpsState::basis_state({0, 1, 1, 0});
  const Eigen::VectorXcd v = orc::mps_to_dense(s);
  CHECK(std::abs(v(0b0110) - 1.0) < 1e-15);
  CHECK(std::abs(v.norm() - 1.0) < 1e-15);
}

TEST_CASE("identity gate leaves the state unchanged") {
  MpsState s = random_mps(6, 4, 9);
  const MpsState ref = s;
  apply_two_site_gate(s, Mat4::Identity(), 0, exact());
  apply_two_site_gate(s, Mat4::Identity(), 1, exact());
  CHECK(std::abs(std::abs(overlap(ref, s)) - 1.0) < 1e-12);
  s.check_invariants();
}

TEST_CASE("Bell pair from an entangling gate") {
  MpsState s = MpsState::basis_state({0, 0});
  s.canonicalize(0);
  Mat4 cnot = Mat4::Zero();
  cnot(0, 0) = cnot(1, 1) = cnot(2, 3) = cnot(3, 2) = 1.0;
  const Mat2 h = (pauli::x() + pauli::z()) / std::sqrt(2.0);
  const Mat4 gate = cnot * kron(h, pauli::identity());
  TruncationPolicy p = exact();
  p.chi_max = 2;
  apply_two_site_gate(s, gate, 0, p);
  CHECK(entanglement_entropy(s, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  const cplx zz = expect_two_point(s, pauli::z(), 0, pauli::z(), 1);
  const cplx z0 = expect_local(s, pauli::z(), 0), z1 = expect_local(s, pauli::z(), 1);
  CHECK(std::abs(zz - z0 * z1 - 1.0) < 1e-12);
}

TEST_CASE("random gates match the dense oracle") {
  const int L = 6;
  MpsState s = random_mps(L, 4, 77);
  Eigen::VectorXcd v = orc::mps_to_dense(s);
  for (int i = 0; i + 1 < L; ++i) {
    const Mat4 g = random_unitary(1000 + i);
    apply_two_site_gate(s, g, i, exact());
    v = dense_apply_gate(v, g, i, L);
  }
  for (int i = L - 2; i >= 0; --i) {
    const Mat4 g = random_unitary(2000 + i);
    apply_two_site_gate(s, g, i, exact());
    v = dense_apply_gate(v, g, i, L);
  }
  CHECK((orc::mps_to_dense(s) - v).norm() < 1e-10);
  s.check_invariants();
  CHECK(s.center() == 0);
}

TEST_CASE("gate on a state without an adjacent center is rejected") {
  MpsState s = random_mps(6, 2, 1);
  CHECK_THROWS_AS(apply_two_site_gate(s, Mat4::Identity(), 3, exact()), InvariantError);
}

TEST_CASE("truncation respects chi_max and logs the discarded weight") {
  const int L = 8;
  MpsState s = random_mps(L, 16, 3);
  TruncationPolicy p;
  p.cutoff = 0.0;
  p.chi_max = 3;
  double total = 0.0;
  for (int i = 0; i + 1 < L; ++i) total += apply_two_site_gate(s, random_unitary(i), i, p);
  CHECK(s.max_bond_dim() <= 3);
  CHECK(total > 0.0);
  CHECK(std::abs(s.truncation_log().cumulative - total) < 1e-15);
}

TEST_CASE("local operators") {
  MpsState s = MpsState::basis_state({1, 1, 1, 1, 1});
  s.canonicalize(0);
  MpsState t = s;
  apply_local_operator(t, Mat2::Identity(), 2);
  CHECK(std::abs(overlap(s, t) - 1.0) < 1e-15);

  MpsState z = s;
  apply_local_operator(z, jump_operator(), 1);
  CHECK(z.norm() < 1e-15);

  MpsState f = s;
  CHECK(expect_local(f, pauli::z(), 3).real() == doctest::Approx(-1.0));
  apply_local_operator(f, pauli::x(), 3);
  f.canonicalize(0);
  f.normalize();
  CHECK(expect_local(f, pauli::z(), 3).real() == doctest::Approx(1.0));

  CHECK(expect_local(MpsState::basis_state({0, 0}), jump_operator(), 0).real() == doctest::Approx(1.0));
}

TEST_CASE("expectation values agree with the dense oracle for L <= 8") {
  const Mat2 ops[] = {pauli::x(), pauli::y(), pauli::z(), jump_operator()};
  for (int L = 2; L <= 8; ++L) {
    MpsState s = random_mps(L, 6, 500 + L);
    const Eigen::VectorXcd v = orc::mps_to_dense(s);
    for (const Mat2& op : ops) {
      const auto all = expect_local_all(s, op);
      for (int i = 0; i < L; ++i) {
        const cplx ref = orc::dense_expect_local(v, op, i, L);
        CHECK(std::abs(expect_local(s, op, i) - ref) < 1e-10);
        CHECK(std::abs(all[i] - ref) < 1e-10);
      }
    }
    const Eigen::MatrixXcd band = expect_two_point_band(s, pauli::z(), pauli::z(), L - 1);
    for (int i = 0; i < L; ++i)
      for (int j = i + 1; j < L; ++j) {
        const cplx ref = orc::dense_expect_two_point(v, pauli::z(), i, pauli::x(), j, L);
        CHECK(std::abs(expect_two_point(s, pauli::z(), i, pauli::x(), j) - ref) < 1e-10);
        const cplx ref_zz = orc::dense_expect_two_point(v, pauli::z(), i, pauli::z(), j, L);
        CHECK(std::abs(band(i, j) - ref_zz) < 1e-10);
      }
    for (int bond = 1; bond < L; ++bond) {
      MpsState c = s;
      c.canonicalize(bond);
      const double ref = orc::von_neumann_entropy(orc::reduced_density_matrix(v, bond, L));
      CHECK(std::abs(entanglement_entropy(c, bond) - ref) < 1e-10);
    }
  }
}

TEST_CASE("expectations survive a center away from site 0") {
  MpsState s = random_mps(7, 5, 8);
  const Eigen::VectorXcd v = orc::mps_to_dense(s);
  s.canonicalize(4);
  for (int i = 0; i < 7; ++i)
    CHECK(std::abs(expect_local(s, pauli::x(), i) - orc::dense_expect_local(v, pauli::x(), i, 7)) < 1e-10);
  CHECK(std::abs(expect_bond(s, kron(pauli::z(), pauli::z()), 2) -
                 orc::dense_expect_two_point(v, pauli::z(), 2, pauli::z(), 3, 7)) < 1e-10);
}

TEST_CASE("two-point and entropy error paths") {
  MpsState s = random_mps(4, 2, 2);
  CHECK_THROWS_AS(expect_two_point(s, pauli::z(), 2, pauli::z(), 2), DomainError);
  s.scale(2.0);
  CHECK_THROWS_AS(entanglement_entropy(s, 1), DomainError);
}

TEST_CASE("entropy of a product state vanishes") {
  MpsState s = MpsState::basis_state({0, 1, 0, 1});
  s.canonicalize(2);
  CHECK(entanglement_entropy(s, 2) == doctest::Approx(0.0));
}
