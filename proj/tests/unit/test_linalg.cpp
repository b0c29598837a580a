#include <doctest.h>

#include <cmath>
#include <random>

#include "mcmps/linalg.hpp"
#include "mcmps/mps.hpp"

using namespace mcmps;

namespace {

Eigen::MatrixXcd random_matrix(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::MatrixXcd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = cplx(g(rng), g(rng));
  return m;
}

}  // namespace

TEST_CASE("expm of a Pauli rotation") {
  const double theta = 0.37;
  const Eigen::MatrixXcd a = cplx(0.0, -theta) * Eigen::MatrixXcd(pauli::x());
  const Eigen::MatrixXcd expected =
      std::cos(theta) * Eigen::MatrixXcd(pauli::identity()) - cplx(0.0, std::sin(theta)) * Eigen::MatrixXcd(pauli::x());
  CHECK((expm(a) - expected).norm() < 1e-14);
  CHECK((expm_taylor(a) - expected).norm() < 1e-14);
}

TEST_CASE("expm routes agree on random and defective matrices") {
  const Eigen::MatrixXcd a = 0.3 * random_matrix(4, 4, 11);
  CHECK((expm(a) - expm_taylor(a)).norm() < 1e-12);
  Eigen::MatrixXcd jordan = Eigen::MatrixXcd::Zero(2, 2);
  jordan(0, 0) = jordan(1, 1) = 0.5;
  jordan(0, 1) = 1.0;
  Eigen::MatrixXcd expected(2, 2);
  expected << std::exp(0.5), std::exp(0.5), 0.0, std::exp(0.5);
  CHECK((expm(jordan) - expected).norm() < 1e-12);
}

TEST_CASE("truncation rank rules") {
  Eigen::VectorXd s(4);
  s << 1.0, 0.1, 1e-5, 1e-9;
  TruncationPolicy p;
  p.cutoff = 1e-8;
  p.chi_max = 128;
  CHECK(truncation_rank(s, p) == 3);
  p.cutoff = 0.0;
  CHECK(truncation_rank(s, p) == 4);
  p.chi_max = 2;
  CHECK(truncation_rank(s, p) == 2);
  p.chi_max = 128;
  p.cutoff = 0.5;
  CHECK(truncation_rank(s, p) == 1);
  Eigen::VectorXd noise(3);
  noise << 1.0, 1e-17, 0.0;
  p.cutoff = 0.0;
  CHECK(truncation_rank(noise, p) == 1);
}

TEST_CASE("discarded weight bookkeeping identity") {
  for (int seed = 0; seed < 10; ++seed) {
    const Eigen::MatrixXcd m = random_matrix(12, 20, 100 + seed);
    TruncationPolicy p;
    p.cutoff = 0.0;
    p.chi_max = 5;
    const TruncatedSvd svd = truncated_svd(m, p);
    const Eigen::MatrixXcd approx = svd.u * svd.s.asDiagonal() * svd.vh;
    const double rel_error = (m - approx).squaredNorm() / m.squaredNorm();
    CHECK(std::abs(rel_error - svd.discarded) < 1e-12);
    const double kept = svd.s.squaredNorm() / m.squaredNorm();
    CHECK(std::abs(kept + svd.discarded - 1.0) < 1e-12);
    CHECK((svd.u.adjoint() * svd.u - Eigen::MatrixXcd::Identity(5, 5)).norm() < 1e-12);
    CHECK((svd.vh * svd.vh.adjoint() - Eigen::MatrixXcd::Identity(5, 5)).norm() < 1e-12);
  }
}

TEST_CASE("large matrices use the same truncation semantics") {
  const Eigen::MatrixXcd m = random_matrix(40, 60, 5);
  TruncationPolicy p;
  p.cutoff = 0.0;
  p.chi_max = 40;
  const TruncatedSvd svd = truncated_svd(m, p);
  CHECK(svd.s.size() == 40);
  CHECK((svd.u * svd.s.asDiagonal() * svd.vh - m).norm() < 1e-10);
  CHECK(svd.discarded == 0.0);
}

TEST_CASE("untruncated SVD reconstructs square, tall and wide matrices at bond-dimension sizes") {
  TruncationPolicy p;
  p.cutoff = 0.0;
  p.chi_max = 1000;
  for (auto [rows, cols] : {std::pair{256, 256}, {200, 114}, {114, 200}, {256, 128}, {64, 64}}) {
    const Eigen::MatrixXcd m = random_matrix(rows, cols, rows + cols);
    const TruncatedSvd svd = truncated_svd(m, p);
    const Eigen::Index k = svd.s.size();
    CHECK((svd.u * svd.s.asDiagonal() * svd.vh - m).norm() / m.norm() < 1e-12);
    CHECK((svd.u.adjoint() * svd.u - Eigen::MatrixXcd::Identity(k, k)).norm() < 1e-10);
    CHECK((svd.vh * svd.vh.adjoint() - Eigen::MatrixXcd::Identity(k, k)).norm() < 1e-10);
  }
}
