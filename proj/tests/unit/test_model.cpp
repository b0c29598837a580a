#include <doctest.h>

#include <cmath>
#include <random>

#include <unsupported/Eigen/KroneckerProduct>

#include "mcmps/errors.hpp"
#include "mcmps/model.hpp"
#include "mcmps/oracle.hpp"

using namespace mcmps;

namespace {

Eigen::MatrixXcd embed_two_site(const Mat4& m, int site, int L) {
  const Eigen::MatrixXcd left = Eigen::MatrixXcd::Identity(1 << site, 1 << site);
  const Eigen::MatrixXcd right = Eigen::MatrixXcd::Identity(1 << (L - site - 2), 1 << (L - site - 2));
  return Eigen::kroneckerProduct(Eigen::kroneckerProduct(left, Eigen::MatrixXcd(m)).eval(), right);
}

Eigen::MatrixXcd block_sum(const ModelParams& p, bool diss) {
  const int d = 1 << p.L;
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(d, d);
  for (const auto& b : build_effective_blocks(p, diss)) h += embed_two_site(b.matrix, b.site, p.L);
  return h;
}

}  // namespace

TEST_CASE("jump operator is the up projector") {
  const Mat2 n = jump_operator();
  const Eigen::Vector2cd up(1, 0), down(0, 1);
  CHECK((n * up - up).norm() == 0.0);
  CHECK((n * down).norm() == 0.0);
  CHECK((n * n - n).norm() == 0.0);
}

TEST_CASE("two-site Ising block without fields") {
  const auto blocks = build_effective_blocks({1.0, 0.0, 0.0, 0.0, 2}, false);
  REQUIRE(blocks.size() == 1);
  Eigen::SelfAdjointEigenSolver<Mat4> es(blocks[0].matrix);
  CHECK(es.eigenvalues()(0) == doctest::Approx(-1.0));
  CHECK(es.eigenvalues()(1) == doctest::Approx(-1.0));
  CHECK(es.eigenvalues()(2) == doctest::Approx(1.0));
  CHECK(es.eigenvalues()(3) == doctest::Approx(1.0));
}

TEST_CASE("block sum reproduces the dense Hamiltonian") {
  const ModelParams p{1.0, 0.8, 0.08, 0.0, 3};
  CHECK((block_sum(p, false) - oracle::dense_hamiltonian(p)).cwiseAbs().maxCoeff() < 1e-12);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int L = 2; L <= 8; ++L) {
    const ModelParams q{0.5 + std::abs(u(rng)), u(rng), u(rng), 0.0, L};
    CHECK((block_sum(q, false) - oracle::dense_hamiltonian(q)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("anti-Hermitian part of the dissipative block sum") {
  for (int L = 2; L <= 5; ++L) {
    const ModelParams p{1.0, 0.8, 0.08, 1.0, L};
    const Eigen::MatrixXcd h = block_sum(p, true);
    const Eigen::MatrixXcd anti = 0.5 * (h - h.adjoint());
    Eigen::MatrixXcd expected = Eigen::MatrixXcd::Zero(h.rows(), h.cols());
    for (int i = 0; i < L; ++i)
      expected += cplx(0.0, -0.5) * Eigen::MatrixXcd(oracle::site_operator(jump_operator(), i, L));
    CHECK((anti - expected).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((h - oracle::dense_effective_hamiltonian(p)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("blocks are Hermitian without dissipation") {
  for (const auto& b : build_effective_blocks({1.0, 0.3, -0.2, 0.0, 6}, false))
    CHECK((b.matrix - b.matrix.adjoint()).norm() < 1e-15);
}

TEST_CASE("block construction rejects invalid parameters") {
  CHECK_THROWS_AS(build_effective_blocks({1.0, 0.8, 0.08, 0.0, 1}, false), ConfigError);
  CHECK_THROWS_AS(build_effective_blocks({-1.0, 0.8, 0.08, 0.0, 4}, false), ConfigError);
  CHECK_THROWS_AS(build_effective_blocks({1.0, 0.8, 0.08, -0.1, 4}, false), ConfigError);
}

TEST_CASE("bubble energetics") {
  CHECK(bubble_energy(0.7, 1.0, 0.08, 0.9) == doctest::Approx(1.4));
  CHECK(bubble_energy(1.0, 2.0, 0.1, 0.5) == doctest::Approx(1.9));
  const double M = equilibrium_magnetization(0.8);
  CHECK(bubble_energy(1.0, 1.0 + 1.0 / (0.08 * M), 0.08, M) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(resonant_bubble_size(0.0, 0.08, M) == 1.0);
  CHECK(resonant_bubble_size(1.0, 0.08, 0.8801117367933934) == doctest::Approx(15.202742080843741));
  CHECK_THROWS_AS(bubble_energy(1.0, 0.5, 0.08, M), DomainError);
  CHECK_THROWS_AS(resonant_bubble_size(1.0, 0.0, M), DomainError);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int k = 0; k < 50; ++k) {
    const double m = u(rng), hz = u(rng), mag = u(rng);
    CHECK(std::abs(bubble_energy(m, resonant_bubble_size(m, hz, mag), hz, mag)) < 1e-10);
  }
}

TEST_CASE("closed-system decay rate") {
  CHECK(fvd_rate_closed(0.08, 0.88, 1.0) == doctest::Approx(9.157965404919039e-08).epsilon(1e-12));
  CHECK(fvd_rate_closed(1e-3, 0.88, 1.0) < 1e-300);
  const double r1 = fvd_rate_closed(0.08, 0.88, 1.0), r2 = fvd_rate_closed(0.08, 0.88, 2.0);
  CHECK(r2 / r1 == doctest::Approx(std::exp(-1.0 / 0.08)).epsilon(1e-12));
  CHECK_THROWS_AS(fvd_rate_closed(0.0, 0.88, 1.0), DomainError);
  CHECK_THROWS_AS(fvd_rate_closed(-0.08, 0.88, 1.0), DomainError);
}

TEST_CASE("Zeno rate and equilibrium magnetization") {
  CHECK(zeno_rate(0.8, 10.0) == doctest::Approx(0.512));
  CHECK(zeno_rate(0.0, 3.0) == 0.0);
  // at the crossover gamma_d = 8 hx^2 / J the Zeno rate equals J
  CHECK(zeno_rate(0.8, 5.12) == doctest::Approx(1.0));
  CHECK_THROWS_AS(zeno_rate(0.8, 0.0), DomainError);
  CHECK(equilibrium_magnetization(0.0) == 1.0);
  CHECK(equilibrium_magnetization(0.8) == doctest::Approx(0.8801117367933934).epsilon(1e-14));
  CHECK(equilibrium_magnetization(1.0 - 1e-12) < 0.05);
  CHECK_THROWS_AS(equilibrium_magnetization(1.0), DomainError);
}
