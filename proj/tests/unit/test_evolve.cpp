#include <doctest.h>

#include <cmath>

#include "mcmps/errors.hpp"
#include "mcmps/evolve.hpp"
#include "mcmps/linalg.hpp"
#include "mcmps/oracle.hpp"

using namespace mcmps;
namespace orc = mcmps::oracle;

namespace {

TruncationPolicy exact() {
  TruncationPolicy p;
  p.cutoff = 0.0;
  p.chi_max = 256;
  return p;
}

// || one Trotter step - exact propagator || on a fixed random state.
double local_error(const ModelParams& p, double dt, bool dissipative) {
  MpsState s = random_mps(p.L, 4, 21);
  const Eigen::VectorXcd v0 = orc::mps_to_dense(s);
  const TrotterPlan plan = TrotterPlan::build(p, dt, TimeKind::real, dissipative);
  if (dissipative)
    nonhermitian_step(s, plan, exact());
  else
    trotter_step(s, plan, exact());
  const Eigen::MatrixXcd h = dissipative ? orc::dense_effective_hamiltonian(p) : orc::dense_hamiltonian(p);
  Eigen::VectorXcd ref = expm(cplx(0.0, -dt) * h) * v0;
  ref.normalize();
  const Eigen::VectorXcd got = orc::mps_to_dense(s);
  // Compare up to the global phase convention: both are normalized, same phase origin.
  return (got - ref).norm();
}

}  // namespace

TEST_CASE("Trotter step converges to the exact propagator with third-order local error") {
  const ModelParams p{1.0, 0.8, 0.08, 0.0, 4};
  const double e1 = local_error(p, 0.02, false), e2 = local_error(p, 0.01, false);
  CHECK(e1 < 1e-4);
  CHECK(e1 / e2 == doctest::Approx(8.0).epsilon(0.1));
}

TEST_CASE("non-Hermitian step matches exp(-i H_eff dt) and its error ratio") {
  const ModelParams p{1.0, 0.8, 0.08, 1.0, 4};
  const double e1 = local_error(p, 0.02, true), e2 = local_error(p, 0.01, true);
  CHECK(e1 < 1e-4);
  CHECK(e1 / e2 == doctest::Approx(8.0).epsilon(0.1));
}

TEST_CASE("unitary steps preserve the norm and return the center to site 0") {
  MpsState s = random_mps(8, 4, 2);
  const TrotterPlan plan = TrotterPlan::build({1.0, 0.8, 0.08, 0.0, 8}, 0.05, TimeKind::real, false);
  for (int k = 0; k < 10; ++k) {
    const StepReport r = trotter_step(s, plan, TruncationPolicy{});
    CHECK(std::abs(r.norm_before - 1.0) < 1e-6);
  }
  CHECK(s.center() == 0);
  CHECK(s.norm() == doctest::Approx(1.0).epsilon(1e-12));
  s.check_invariants();
}

TEST_CASE("plan construction rules") {
  CHECK_THROWS_AS(TrotterPlan::build({1.0, 0.8, 0.08, 1.0, 4}, 0.01, TimeKind::imaginary, true), ConfigError);
  const TrotterPlan plan = TrotterPlan::build({1.0, 0.8, 0.08, 0.0, 5}, 0.01, TimeKind::real, false);
  CHECK(plan.gates_forward.size() == 4);
  CHECK(plan.gates_backward.size() == 4);
  for (const auto& g : plan.gates_forward) CHECK((g * g.adjoint() - Mat4::Identity()).norm() < 1e-13);
  MpsState s = random_mps(5, 2, 1);
  CHECK_THROWS(nonhermitian_step(s, plan, TruncationPolicy{}));
}

TEST_CASE("imaginary-time ground state matches Lanczos") {
  const ModelParams p{1.0, 0.8, 0.08, 0.0, 6};
  GroundStateOptions opt;
  opt.seed = 4;
  const GroundStateResult gs = imaginary_time_ground_state(p, opt);
  const orc::GroundState ref = orc::ground_state(p);
  CHECK(std::abs(gs.energy - ref.energy) < 1e-6);
  CHECK(std::abs(std::abs(orc::mps_to_dense(gs.state).dot(ref.vector)) - 1.0) < 1e-6);
  CHECK(gs.converged);
}

TEST_CASE("classical limit gives the polarized product state") {
  const int L = 10;
  const ModelParams p{1.0, 0.0, 0.08, 0.0, L};
  GroundStateOptions opt;
  const GroundStateResult gs = imaginary_time_ground_state(p, opt);
  CHECK(gs.energy == doctest::Approx(-(L - 1) - 0.08 * L).epsilon(1e-10));
  for (int i = 0; i < L; ++i) CHECK(std::abs(expect_local(gs.state, pauli::z(), i).real() - 1.0) < 1e-6);
}

TEST_CASE("ground state is deterministic for a fixed seed") {
  const ModelParams p{1.0, 0.8, 0.08, 0.0, 8};
  GroundStateOptions opt;
  opt.tau_max = 1.0;
  opt.seed = 12;
  const auto a = imaginary_time_ground_state(p, opt), b = imaginary_time_ground_state(p, opt);
  CHECK(a.energy == b.energy);
  for (int i = 0; i < 8; ++i)
    for (int s = 0; s < 2; ++s) CHECK(a.state.tensor(i)[s] == b.state.tensor(i)[s]);
}
