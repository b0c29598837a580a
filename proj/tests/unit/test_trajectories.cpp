#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "mcmps/errors.hpp"
#include "mcmps/trajectories.hpp"

using namespace mcmps;

namespace {

TrajectoryConfig small_config(double gamma_d, double t_max = 1.0) {
  TrajectoryConfig c;
  c.params = {1.0, 0.8, -0.08, gamma_d, 6};
  c.dt = 0.01;
  c.t_max = t_max;
  c.output_dt = 0.1;
  return c;
}

MpsState polarized(int L) {
  MpsState s = MpsState::basis_state(std::vector<int>(L, 0));
  s.canonicalize(0);
  return s;
}

bool same_record(const TrajectoryRecord& a, const TrajectoryRecord& b) {
  return a.seed == b.seed && a.events == b.events && a.grid == b.grid && a.series == b.series &&
         a.final_state_checksum == b.final_state_checksum;
}

}  // namespace

TEST_CASE("seed derivation") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t k = 0; k < 1000; ++k) seen.insert(trajectory_seed(42, k));
  CHECK(seen.size() == 1000);
  CHECK(trajectory_seed(42, 7) == trajectory_seed(42, 7));
  CHECK(trajectory_seed(42, 7) != trajectory_seed(43, 7));
  CHECK(retry_seed(5) != 5);
  Rng rng(1);
  for (int k = 0; k < 1000; ++k) {
    const double u = uniform01(rng);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("gamma_d = 0 step is a plain Trotter step without RNG use") {
  const TrajectoryConfig c = small_config(0.0);
  const TrotterPlan plan = TrotterPlan::build(c.params, c.dt, TimeKind::real, false);
  MpsState a = random_mps(6, 4, 3), b = a;
  Rng rng(9), untouched(9);
  const StepResult r = stochastic_step(a, rng, plan, c.policy, c.dt);
  trotter_step(b, plan, c.policy);
  CHECK(!r.jump);
  CHECK(r.total_probability == 0.0);
  CHECK(rng() == untouched());
  for (int i = 0; i < 6; ++i)
    for (int s = 0; s < 2; ++s) CHECK(a.tensor(i)[s] == b.tensor(i)[s]);
}

TEST_CASE("jump frequency follows gamma_d dt sum <n>") {
  const TrajectoryConfig c = small_config(2.0);
  const TrotterPlan plan = TrotterPlan::build(c.params, c.dt, TimeKind::real, true);
  const MpsState start = polarized(6);  // <n_i> = 1 everywhere
  const double p = c.params.gamma_d * c.dt * 6;
  Rng rng(123);
  int jumps = 0;
  const int trials = 4000;
  std::vector<int> per_site(6, 0);
  for (int k = 0; k < trials; ++k) {
    MpsState s = start;
    const StepResult r = stochastic_step(s, rng, plan, c.policy, c.dt);
    CHECK(r.total_probability == doctest::Approx(p));
    if (r.jump) {
      ++jumps;
      ++per_site[r.jump->site];
      CHECK(r.jump->time == c.dt);
      CHECK(s.norm() == doctest::Approx(1.0));
      CHECK(expect_local(s, jump_operator(), r.jump->site).real() == doctest::Approx(1.0));
    }
  }
  const double sigma = std::sqrt(trials * p * (1 - p));
  CHECK(std::abs(jumps - trials * p) < 5 * sigma);
  for (int n : per_site) CHECK(n > 0);
}

TEST_CASE("trajectory is reproducible from its seed") {
  const TrajectoryConfig c = small_config(1.0);
  const auto a = run_trajectory(c, polarized(6), 77);
  const auto b = run_trajectory(c, polarized(6), 77);
  CHECK(same_record(a, b));
  CHECK(a.grid.size() == 11);
  CHECK(a.series.at("F").front() == doctest::Approx(1.0));
  const auto other = run_trajectory(c, polarized(6), 78);
  CHECK(other.final_state_checksum != a.final_state_checksum);
}

TEST_CASE("t_max = 0 yields only the initial sample") {
  const auto r = run_trajectory(small_config(1.0, 0.0), polarized(6), 1);
  CHECK(r.grid == std::vector<double>{0.0});
  CHECK(r.series.at("F") == std::vector<double>{1.0});
  CHECK(r.events.empty());
}

TEST_CASE("checkpoint resume is bit-exact") {
  const TrajectoryConfig c = small_config(1.5);
  const auto full = run_trajectory(c, polarized(6), 2024);
  const auto stem = std::filesystem::temp_directory_path() / "mcmps_ckpt_test";
  {
    TrajectoryRunner r(c, polarized(6), 2024);
    r.advance(37);
    r.save_checkpoint(stem);
  }
  TrajectoryRunner resumed = TrajectoryRunner::load_checkpoint(c, stem);
  CHECK(resumed.step() == 37);
  resumed.run_to_end();
  CHECK(same_record(resumed.finish(), full));
  std::filesystem::remove(stem.string() + ".json");
  std::filesystem::remove(stem.string() + ".mps");
}

TEST_CASE("ensemble results do not depend on the worker count") {
  const TrajectoryConfig c = small_config(1.0, 0.5);
  EnsembleOptions one, three;
  three.workers = 3;
  const auto a = run_ensemble(c, polarized(6), 7, 99, one);
  const auto b = run_ensemble(c, polarized(6), 7, 99, three);
  CHECK(a.mean == b.mean);
  for (const auto& [key, v] : a.stderr_)
    for (std::size_t k = 0; k < v.size(); ++k) {
      const double x = v[k], y = b.stderr_.at(key)[k];
      CHECK((x == y || (std::isnan(x) && std::isnan(y))));
    }
  CHECK(a.jumps_per_site == b.jumps_per_site);
  CHECK(a.jumps_per_interval == b.jumps_per_interval);
  for (int k = 0; k < 7; ++k) CHECK(a.summaries[k].final_state_checksum == b.summaries[k].final_state_checksum);
}

TEST_CASE("ensemble with checkpoints matches the plain run") {
  const TrajectoryConfig c = small_config(1.0, 0.5);
  const auto dir = std::filesystem::temp_directory_path() / "mcmps_ens_ckpt";
  std::filesystem::create_directories(dir);
  EnsembleOptions plain, ck;
  ck.checkpoint_dir = dir;
  ck.checkpoint_interval = 0.1;
  const auto a = run_ensemble(c, polarized(6), 3, 5, plain);
  const auto b = run_ensemble(c, polarized(6), 3, 5, ck);
  CHECK(a.mean == b.mean);
  CHECK(std::filesystem::is_empty(dir));
  std::filesystem::remove_all(dir);
}

TEST_CASE("aggregation statistics") {
  TrajectoryRecord r1, r2;
  r1.grid = r2.grid = {0.0, 0.1};
  r1.series["F"] = {1.0, 0.8};
  r2.series["F"] = {1.0, 0.6};
  r1.events = {{0.05, 1}};
  r2.events = {{0.1, 1}, {0.1, 0}};
  const auto one = aggregate({r1}, 2);
  CHECK(std::isnan(one.stderr_.at("F")[1]));
  const auto two = aggregate({r1, r2}, 2);
  CHECK(two.mean.at("F")[1] == doctest::Approx(0.7));
  // sample std of {0.8, 0.6} is 0.1414..., divided by sqrt(2)
  CHECK(two.stderr_.at("F")[1] == doctest::Approx(0.1));
  CHECK(two.stderr_.at("F")[0] == 0.0);
  CHECK(two.jumps_per_site == std::vector<long>{1, 2});
  CHECK(two.jumps_per_interval == std::vector<long>{0, 3});
}

TEST_CASE("JSON line round trip") {
  const auto r = run_trajectory(small_config(2.0), polarized(6), 31);
  const auto back = from_json_line(to_json_line(r));
  CHECK(same_record(r, back));
  CHECK(back.probability_warnings == r.probability_warnings);
  CHECK(back.max_bond_dim == r.max_bond_dim);
}

TEST_CASE("trajectory config validation") {
  TrajectoryConfig c = small_config(1.0);
  c.output_dt = 0.015;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config(1.0);
  c.t_max = 1.05;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config(1.0);
  c.dt = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
