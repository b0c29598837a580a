#include "mcmps/trajectories.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "mcmps/errors.hpp"
#include "mcmps/observables.hpp"
#include "mcmps/snapshot.hpp"

namespace mcmps {

using nlohmann::json;

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t trajectory_seed(std::uint64_t base_seed, std::uint64_t index) {
  return splitmix64(base_seed ^ splitmix64(index + 1));
}

std::uint64_t retry_seed(std::uint64_t seed) { return splitmix64(seed ^ 0xD1B54A32D192ED03ULL); }

StepResult stochastic_step(MpsState& state, Rng& rng, const TrotterPlan& plan, const TruncationPolicy& policy,
                           double t_end) {
  StepResult result;
  const double gamma = plan.params.gamma_d;
  if (gamma == 0.0) {
    trotter_step(state, plan, policy);
    return result;
  }
  if (!plan.dissipative) throw ConfigError("stochastic_step with gamma_d > 0 needs a dissipative plan");

  state.canonicalize(0);
  const std::vector<cplx> occupation = expect_local_all(state, jump_operator());
  std::vector<double> p(occupation.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::max(0.0, gamma * plan.dt * occupation[i].real());
    total += p[i];
  }
  result.total_probability = total;

  const double u = uniform01(rng);
  if (u >= total) {
    nonhermitian_step(state, plan, policy);
    return result;
  }

  // u is uniform on [0, total): walking the cumulative p_i selects site i with
  // probability p_i / total.
  int site = static_cast<int>(p.size()) - 1;
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) {
      site = static_cast<int>(i);
      break;
    }
  }
  if (!(p[site] > 0.0)) throw InvariantError("jump drawn on a site with zero occupation");

  apply_local_operator(state, jump_operator(), site);
  state.canonicalize(0);
  const double n = state.norm();
  if (!(n * n >= 1e-12)) throw NumericError("norm underflow after projecting site " + std::to_string(site));
  state.scale(1.0 / n);
  result.jump = JumpEvent{t_end, site};
  return result;
}

int ObservableSet::effective_r_max(int L) const {
  const int r = (r_max > 0) ? r_max : L / 2;
  return std::min(r, L - 1);
}

void TrajectoryConfig::validate() const {
  params.validate();
  policy.validate();
  if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
  if (!(t_max >= 0.0)) throw ConfigError("t_max must be >= 0");
  if (!(output_dt > 0.0)) throw ConfigError("output grid spacing must be > 0");
  const double ratio = output_dt / dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-6 || std::round(ratio) < 1)
    throw ConfigError("output grid spacing must be a positive multiple of dt");
  const double n_out = t_max / output_dt;
  if (std::abs(n_out - std::round(n_out)) > 1e-6) throw ConfigError("t_max must be a multiple of the output spacing");
  if (observables.r_max < 0 || observables.r_max >= params.L) throw ConfigError("r_max must lie in [0, L-1]");
}

long TrajectoryConfig::total_steps() const { return std::lround(t_max / dt); }
long TrajectoryConfig::steps_per_output() const { return std::lround(output_dt / dt); }

std::vector<double> TrajectoryConfig::output_grid() const {
  const long n = total_steps() / steps_per_output();
  std::vector<double> g(n + 1);
  for (long k = 0; k <= n; ++k) g[k] = static_cast<double>(k * steps_per_output()) * dt;
  return g;
}

std::string site_series_name(int site) { return "sz_" + std::to_string(site); }
std::string correlation_series_name(int r) { return "C_" + std::to_string(r); }

std::uint64_t state_checksum(const MpsState& state) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t k = 0; k < bytes; ++k) {
      h ^= p[k];
      h *= 0x100000001b3ULL;
    }
  };
  for (int i = 0; i < state.length(); ++i)
    for (int s = 0; s < 2; ++s) {
      const auto& m = state.tensor(i)[s];
      const Eigen::Index rows = m.rows(), cols = m.cols();
      mix(&rows, sizeof(rows));
      mix(&cols, sizeof(cols));
      mix(m.data(), sizeof(cplx) * static_cast<std::size_t>(m.size()));
    }
  return h;
}

TrajectoryRunner::TrajectoryRunner(TrajectoryConfig config, MpsState initial, std::uint64_t seed)
    : config_(std::move(config)),
      plan_(TrotterPlan::build(config_.params, config_.dt, TimeKind::real, config_.params.gamma_d > 0.0)),
      state_(std::move(initial)),
      rng_(seed),
      seed_(seed) {
  config_.validate();
  if (state_.length() != config_.params.L) throw ConfigError("initial state length differs from L");
  state_.canonicalize(0);
  state_.normalize();
  profile0_ = magnetization_profile(state_);
  record_.seed = seed;
  max_bond_ = state_.max_bond_dim();
  sample();
}

TrajectoryRunner::TrajectoryRunner(TrajectoryConfig config, MpsState state, std::uint64_t seed, RestoreTag)
    : config_(std::move(config)),
      plan_(TrotterPlan::build(config_.params, config_.dt, TimeKind::real, config_.params.gamma_d > 0.0)),
      state_(std::move(state)),
      rng_(seed),
      seed_(seed) {
  config_.validate();
  if (state_.length() != config_.params.L) throw ConfigError("checkpoint state length differs from L");
}

void TrajectoryRunner::sample() {
  const int L = state_.length();
  record_.grid.push_back(time());
  auto& series = record_.series;
  if (config_.observables.magnetization) {
    const std::vector<double> m = magnetization_profile(state_);
    series["F"].push_back(magnetization_fidelity(m, profile0_));
    double sum = 0.0;
    for (int i = 0; i < L; ++i) {
      series[site_series_name(i)].push_back(m[i]);
      sum += m[i];
    }
    series["mz"].push_back(sum / L);
  }
  if (config_.observables.entropy) series["S"].push_back(half_chain_entropy(state_));
  if (config_.observables.correlation) {
    const int r_max = config_.observables.effective_r_max(L);
    const std::vector<double> c = connected_correlation(state_, r_max);
    for (int r = 1; r <= r_max; ++r) series[correlation_series_name(r)].push_back(c[r - 1]);
  }
}

void TrajectoryRunner::advance(long max_steps) {
  const long per_output = config_.steps_per_output();
  for (long k = 0; k < max_steps && !done(); ++k) {
    ++step_;
    const StepResult r = stochastic_step(state_, rng_, plan_, config_.policy, time());
    if (r.total_probability > kJumpProbabilityWarning) ++record_.probability_warnings;
    if (r.jump) record_.events.push_back(*r.jump);
    max_bond_ = std::max(max_bond_, state_.max_bond_dim());
    if (step_ % per_output == 0) sample();
  }
}

TrajectoryRecord TrajectoryRunner::finish() const {
  TrajectoryRecord out = record_;
  out.final_state_checksum = state_checksum(state_);
  out.max_bond_dim = max_bond_;
  out.discarded_weight = state_.truncation_log().cumulative;
  return out;
}

namespace {

json series_to_json(const std::map<std::string, std::vector<double>>& series) {
  json j = json::object();
  for (const auto& [name, values] : series) j[name] = values;
  return j;
}

std::map<std::string, std::vector<double>> series_from_json(const json& j) {
  std::map<std::string, std::vector<double>> out;
  for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = it.value().get<std::vector<double>>();
  return out;
}

json events_to_json(const std::vector<JumpEvent>& events) {
  json arr = json::array();
  for (const JumpEvent& e : events) arr.push_back({{"t", e.time}, {"site", e.site}});
  return arr;
}

std::vector<JumpEvent> events_from_json(const json& arr) {
  std::vector<JumpEvent> out;
  out.reserve(arr.size());
  for (const json& e : arr) out.push_back({e.at("t").get<double>(), e.at("site").get<int>()});
  return out;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

}  // namespace

void TrajectoryRunner::save_checkpoint(const std::filesystem::path& stem) const {
  std::ostringstream rng_text;
  rng_text << rng_;
  json j;
  j["seed"] = seed_;
  j["step"] = step_;
  j["rng"] = rng_text.str();
  j["events"] = events_to_json(record_.events);
  j["grid"] = record_.grid;
  j["series"] = series_to_json(record_.series);
  j["profile0"] = profile0_;
  j["probability_warnings"] = record_.probability_warnings;
  j["max_bond_dim"] = max_bond_;

  // Write to temporaries first so an interrupted save never leaves a torn pair.
  const std::filesystem::path json_path = stem.string() + ".json";
  const std::filesystem::path mps_path = stem.string() + ".mps";
  save_snapshot(mps_path.string() + ".tmp", state_);
  {
    std::ofstream out(json_path.string() + ".tmp", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + json_path.string());
    out << j.dump() << '\n';
  }
  std::filesystem::rename(mps_path.string() + ".tmp", mps_path);
  std::filesystem::rename(json_path.string() + ".tmp", json_path);
}

TrajectoryRunner TrajectoryRunner::load_checkpoint(const TrajectoryConfig& config, const std::filesystem::path& stem) {
  std::ifstream in(stem.string() + ".json");
  if (!in) throw std::runtime_error("cannot read checkpoint " + stem.string() + ".json");
  const json j = json::parse(in);
  MpsState state = load_snapshot(stem.string() + ".mps");

  TrajectoryRunner runner(config, std::move(state), j.at("seed").get<std::uint64_t>(), RestoreTag{});
  runner.record_.seed = runner.seed_;
  runner.step_ = j.at("step").get<long>();
  std::istringstream rng_text(j.at("rng").get<std::string>());
  rng_text >> runner.rng_;
  runner.record_.events = events_from_json(j.at("events"));
  runner.record_.grid = j.at("grid").get<std::vector<double>>();
  runner.record_.series = series_from_json(j.at("series"));
  runner.profile0_ = j.at("profile0").get<std::vector<double>>();
  runner.record_.probability_warnings = j.at("probability_warnings").get<long>();
  runner.max_bond_ = j.at("max_bond_dim").get<int>();
  return runner;
}

TrajectoryRecord run_trajectory(const TrajectoryConfig& config, const MpsState& initial, std::uint64_t seed) {
  TrajectoryRunner runner(config, initial, seed);
  runner.run_to_end();
  return runner.finish();
}

EnsembleResult aggregate(const std::vector<TrajectoryRecord>& records, int L) {
  if (records.empty()) throw ConfigError("ensemble needs at least one trajectory");
  EnsembleResult out;
  out.n_traj = static_cast<int>(records.size());
  out.grid = records.front().grid;
  const double n = static_cast<double>(records.size());

  for (const auto& [name, first] : records.front().series) {
    const std::size_t len = first.size();
    std::vector<double> mean(len, 0.0), err(len, std::numeric_limits<double>::quiet_NaN());
    for (const TrajectoryRecord& r : records) {
      const auto it = r.series.find(name);
      if (it == r.series.end() || it->second.size() != len)
        throw InvariantError("trajectory series '" + name + "' missing or on a different grid");
      for (std::size_t k = 0; k < len; ++k) mean[k] += it->second[k];
    }
    for (double& m : mean) m /= n;
    if (records.size() >= 2) {
      for (std::size_t k = 0; k < len; ++k) {
        double ss = 0.0;
        for (const TrajectoryRecord& r : records) {
          const double d = r.series.at(name)[k] - mean[k];
          ss += d * d;
        }
        err[k] = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
      }
    }
    out.mean[name] = std::move(mean);
    out.stderr_[name] = std::move(err);
  }

  out.jumps_per_site.assign(L, 0);
  out.jumps_per_interval.assign(out.grid.size(), 0);
  for (const TrajectoryRecord& r : records) {
    TrajectorySummary s;
    s.seed = r.seed;
    s.n_jumps = r.events.size();
    s.max_bond_dim = r.max_bond_dim;
    s.discarded_weight = r.discarded_weight;
    s.probability_warnings = r.probability_warnings;
    s.final_state_checksum = r.final_state_checksum;
    out.summaries.push_back(s);
    for (const JumpEvent& e : r.events) {
      if (e.site >= 0 && e.site < L) ++out.jumps_per_site[e.site];
      // First grid point with t_k >= event time (events happen at step ends).
      std::size_t k = 1;
      while (k < out.grid.size() && out.grid[k] < e.time - 1e-12) ++k;
      if (k < out.grid.size()) ++out.jumps_per_interval[k];
    }
  }
  return out;
}

EnsembleResult run_ensemble(const TrajectoryConfig& config, const MpsState& initial, int n_traj,
                            std::uint64_t base_seed, const EnsembleOptions& options) {
  config.validate();
  if (n_traj < 1) throw ConfigError("n_traj must be >= 1");
  const int workers = std::max(1, std::min(options.workers, n_traj));

  std::vector<std::optional<TrajectoryRecord>> records(n_traj);
  std::vector<bool> retried(n_traj, false);
  std::atomic<int> next{0};
  std::atomic<bool> abort{false};
  std::mutex mu;
  std::exception_ptr failure;

  const long checkpoint_steps =
      std::max<long>(1, std::lround(options.checkpoint_interval / config.dt));

  auto run_one = [&](int k, std::uint64_t seed) {
    const std::filesystem::path stem =
        options.checkpoint_dir ? *options.checkpoint_dir / ("traj_" + std::to_string(k)) : std::filesystem::path{};
    std::optional<TrajectoryRunner> runner;
    if (options.checkpoint_dir && std::filesystem::exists(stem.string() + ".json")) {
      runner.emplace(TrajectoryRunner::load_checkpoint(config, stem));
      if (runner->finish().seed != seed) runner.reset();
    }
    if (!runner) runner.emplace(config, initial, seed);
    while (!runner->done()) {
      runner->advance(options.checkpoint_dir ? checkpoint_steps : config.total_steps());
      if (options.checkpoint_dir && !runner->done()) runner->save_checkpoint(stem);
    }
    if (options.checkpoint_dir) {
      std::filesystem::remove(stem.string() + ".json");
      std::filesystem::remove(stem.string() + ".mps");
    }
    return runner->finish();
  };

  auto worker = [&]() {
    while (!abort.load()) {
      const int k = next.fetch_add(1);
      if (k >= n_traj) return;
      try {
        if (options.lookup_completed) {
          if (auto done = options.lookup_completed(k)) {
            records[k] = std::move(*done);
            continue;
          }
        }
        const std::uint64_t seed = trajectory_seed(base_seed, k);
        TrajectoryRecord rec;
        try {
          rec = run_one(k, seed);
        } catch (const NumericError& first) {
          retried[k] = true;
          try {
            if (options.checkpoint_dir) {
              std::filesystem::remove(*options.checkpoint_dir / ("traj_" + std::to_string(k) + ".json"));
              std::filesystem::remove(*options.checkpoint_dir / ("traj_" + std::to_string(k) + ".mps"));
            }
            rec = run_one(k, retry_seed(seed));
          } catch (const NumericError& second) {
            throw NumericError("trajectory " + std::to_string(k) + " failed twice (seed " + std::to_string(seed) +
                               ": " + first.what() + "; retry seed " + std::to_string(retry_seed(seed)) + ": " +
                               second.what() + ")");
          }
        }
        std::lock_guard<std::mutex> lock(mu);
        if (options.on_complete) options.on_complete(k, rec);
        records[k] = std::move(rec);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
        abort.store(true);
        return;
      }
    }
  };

  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<TrajectoryRecord> done;
  done.reserve(n_traj);
  for (auto& r : records) done.push_back(std::move(*r));
  EnsembleResult result = aggregate(done, config.params.L);
  for (int k = 0; k < n_traj; ++k) result.summaries[k].retried = retried[k];
  return result;
}

std::string to_json_line(const TrajectoryRecord& record) {
  json j;
  j["seed"] = record.seed;
  j["events"] = events_to_json(record.events);
  j["grid"] = record.grid;
  j["series"] = series_to_json(record.series);
  j["final_state_checksum"] = hex64(record.final_state_checksum);
  j["probability_warnings"] = record.probability_warnings;
  j["max_bond_dim"] = record.max_bond_dim;
  j["discarded_weight"] = record.discarded_weight;
  return j.dump();
}

TrajectoryRecord from_json_line(const std::string& line) {
  const json j = json::parse(line);
  TrajectoryRecord r;
  r.seed = j.at("seed").get<std::uint64_t>();
  r.events = events_from_json(j.at("events"));
  r.grid = j.at("grid").get<std::vector<double>>();
  r.series = series_from_json(j.at("series"));
  r.final_state_checksum = std::stoull(j.at("final_state_checksum").get<std::string>(), nullptr, 16);
  r.probability_warnings = j.value("probability_warnings", 0L);
  r.max_bond_dim = j.value("max_bond_dim", 0);
  r.discarded_weight = j.value("discarded_weight", 0.0);
  return r;
}

}  // namespace mcmps
