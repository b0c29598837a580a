#include "mcmps/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "mcmps/errors.hpp"

namespace mcmps {

using nlohmann::json;

void SimulationConfig::validate() const {
  model.validate();
  policy.validate();
  if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
  if (!(t_max >= 0.0)) throw ConfigError("t_max must be >= 0");
  if (!(dtau > 0.0) || !(tau_max >= 0.0)) throw ConfigError("dtau must be > 0 and tau_max >= 0");
  if (chi0 < 1) throw ConfigError("chi0 must be >= 1");
  if (n_traj < 1) throw ConfigError("n_traj must be >= 1");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (!(checkpoint_interval > 0.0)) throw ConfigError("checkpoint_interval must be > 0");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  trajectory_config().validate();
}

ModelParams SimulationConfig::preparation_params() const { return model.with_hz(std::abs(model.hz)); }

ModelParams SimulationConfig::evolution_params() const { return model.with_hz(-std::abs(model.hz)); }

TrajectoryConfig SimulationConfig::trajectory_config() const {
  TrajectoryConfig c;
  c.params = evolution_params();
  c.policy = policy;
  c.dt = dt;
  c.t_max = t_max;
  c.output_dt = output_dt;
  c.observables = observables;
  return c;
}

GroundStateOptions SimulationConfig::ground_state_options() const {
  GroundStateOptions o;
  o.tau_max = tau_max;
  o.dtau = dtau;
  o.policy = policy;
  o.seed = ground_state_seed;
  o.chi0 = chi0;
  o.energy_tol = energy_tol;
  return o;
}

json to_json(const SimulationConfig& c) {
  json j;
  j["model"] = {{"J", c.model.J}, {"hx", c.model.hx}, {"hz", c.model.hz}, {"gamma_d", c.model.gamma_d}, {"L", c.model.L}};
  j["truncation"] = {{"cutoff", c.policy.cutoff}, {"chi_max", c.policy.chi_max}};
  j["time"] = {{"dt", c.dt}, {"t_max", c.t_max}, {"output_dt", c.output_dt}};
  j["ground_state"] = {{"dtau", c.dtau},
                       {"tau_max", c.tau_max},
                       {"chi0", c.chi0},
                       {"energy_tol", c.energy_tol},
                       {"seed", c.ground_state_seed}};
  j["ensemble"] = {{"n_traj", c.n_traj},
                   {"base_seed", c.base_seed},
                   {"workers", c.workers},
                   {"checkpoint_interval", c.checkpoint_interval}};
  j["observables"] = {{"magnetization", c.observables.magnetization},
                      {"entropy", c.observables.entropy},
                      {"correlation", c.observables.correlation},
                      {"r_max", c.observables.r_max}};
  j["output_dir"] = c.output_dir;
  return j;
}

namespace {

void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError("config section '" + where + "' must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) throw ConfigError("unknown config key '" + where + (where.empty() ? "" : ".") + key + "'");
}

template <typename T>
void read(const json& section, const char* key, T& target, const std::string& where) {
  if (!section.contains(key)) return;
  try {
    target = section.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + where + "." + key + "' has the wrong type: " + e.what());
  }
}

}  // namespace

SimulationConfig config_from_json(const json& j, SimulationConfig c) {
  reject_unknown(j, "", {"model", "truncation", "time", "ground_state", "ensemble", "observables", "output_dir"});
  if (j.contains("model")) {
    const json& s = j.at("model");
    reject_unknown(s, "model", {"J", "hx", "hz", "gamma_d", "L"});
    read(s, "J", c.model.J, "model");
    read(s, "hx", c.model.hx, "model");
    read(s, "hz", c.model.hz, "model");
    read(s, "gamma_d", c.model.gamma_d, "model");
    read(s, "L", c.model.L, "model");
  }
  if (j.contains("truncation")) {
    const json& s = j.at("truncation");
    reject_unknown(s, "truncation", {"cutoff", "chi_max"});
    read(s, "cutoff", c.policy.cutoff, "truncation");
    read(s, "chi_max", c.policy.chi_max, "truncation");
  }
  if (j.contains("time")) {
    const json& s = j.at("time");
    reject_unknown(s, "time", {"dt", "t_max", "output_dt"});
    read(s, "dt", c.dt, "time");
    read(s, "t_max", c.t_max, "time");
    read(s, "output_dt", c.output_dt, "time");
  }
  if (j.contains("ground_state")) {
    const json& s = j.at("ground_state");
    reject_unknown(s, "ground_state", {"dtau", "tau_max", "chi0", "energy_tol", "seed"});
    read(s, "dtau", c.dtau, "ground_state");
    read(s, "tau_max", c.tau_max, "ground_state");
    read(s, "chi0", c.chi0, "ground_state");
    read(s, "energy_tol", c.energy_tol, "ground_state");
    read(s, "seed", c.ground_state_seed, "ground_state");
  }
  if (j.contains("ensemble")) {
    const json& s = j.at("ensemble");
    reject_unknown(s, "ensemble", {"n_traj", "base_seed", "workers", "checkpoint_interval"});
    read(s, "n_traj", c.n_traj, "ensemble");
    read(s, "base_seed", c.base_seed, "ensemble");
    read(s, "workers", c.workers, "ensemble");
    read(s, "checkpoint_interval", c.checkpoint_interval, "ensemble");
  }
  if (j.contains("observables")) {
    const json& s = j.at("observables");
    reject_unknown(s, "observables", {"magnetization", "entropy", "correlation", "r_max"});
    read(s, "magnetization", c.observables.magnetization, "observables");
    read(s, "entropy", c.observables.entropy, "observables");
    read(s, "correlation", c.observables.correlation, "observables");
    read(s, "r_max", c.observables.r_max, "observables");
  }
  if (j.contains("output_dir")) read(j, "output_dir", c.output_dir, "");
  return c;
}

SimulationConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

void save_config(const std::filesystem::path& path, const SimulationConfig& config) {
  std::ofstream out(path);
  if (!out) throw ResourceError("cannot write " + path.string());
  out << to_json(config).dump(2) << '\n';
}

std::string checksum_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const SimulationConfig& config) { return checksum_hex(to_json(config).dump()); }

std::string file_checksum(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ResourceError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return checksum_hex(ss.str());
}

}  // namespace mcmps
