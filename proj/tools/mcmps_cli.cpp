#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mcmps/driver.hpp"
#include "mcmps/errors.hpp"

namespace {

using namespace mcmps;

// Flags that override config-file keys. Precedence: flag > file > default.
struct Overrides {
  std::optional<std::string> config_file;
  std::optional<double> J, hx, hz, gamma_d;
  std::optional<int> L;
  std::optional<double> cutoff;
  std::optional<int> chi_max;
  std::optional<double> dt, t_max, output_dt, dtau, tau_max, checkpoint_interval;
  std::optional<int> n_traj, workers, chi0, r_max;
  std::optional<std::uint64_t> seed, gs_seed;
  std::optional<std::string> output_dir;
  bool no_entropy = false;
  bool no_correlation = false;

  void attach(CLI::App& app) {
    app.add_option("-c,--config", config_file, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--J", J, "coupling J");
    app.add_option("--hx", hx, "transverse field");
    app.add_option("--hz", hz, "longitudinal field magnitude (prepared +|hz|, evolved -|hz|)");
    app.add_option("--gamma-d", gamma_d, "measurement rate");
    app.add_option("-L,--length", L, "chain length");
    app.add_option("--cutoff", cutoff, "singular-value cutoff");
    app.add_option("--chi-max", chi_max, "maximum bond dimension");
    app.add_option("--dt", dt, "time step");
    app.add_option("--t-max", t_max, "final time");
    app.add_option("--output-dt", output_dt, "output grid spacing");
    app.add_option("--dtau", dtau, "imaginary time step");
    app.add_option("--tau-max", tau_max, "imaginary time span");
    app.add_option("--chi0", chi0, "bond dimension of the random starting MPS");
    app.add_option("--gs-seed", gs_seed, "seed of the random starting MPS");
    app.add_option("--n-traj", n_traj, "number of trajectories");
    app.add_option("--seed", seed, "base seed of the ensemble");
    app.add_option("--workers", workers, "worker threads");
    app.add_option("--checkpoint-interval", checkpoint_interval, "simulated time between checkpoints");
    app.add_option("--r-max", r_max, "largest correlation distance (0: L/2)");
    app.add_option("-o,--output-dir", output_dir, "output directory");
    app.add_flag("--no-entropy", no_entropy, "skip the entanglement entropy");
    app.add_flag("--no-correlation", no_correlation, "skip C(r, t)");
  }

  SimulationConfig resolve() const {
    SimulationConfig c = config_file ? load_config(*config_file) : SimulationConfig{};
    auto set = [](auto& target, const auto& opt) {
      if (opt) target = *opt;
    };
    set(c.model.J, J);
    set(c.model.hx, hx);
    set(c.model.hz, hz);
    set(c.model.gamma_d, gamma_d);
    set(c.model.L, L);
    set(c.policy.cutoff, cutoff);
    set(c.policy.chi_max, chi_max);
    set(c.dt, dt);
    set(c.t_max, t_max);
    set(c.output_dt, output_dt);
    set(c.dtau, dtau);
    set(c.tau_max, tau_max);
    set(c.chi0, chi0);
    set(c.ground_state_seed, gs_seed);
    set(c.n_traj, n_traj);
    set(c.base_seed, seed);
    set(c.workers, workers);
    set(c.checkpoint_interval, checkpoint_interval);
    set(c.observables.r_max, r_max);
    set(c.output_dir, output_dir);
    if (no_entropy) c.observables.entropy = false;
    if (no_correlation) c.observables.correlation = false;
    c.validate();
    return c;
  }
};

std::vector<double> log_spaced(double lo, double hi, int n) {
  std::vector<double> out;
  if (n == 1) return {lo};
  for (int k = 0; k < n; ++k) out.push_back(lo * std::pow(hi / lo, static_cast<double>(k) / (n - 1)));
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"Monte Carlo MPS simulator of the monitored quantum Ising chain"};
  app.require_subcommand(1);

  Overrides gs_over;
  auto* gs = app.add_subcommand("ground-state", "imaginary-time ground state with +|hz|");
  gs_over.attach(*gs);

  Overrides ev_over;
  std::optional<std::string> snapshot;
  bool resume = false;
  auto* ev = app.add_subcommand("evolve", "quench to -|hz| and run the trajectory ensemble");
  ev_over.attach(*ev);
  ev->add_option("--snapshot", snapshot, "initial MPS snapshot (default <output-dir>/ground_state.mps)");
  ev->add_flag("--resume", resume, "continue an interrupted run");

  ModelParams gap_params{1.0, 0.8, 0.08, 0.0, 4};
  std::vector<double> gammas;
  double g_min = 0.1, g_max = 100.0;
  int g_points = 0;
  std::string gap_dir = "gap_sweep";
  auto* gap = app.add_subcommand("gap-sweep", "Liouvillian gap versus gamma_d");
  gap->add_option("--J", gap_params.J, "coupling J");
  gap->add_option("--hx", gap_params.hx, "transverse field");
  gap->add_option("--hz", gap_params.hz, "longitudinal field");
  gap->add_option("-L,--length", gap_params.L, "chain length (<= 6)");
  gap->add_option("--gammas", gammas, "explicit gamma_d values");
  gap->add_option("--gamma-min", g_min, "smallest gamma_d of a log-spaced sweep");
  gap->add_option("--gamma-max", g_max, "largest gamma_d of a log-spaced sweep");
  gap->add_option("--points", g_points, "number of log-spaced gamma_d values");
  gap->add_option("-o,--output-dir", gap_dir, "output directory");

  FitRequest fit_req;
  std::string fit_kind = "fvd";
  std::string fit_input, fit_dir = "fit";
  std::vector<double> window;
  auto* fit = app.add_subcommand("fit", "rate fits on simulation output");
  fit->add_option("--kind", fit_kind, "fvd | thermalization | arrhenius | arrhenius-linear");
  fit->add_option("-i,--input", fit_input, "input CSV")->required();
  fit->add_option("-o,--output-dir", fit_dir, "output directory");
  fit->add_option("--window", window, "fit window t_min t_max (fvd; omit for automatic)")->expected(2);
  fit->add_option("--gamma-d", fit_req.gamma_d, "gamma_d of the series (window table key)");
  fit->add_option("--hz", fit_req.h_z, "longitudinal field for the Arrhenius law");
  fit->add_option("--t-min", fit_req.t_min, "start of the thermalization window");
  fit->add_option("--t-max", fit_req.t_max, "end of the thermalization window (negative: end of data)");
  fit->add_option("--min-span", fit_req.min_span, "shortest automatic window");

  Overrides fs_over;
  std::vector<int> sizes;
  double probe_time = 15.0, tolerance = 1e-2;
  auto* fsz = app.add_subcommand("finite-size", "F(probe_time) versus L");
  fs_over.attach(*fsz);
  fsz->add_option("--sizes", sizes, "chain lengths")->required();
  fsz->add_option("--probe-time", probe_time, "time at which F is compared");
  fsz->add_option("--tolerance", tolerance, "convergence tolerance between successive L");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (gs->parsed()) {
    const auto report = cmd_ground_state(gs_over.resolve());
    std::cout << "L=" << report.L << " energy=" << report.energy << " bulk_sz=" << report.bulk_sz
              << " max_bond_dim=" << report.max_bond_dim << " snapshot=" << report.snapshot.string() << '\n';
    if (!report.converged) std::cerr << "warning: imaginary-time evolution did not reach the energy tolerance\n";
  } else if (ev->parsed()) {
    EvolveOptions opt;
    if (snapshot) opt.snapshot = *snapshot;
    opt.resume = resume;
    const SimulationConfig c = ev_over.resolve();
    const auto result = cmd_evolve(c, opt);
    long warnings = 0;
    for (const auto& s : result.summaries) warnings += s.probability_warnings;
    std::cout << "trajectories=" << result.n_traj << " output=" << c.output_dir << '\n';
    if (warnings > 0)
      std::cerr << "warning: " << warnings << " steps had total jump probability above 0.1; consider a smaller dt\n";
  } else if (gap->parsed()) {
    if (gammas.empty() && g_points > 0) gammas = log_spaced(g_min, g_max, g_points);
    const auto rows = cmd_gap_sweep(gap_params, gammas, gap_dir);
    for (const auto& r : rows) std::cout << r.gamma_d << ',' << r.gap << ',' << r.zeno_pred << '\n';
  } else if (fit->parsed()) {
    fit_req.kind = parse_fit_kind(fit_kind);
    fit_req.input = fit_input;
    fit_req.output_dir = fit_dir;
    if (window.size() == 2) fit_req.window = FitWindow{fit_req.gamma_d, window[0], window[1]};
    std::cout << cmd_fit(fit_req).dump(2) << '\n';
  } else if (fsz->parsed()) {
    const auto table = cmd_finite_size(fs_over.resolve(), sizes, probe_time, tolerance);
    for (const auto& row : table.rows) std::cout << row.L << ',' << row.value << ',' << row.stderr_ << '\n';
    if (table.converged) std::cout << "converged at L=" << table.converged_at << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const mcmps::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const mcmps::ResourceError& e) {
    std::cerr << "resource error: " << e.what() << '\n';
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 2;
  }
}
