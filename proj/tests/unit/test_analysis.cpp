#include <doctest.h>

#include <cmath>

#include "mcmps/analysis.hpp"
#include "mcmps/errors.hpp"
#include "mcmps/model.hpp"
#include "mcmps/oracle.hpp"

using namespace mcmps;
namespace orc = mcmps::oracle;

namespace {

std::vector<double> grid(double t0, double t1, double dt) {
  std::vector<double> t;
  const int n = static_cast<int>(std::lround((t1 - t0) / dt));
  for (int k = 0; k <= n; ++k) t.push_back(t0 + k * dt);
  return t;
}

template <typename F>
std::vector<double> sample(const std::vector<double>& t, F f) {
  std::vector<double> out;
  for (double x : t) out.push_back(f(x));
  return out;
}

}  // namespace

TEST_CASE("exponential fit on noiseless data") {
  const auto t = grid(0.0, 15.0, 0.1);
  const auto f = sample(t, [](double x) { return std::exp(-0.3 * x); });
  const RateFit fit = fit_exponential_decay(t, f, {0.0, 2.0, 9.0});
  CHECK(std::abs(fit.rate - 0.3) < 1e-10);
  CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.n_points == 71);

  const auto scaled = sample(t, [](double x) { return 0.37 * std::exp(-0.3 * x); });
  const RateFit s = fit_exponential_decay(t, scaled, {0.0, 2.0, 9.0});
  CHECK(std::abs(s.rate - fit.rate) < 1e-12);
  CHECK(s.intercept == doctest::Approx(fit.intercept + std::log(0.37)));
}

TEST_CASE("exponential fit with a controlled perturbation") {
  const auto t = grid(0.0, 15.0, 0.1);
  const auto f = sample(t, [](double x) { return std::exp(-0.3 * x) * (1.0 + 0.01 * std::sin(x)); });
  const RateFit fit = fit_exponential_decay(t, f, {0.0, 1.0, 14.0});
  CHECK(std::abs(fit.rate - 0.3) < 0.01);
}

TEST_CASE("exponential fit errors") {
  const auto t = grid(0.0, 2.0, 0.5);
  std::vector<double> f{1.0, 0.5, 0.0, 0.2, 0.1};
  CHECK_THROWS_AS(fit_exponential_decay(t, f, {0.0, 0.0, 2.0}), DomainError);
  std::vector<double> g{1.0, 0.5, 0.4, 0.2, 0.1};
  CHECK_THROWS_AS(fit_exponential_decay(t, g, {0.0, 0.4, 1.1}), DomainError);
  CHECK_THROWS_AS(fit_exponential_decay(t, g, {0.0, 1.0, 1.0}), ConfigError);
}

TEST_CASE("default window table") {
  const WindowTable table = WindowTable::defaults();
  CHECK(table.lookup(0.0)->t_min == 8.0);
  CHECK(table.lookup(0.0)->t_max == 13.0);
  CHECK(table.lookup(0.1)->t_min == 5.0);
  CHECK(table.lookup(0.1)->t_max == 7.0);
  CHECK(table.lookup(0.3)->t_min == 4.0);
  CHECK(table.lookup(0.3)->t_max == 5.0);
  CHECK(!table.lookup(0.2));
}

TEST_CASE("auto window on a pure exponential spans the domain minus edges") {
  const auto t = grid(0.0, 15.0, 0.1);
  const auto f = sample(t, [](double x) { return std::exp(-0.25 * x); });
  const FitWindow w = auto_window(t, f, 0.0);
  CHECK(w.t_min == doctest::Approx(0.3));
  CHECK(w.t_max == doctest::Approx(14.7));
  CHECK(std::abs(fit_exponential_decay(t, f, w).rate - 0.25) < 1e-6);
}

TEST_CASE("auto window excludes a saturated tail") {
  const auto t = grid(0.0, 15.0, 0.1);
  const auto f = sample(t, [](double x) { return std::max(std::exp(-0.3 * x), 0.5); });
  const FitWindow w = auto_window(t, f, 0.0);
  CHECK(w.t_max < std::log(2.0) / 0.3 + 0.3);
  CHECK(std::abs(fit_exponential_decay(t, f, w).rate - 0.3) < 1e-6);
}

TEST_CASE("auto window falls back to the table or fails") {
  const auto t = grid(0.0, 15.0, 0.1);
  const auto flat = sample(t, [](double) { return 0.9; });
  const FitWindow w = auto_window(t, flat, 0.1);
  CHECK(w.t_min == 5.0);
  CHECK(w.t_max == 7.0);
  CHECK_THROWS_AS(auto_window(t, flat, 0.2), DomainError);
}

TEST_CASE("Arrhenius fit recovers synthetic parameters") {
  const double A = 0.07, B = 0.3, C = 0.4, hz = 0.08;
  std::vector<std::pair<double, double>> data;
  for (double g : {0.0, 0.05, 0.1, 0.2, 0.3, 0.5, 1.0}) data.emplace_back(g, C * std::exp(-A / (B * g + hz)));
  const ArrheniusFit fit = fit_arrhenius(data, hz);
  CHECK(std::abs(fit.A - A) / A < 1e-6);
  CHECK(std::abs(fit.B - B) / B < 1e-6);
  CHECK(std::abs(fit.prefactor - C) / C < 1e-6);
  CHECK(fit.residual_norm < 1e-10);
  // the gamma_d = 0 point follows C exp(-A J / h_z)
  CHECK(fit.prefactor * std::exp(-fit.A / hz) == doctest::Approx(data[0].second).epsilon(1e-6));
}

TEST_CASE("Arrhenius fit with mild multiplicative noise stays within 5%") {
  const double A = 0.07, B = 0.3, C = 0.4, hz = 0.08;
  std::vector<std::pair<double, double>> data;
  const double noise[] = {0.004, -0.003, 0.002, -0.004, 0.003, -0.002, 0.001, 0.0};
  int k = 0;
  for (double g : {0.0, 0.05, 0.1, 0.15, 0.2, 0.3, 0.5, 1.0})
    data.emplace_back(g, C * std::exp(-A / (B * g + hz)) * (1.0 + noise[k++]));
  const ArrheniusFit fit = fit_arrhenius(data, hz);
  CHECK(std::abs(fit.A - A) / A < 0.05);
  CHECK(std::abs(fit.B - B) / B < 0.05);
}

TEST_CASE("Arrhenius input validation") {
  CHECK_THROWS_AS(fit_arrhenius({{0.1, 1.0}, {0.2, 1.0}}, 0.08), DomainError);
  CHECK_THROWS_AS(fit_arrhenius({{0.1, 1.0}, {0.2, -1.0}, {0.3, 1.0}}, 0.08), DomainError);
  CHECK_THROWS_AS(fit_arrhenius({{0.0, 1.0}, {0.2, 1.0}, {0.3, 1.0}}, 0.0), DomainError);
}

TEST_CASE("linearized h_z = 0 Arrhenius fit") {
  const double A = 0.07, B = 0.3, C = 0.4;
  std::vector<std::pair<double, double>> data;
  for (double g : {0.1, 0.2, 0.4, 0.8, 1.6}) data.emplace_back(g, C * std::exp(-A / (B * g)));
  const LinearFit fit = fit_arrhenius_linearized(data);
  CHECK(fit.slope == doctest::Approx(std::log(C)).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(-A / B).epsilon(1e-12));
  CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("thermalization rate fit") {
  const auto t = grid(0.0, 20.0, 0.1);
  const auto f = sample(t, [](double x) { return 0.5 + 0.3 * std::exp(-0.5 * x); });
  CHECK(std::abs(fit_thermalization_rate(t, f, 2.0).rate - 0.5) < 1e-8);
  const auto osc = sample(t, [](double x) { return 0.5 + 0.3 * std::exp(-0.5 * x) * std::cos(2.0 * x); });
  CHECK_THROWS_AS(fit_thermalization_rate(t, osc, 1.0), DomainError);
}

TEST_CASE("thermalization rate of the master equation matches the Liouvillian gap") {
  const int L = 4;
  const ModelParams p{1.0, 0.8, 0.08, 1.0, L};
  Eigen::MatrixXcd rho0 = Eigen::MatrixXcd::Zero(16, 16);
  rho0(0, 0) = 1.0;
  const auto series = orc::integrate_master_equation(rho0, p, 40.0, 0.01, 0.1);
  std::vector<double> f;
  double m0 = 0.0;
  for (int i = 0; i < L; ++i) m0 += orc::density_expect_local(rho0, pauli::z(), i, L);
  for (const auto& rho : series.states) {
    double m = 0.0;
    for (int i = 0; i < L; ++i) m += orc::density_expect_local(rho, pauli::z(), i, L);
    f.push_back((m + m0) / (2.0 * m0));
  }
  const double gap = orc::liouvillian_gap(p);
  const RateFit fit = fit_thermalization_rate(series.grid, f, 15.0, 35.0);
  CHECK(std::abs(fit.rate - gap) / gap < 0.05);
}

TEST_CASE("finite-size scan") {
  const auto single = finite_size_scan({20}, 15.0, [](int) { return std::make_pair(0.8, 0.01); }, 1e-2);
  CHECK(single.rows.size() == 1);
  CHECK(!single.converged);
  const auto table = finite_size_scan(
      {10, 20, 40, 80}, 15.0, [](int L) { return std::make_pair(0.7 + 1.0 / L, 0.0); }, 0.02);
  CHECK(table.rows.size() == 4);
  CHECK(table.converged);
  CHECK(table.converged_at == 40);
}
