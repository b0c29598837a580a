#include "mcmps/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "mcmps/errors.hpp"

namespace mcmps {

namespace {

constexpr double kTimeSlack = 1e-9;

void check_sizes(std::span<const double> t, std::span<const double> f) {
  if (t.size() != f.size()) throw DomainError("time grid and series have different lengths");
}

bool usable_weights(std::span<const double> err, std::size_t n) {
  if (err.size() != n) return false;
  return std::all_of(err.begin(), err.end(), [](double e) { return std::isfinite(e) && e > 0.0; });
}

}  // namespace

void FitWindow::validate() const {
  if (!std::isfinite(t_min) || !std::isfinite(t_max) || !(t_min < t_max))
    throw ConfigError("fit window needs t_min < t_max");
}

WindowTable::WindowTable(std::vector<FitWindow> entries) : entries_(std::move(entries)) {
  for (const auto& w : entries_) w.validate();
}

WindowTable WindowTable::defaults() { return WindowTable({{0.0, 8.0, 13.0}, {0.1, 5.0, 7.0}, {0.3, 4.0, 5.0}}); }

std::optional<FitWindow> WindowTable::lookup(double gamma_d) const {
  for (const auto& w : entries_)
    if (std::abs(w.gamma_d - gamma_d) < 1e-9) return w;
  return std::nullopt;
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y, std::span<const double> w) {
  check_sizes(x, y);
  const std::size_t n = x.size();
  if (n < 2) throw DomainError("linear fit needs at least two points");
  const bool weighted = !w.empty();
  if (weighted && w.size() != n) throw DomainError("weights have the wrong length");
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double wk = weighted ? w[k] : 1.0;
    sw += wk;
    sx += wk * x[k];
    sy += wk * y[k];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double wk = weighted ? w[k] : 1.0;
    sxx += wk * (x[k] - mx) * (x[k] - mx);
    sxy += wk * (x[k] - mx) * (y[k] - my);
    syy += wk * (y[k] - my) * (y[k] - my);
  }
  if (!(sxx > 0.0)) throw DomainError("linear fit needs distinct abscissae");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.n_points = static_cast<int>(n);
  double ssr = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double wk = weighted ? w[k] : 1.0;
    const double r = y[k] - fit.intercept - fit.slope * x[k];
    ssr += wk * r * r;
  }
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ssr / syy, 0.0, 1.0) : 1.0;
  return fit;
}

RateFit fit_exponential_decay(std::span<const double> t, std::span<const double> f, const FitWindow& window,
                              std::span<const double> f_err) {
  check_sizes(t, f);
  window.validate();
  const bool weighted = usable_weights(f_err, f.size());
  std::vector<double> x, y, w;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] < window.t_min - kTimeSlack || t[k] > window.t_max + kTimeSlack) continue;
    if (!(f[k] > 0.0)) throw DomainError("F <= 0 inside the fit window");
    x.push_back(t[k]);
    y.push_back(std::log(f[k]));
    if (weighted) w.push_back(f[k] * f[k] / (f_err[k] * f_err[k]));
  }
  if (x.size() < 3) throw DomainError("fit window contains fewer than 3 grid points");
  const LinearFit lf = linear_fit(x, y, w);

  RateFit fit;
  fit.rate = -lf.slope;
  fit.intercept = lf.intercept;
  fit.r_squared = lf.r_squared;
  fit.window = window;
  fit.n_points = lf.n_points;
  if (x.size() > 2) {
    double mx = 0.0;
    for (double v : x) mx += v;
    mx /= static_cast<double>(x.size());
    double sxx = 0.0, ssr = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      sxx += (x[k] - mx) * (x[k] - mx);
      const double r = y[k] - lf.intercept - lf.slope * x[k];
      ssr += r * r;
    }
    fit.rate_stderr = std::sqrt(ssr / static_cast<double>(x.size() - 2) / sxx);
  }
  return fit;
}

FitWindow auto_window(std::span<const double> t, std::span<const double> f, double gamma_d,
                      const AutoWindowOptions& options) {
  check_sizes(t, f);
  const std::size_t n = t.size();
  const int half = std::max(0, options.smoothing / 2);
  auto fallback = [&](const char* why) {
    if (auto w = options.fallback.lookup(gamma_d)) return *w;
    throw DomainError(std::string(why) + "; specify the fit window manually");
  };
  if (n < 10) return fallback("series too short for automatic window selection");

  std::vector<double> slope(n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t k = 1; k + 1 < n; ++k)
    if (f[k - 1] > 0.0 && f[k + 1] > 0.0)
      slope[k] = (std::log(f[k + 1]) - std::log(f[k - 1])) / (t[k + 1] - t[k - 1]);

  std::vector<double> smooth(n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t k = static_cast<std::size_t>(half); k + half < n; ++k) {
    double s = 0.0;
    bool ok = true;
    for (std::size_t j = k - half; j <= k + half; ++j) {
      if (std::isnan(slope[j])) {
        ok = false;
        break;
      }
      s += slope[j];
    }
    if (ok) smooth[k] = s / (2 * half + 1);
  }

  std::size_t best_a = 0, best_b = 0;
  double best_span = -1.0;
  for (std::size_t a = 0; a < n; ++a) {
    if (std::isnan(smooth[a])) continue;
    double sum = 0.0, lo = INFINITY, hi = -INFINITY;
    for (std::size_t b = a; b < n && !std::isnan(smooth[b]); ++b) {
      sum += smooth[b];
      lo = std::min(lo, smooth[b]);
      hi = std::max(hi, smooth[b]);
      const double mean = sum / static_cast<double>(b - a + 1);
      if (!(mean < 0.0) || b == a) continue;
      const double spread = std::max(hi - mean, mean - lo);
      if (spread > options.relative_tolerance * std::abs(mean)) continue;
      const double span = t[b] - t[a];
      if (span + kTimeSlack >= options.min_span && span > best_span + kTimeSlack) {
        best_span = span;
        best_a = a;
        best_b = b;
      }
    }
  }
  if (best_span < 0.0) return fallback("no constant-slope plateau found");
  return FitWindow{gamma_d, t[best_a], t[best_b]};
}

namespace {

struct ArrheniusModel {
  const std::vector<std::pair<double, double>>& data;
  double hz;
  double J;

  bool admissible(const Eigen::Vector3d& p) const {
    for (const auto& [g, rate] : data)
      if (!(p(2) * g + hz > 0.0)) return false;
    return true;
  }
  double value(const Eigen::Vector3d& p, double g) const { return std::exp(p(0) - p(1) * J / (p(2) * g + hz)); }
  Eigen::VectorXd residuals(const Eigen::Vector3d& p) const {
    Eigen::VectorXd r(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) r(i) = data[i].second - value(p, data[i].first);
    return r;
  }
  Eigen::MatrixXd jacobian(const Eigen::Vector3d& p) const {
    Eigen::MatrixXd jac(data.size(), 3);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double g = data[i].first;
      const double den = p(2) * g + hz;
      const double v = value(p, g);
      jac(i, 0) = v;
      jac(i, 1) = -v * J / den;
      jac(i, 2) = v * p(1) * J * g / (den * den);
    }
    return jac;
  }
};

}  // namespace

ArrheniusFit fit_arrhenius(const std::vector<std::pair<double, double>>& rates, double h_z, double J) {
  std::set<double> distinct;
  for (const auto& [g, rate] : rates) {
    if (!(rate > 0.0)) throw DomainError("Arrhenius fit needs positive rates");
    if (!(g >= 0.0)) throw DomainError("Arrhenius fit needs gamma_d >= 0");
    distinct.insert(g);
  }
  if (distinct.size() < 3) throw DomainError("Arrhenius fit needs at least 3 distinct gamma_d values");
  if (h_z <= 0.0 && distinct.count(0.0)) throw DomainError("gamma_d = 0 needs h_z > 0");
  const ArrheniusModel model{rates, h_z, J};

  // Log-linear start: for fixed B, ln gamma = ln C - A u with u = J / (B g + h_z).
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  double best = INFINITY;
  for (int k = 0; k <= 400; ++k) {
    const double b = std::pow(10.0, -4.0 + 7.0 * k / 400.0);
    std::vector<double> u, y;
    for (const auto& [g, rate] : rates) {
      u.push_back(J / (b * g + h_z));
      y.push_back(std::log(rate));
    }
    LinearFit lf;
    try {
      lf = linear_fit(u, y);
    } catch (const DomainError&) {
      continue;
    }
    double ssr = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) ssr += std::pow(y[i] - lf.intercept - lf.slope * u[i], 2);
    if (ssr < best) {
      best = ssr;
      p = Eigen::Vector3d(lf.intercept, -lf.slope, b);
    }
  }
  if (!std::isfinite(best)) throw NumericError("Arrhenius initialization failed");

  double scale = 0.0;
  for (const auto& [g, rate] : rates) scale += rate * rate;
  double lambda = 1e-3;
  Eigen::VectorXd r = model.residuals(p);
  double ssr = r.squaredNorm();
  int it = 0;
  bool converged = false;
  constexpr int kMaxIterations = 1000;
  for (; it < kMaxIterations; ++it) {
    if (ssr <= 1e-30 * scale) {
      converged = true;
      break;
    }
    const Eigen::MatrixXd jac = model.jacobian(p);
    const Eigen::Matrix3d jtj = jac.transpose() * jac;
    const Eigen::Vector3d grad = jac.transpose() * r;
    if (grad.norm() <= 1e-15 * std::sqrt(scale) * jtj.diagonal().cwiseSqrt().maxCoeff()) {
      converged = true;
      break;
    }
    bool accepted = false;
    while (lambda < 1e20) {
      Eigen::Matrix3d a = jtj;
      a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-300);
      const Eigen::Vector3d step = a.ldlt().solve(grad);
      const Eigen::Vector3d trial = p + step;
      if (model.admissible(trial) && trial.allFinite()) {
        const Eigen::VectorXd rt = model.residuals(trial);
        const double st = rt.squaredNorm();
        if (st < ssr) {
          const double rel = step.norm() / (p.norm() + 1e-30);
          p = trial;
          r = rt;
          const double drop = (ssr - st) / std::max(ssr, 1e-300);
          ssr = st;
          lambda = std::max(lambda / 10.0, 1e-15);
          accepted = true;
          if (rel < 1e-13 || drop < 1e-15) converged = true;
          break;
        }
      }
      lambda *= 10.0;
    }
    if (!accepted) {
      // No downhill step at any damping: a (numerical) minimum.
      converged = true;
      break;
    }
    if (converged) break;
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "Arrhenius fit did not converge after " << it << " iterations (ssr=" << ssr << ", ln C=" << p(0)
        << ", A=" << p(1) << ", B=" << p(2) << ")";
    throw NumericError(msg.str());
  }

  ArrheniusFit fit;
  fit.prefactor = std::exp(p(0));
  fit.A = p(1);
  fit.B = p(2);
  fit.iterations = it;
  fit.residuals.assign(r.data(), r.data() + r.size());
  fit.residual_norm = r.norm();
  const std::size_t n = rates.size();
  if (n > 3) {
    const Eigen::MatrixXd jac = model.jacobian(p);
    const Eigen::Matrix3d jtj = jac.transpose() * jac;
    Eigen::FullPivLU<Eigen::Matrix3d> lu(jtj);
    if (lu.isInvertible()) {
      Eigen::Matrix3d cov = (ssr / static_cast<double>(n - 3)) * lu.inverse();
      // Convert the ln C row/column to C.
      cov.row(0) *= fit.prefactor;
      cov.col(0) *= fit.prefactor;
      fit.covariance = cov;
    }
  }
  return fit;
}

LinearFit fit_arrhenius_linearized(const std::vector<std::pair<double, double>>& rates) {
  std::vector<double> x, y;
  for (const auto& [g, rate] : rates) {
    if (!(rate > 0.0)) throw DomainError("linearized Arrhenius fit needs positive rates");
    x.push_back(g);
    y.push_back(g * std::log(rate));
  }
  if (x.size() < 3) throw DomainError("linearized Arrhenius fit needs at least 3 points");
  return linear_fit(x, y);
}

RateFit fit_thermalization_rate(std::span<const double> t, std::span<const double> f, double t_min, double t_max) {
  check_sizes(t, f);
  std::vector<double> x, y;
  int positive = 0, negative = 0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] < t_min - kTimeSlack) continue;
    if (t_max >= 0.0 && t[k] > t_max + kTimeSlack) continue;
    const double d = f[k] - 0.5;
    if (d > 0.0)
      ++positive;
    else if (d < 0.0)
      ++negative;
    else
      throw DomainError("F - 1/2 vanishes in the window; not yet asymptotic");
    x.push_back(t[k]);
    y.push_back(std::log(std::abs(d)));
  }
  if (positive > 0 && negative > 0) throw DomainError("F - 1/2 changes sign in the window; not yet asymptotic");
  if (x.size() < 3) throw DomainError("thermalization fit needs at least 3 points");
  const LinearFit lf = linear_fit(x, y);
  RateFit fit;
  fit.rate = -lf.slope;
  fit.intercept = lf.intercept;
  fit.r_squared = lf.r_squared;
  fit.window = FitWindow{0.0, x.front(), x.back()};
  fit.n_points = lf.n_points;
  return fit;
}

FiniteSizeTable finite_size_scan(const std::vector<int>& sizes, double probe_time,
                                 const std::function<std::pair<double, double>(int)>& probe, double tolerance) {
  FiniteSizeTable table;
  table.probe_time = probe_time;
  for (int L : sizes) {
    const auto [value, err] = probe(L);
    table.rows.push_back({L, value, err});
  }
  for (std::size_t k = 0; k + 1 < table.rows.size(); ++k) {
    if (std::abs(table.rows[k + 1].value - table.rows[k].value) < tolerance) {
      table.converged = true;
      table.converged_at = table.rows[k].L;
      break;
    }
  }
  return table;
}

}  // namespace mcmps
