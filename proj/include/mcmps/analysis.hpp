#pragma once

#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace mcmps {

struct FitWindow {
  double gamma_d = 0.0;
  double t_min = 0.0;
  double t_max = 0.0;

  void validate() const;
};

/// Default windows for the fidelity decay, keyed by gamma_d:
/// 0 -> [8, 13], 0.1 -> [5, 7], 0.3 -> [4, 5].
class WindowTable {
 public:
  WindowTable() = default;
  explicit WindowTable(std::vector<FitWindow> entries);
  static WindowTable defaults();

  /// Exact gamma_d match within 1e-9.
  std::optional<FitWindow> lookup(double gamma_d) const;
  const std::vector<FitWindow>& entries() const { return entries_; }

 private:
  std::vector<FitWindow> entries_;
};

struct RateFit {
  double rate = 0.0;       // -slope of ln F
  double intercept = 0.0;
  double r_squared = 0.0;
  double rate_stderr = 0.0;
  FitWindow window;
  int n_points = 0;
};

/// Least squares of ln F against t over grid points inside [t_min, t_max].
/// Optional per-point standard errors of F switch to weights F^2 / err^2.
RateFit fit_exponential_decay(std::span<const double> t, std::span<const double> f, const FitWindow& window,
                              std::span<const double> f_err = {});

struct AutoWindowOptions {
  double min_span = 1.0;
  double relative_tolerance = 0.15;
  int smoothing = 5;
  WindowTable fallback = WindowTable::defaults();
};

/// Longest interval whose smoothed local slope of ln F stays within the
/// relative tolerance of its mean. Falls back to the table entry for gamma_d.
FitWindow auto_window(std::span<const double> t, std::span<const double> f, double gamma_d,
                      const AutoWindowOptions& options = {});

struct ArrheniusFit {
  double A = 0.0;
  double B = 0.0;
  double prefactor = 0.0;  // C in gamma = C exp[-A J / (B gamma_d + h_z)]
  double residual_norm = 0.0;
  std::vector<double> residuals;
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Constant(std::numeric_limits<double>::quiet_NaN());
  int iterations = 0;
};

/// Levenberg-Marquardt on gamma_i - C exp[-A J / (B g_i + h_z)] over (ln C, A, B),
/// started from the best log-linear fit on a grid of B values.
ArrheniusFit fit_arrhenius(const std::vector<std::pair<double, double>>& rates, double h_z, double J = 1.0);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  int n_points = 0;
};

LinearFit linear_fit(std::span<const double> x, std::span<const double> y, std::span<const double> w = {});

/// h_z = 0 form: gamma_d ln gamma = gamma_d ln C - A J / B is a straight line in gamma_d.
/// Slope ln C, intercept -A J / B (only the ratio A/B is identifiable).
LinearFit fit_arrhenius_linearized(const std::vector<std::pair<double, double>>& rates);

/// Rate of |F - 1/2| ~ exp(-gamma_th t) for t in [t_min, t_max] (t_max < 0: to the end).
RateFit fit_thermalization_rate(std::span<const double> t, std::span<const double> f, double t_min,
                                double t_max = -1.0);

struct FiniteSizeRow {
  int L = 0;
  double value = 0.0;
  double stderr_ = 0.0;
};

struct FiniteSizeTable {
  double probe_time = 0.0;
  std::vector<FiniteSizeRow> rows;
  bool converged = false;
  int converged_at = 0;  // first L whose value differs from the next one by < tolerance
};

/// Runs `probe` (returning F(probe_time) and its standard error) for each L in order.
FiniteSizeTable finite_size_scan(const std::vector<int>& sizes, double probe_time,
                                 const std::function<std::pair<double, double>(int)>& probe, double tolerance);

}  // namespace mcmps
