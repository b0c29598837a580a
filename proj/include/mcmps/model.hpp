#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace mcmps {

using cplx = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;

/// Couplings of the monitored Ising chain
///   H = -sum_i J sz_i sz_{i+1} - sum_i (hx sx_i + hz sz_i),  open boundary,
/// with local dephasing jumps n_i = (sz_i + 1)/2 at rate gamma_d.
/// Energies are in units where J sets the time unit 1/J.
struct ModelParams {
  double J = 1.0;
  double hx = 0.0;
  double hz = 0.0;
  double gamma_d = 0.0;
  int L = 2;

  /// Throws ConfigError when J <= 0, L < 2, gamma_d < 0 or a field is not finite.
  void validate() const;

  ModelParams with_hz(double new_hz) const {
    ModelParams p = *this;
    p.hz = new_hz;
    return p;
  }
  ModelParams with_gamma(double g) const {
    ModelParams p = *this;
    p.gamma_d = g;
    return p;
  }
};

/// Local basis is (|up>, |down>): sz = diag(1, -1).
namespace pauli {
Mat2 identity();
Mat2 x();
Mat2 y();
Mat2 z();
}  // namespace pauli

/// Two-site operator on (left, right); row index 2*s_left + s_right.
Mat4 kron(const Mat2& left, const Mat2& right);

/// Bond term acting on sites (site, site+1), 0-based.
struct TwoSiteBlock {
  int site = 0;
  Mat4 matrix = Mat4::Zero();
};

/// Jump operator n = (sz + 1)/2 = diag(1, 0).
Mat2 jump_operator();

/// Local (on-site) part of H_eff: -hx sx - hz sz - i gamma_d/2 n (dissipative part optional).
Mat2 onsite_term(const ModelParams& params, bool include_dissipation);

/// Splits H_eff into L-1 nearest-neighbour blocks.
///
/// Each block carries the full bond coupling -J sz sz. On-site terms are shared
/// between the two blocks touching a site with weight 1/2; the end sites 0 and
/// L-1 belong to a single block and keep weight 1. With this convention the sum
/// of the embedded blocks reproduces H - i gamma_d/2 sum_i n_i exactly.
std::vector<TwoSiteBlock> build_effective_blocks(const ModelParams& params,
                                                 bool include_dissipation);

/// Energy cost 2m - (ell - 1) 2 hz M of a true-vacuum bubble of ell sites.
double bubble_energy(double kink_mass, double ell, double hz, double magnetization);

/// Bubble size 1 + m/(hz M) at which bubble_energy vanishes.
double resonant_bubble_size(double kink_mass, double hz, double magnetization);

/// Closed-chain decay rate per site (pi/9) hz M exp(-q/hz); q is an input.
double fvd_rate_closed(double hz, double magnetization, double q);

/// Asymptotic thermalization rate 8 hx^2 / gamma_d in the Zeno regime.
double zeno_rate(double hx, double gamma_d);

/// Zero-field ferromagnetic order parameter (1 - hx^2)^(1/8), J = 1.
double equilibrium_magnetization(double hx);

}  // namespace mcmps
