#include "mcmps/model.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "mcmps/errors.hpp"

namespace mcmps {

void ModelParams::validate() const {
  if (!(J > 0.0) || !std::isfinite(J)) throw ConfigError("J must be finite and > 0");
  if (L < 2) throw ConfigError("chain length L must be >= 2, got " + std::to_string(L));
  if (!(gamma_d >= 0.0) || !std::isfinite(gamma_d)) throw ConfigError("gamma_d must be finite and >= 0");
  if (!std::isfinite(hx) || !std::isfinite(hz)) throw ConfigError("fields hx, hz must be finite");
}

namespace pauli {
Mat2 identity() { return Mat2::Identity(); }
Mat2 x() {
  Mat2 m;
  m << 0, 1, 1, 0;
  return m;
}
Mat2 y() {
  Mat2 m;
  m << 0, cplx(0, -1), cplx(0, 1), 0;
  return m;
}
Mat2 z() {
  Mat2 m;
  m << 1, 0, 0, -1;
  return m;
}
}  // namespace pauli

Mat4 kron(const Mat2& left, const Mat2& right) {
  Mat4 out;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c)
        for (int d = 0; d < 2; ++d) out(2 * a + c, 2 * b + d) = left(a, b) * right(c, d);
  return out;
}

Mat2 jump_operator() {
  Mat2 n = Mat2::Zero();
  n(0, 0) = 1.0;
  return n;
}

Mat2 onsite_term(const ModelParams& params, bool include_dissipation) {
  Mat2 h = -params.hx * pauli::x() - params.hz * pauli::z();
  if (include_dissipation) h += cplx(0.0, -0.5 * params.gamma_d) * jump_operator();
  return h;
}

std::vector<TwoSiteBlock> build_effective_blocks(const ModelParams& params,
                                                 bool include_dissipation) {
  params.validate();
  const int L = params.L;
  const Mat2 id = pauli::identity();
  const Mat2 onsite = onsite_term(params, include_dissipation);
  const Mat4 coupling = -params.J * kron(pauli::z(), pauli::z());

  std::vector<TwoSiteBlock> blocks;
  blocks.reserve(L - 1);
  for (int i = 0; i + 1 < L; ++i) {
    const double w_left = (i == 0) ? 1.0 : 0.5;
    const double w_right = (i + 1 == L - 1) ? 1.0 : 0.5;
    TwoSiteBlock b;
    b.site = i;
    b.matrix = coupling + w_left * kron(onsite, id) + w_right * kron(id, onsite);
    blocks.push_back(b);
  }
  return blocks;
}

double bubble_energy(double kink_mass, double ell, double hz, double magnetization) {
  if (ell < 1.0) throw DomainError("bubble size must be >= 1");
  return 2.0 * kink_mass - (ell - 1.0) * 2.0 * hz * magnetization;
}

double resonant_bubble_size(double kink_mass, double hz, double magnetization) {
  const double denom = hz * magnetization;
  if (denom == 0.0) throw DomainError("resonant bubble size needs hz * M != 0");
  return 1.0 + kink_mass / denom;
}

double fvd_rate_closed(double hz, double magnetization, double q) {
  if (!(hz > 0.0)) throw DomainError("closed-chain decay rate needs hz > 0");
  return std::numbers::pi / 9.0 * hz * magnetization * std::exp(-q / hz);
}

double zeno_rate(double hx, double gamma_d) {
  if (!(gamma_d > 0.0)) throw DomainError("Zeno rate needs gamma_d > 0");
  return 8.0 * hx * hx / gamma_d;
}

double equilibrium_magnetization(double hx) {
  if (!(std::abs(hx) < 1.0)) throw DomainError("|hx| >= 1 is the paramagnetic phase");
  return std::pow(1.0 - hx * hx, 0.125);
}

}  // namespace mcmps
