#include "drwave/space.hpp"

#include <cmath>
#include <string>

#include "drwave/errors.hpp"

namespace drwave {

SpaceParams make_space(int m, int k, double Qtilde) {
  if (m < 2 || m % 2 != 0)
    throw ValidationError("make_space: m must be an even integer >= 2, got m=" + std::to_string(m));
  if (k < 1)
    throw ValidationError("make_space: k must be an integer >= 1, got k=" + std::to_string(k));
  SpaceParams s;
  s.m = m;
  s.k = k;
  s.n = m + k + 1;
  s.Q = m / 2 + k;
  s.Qtilde = (Qtilde <= 0.0) ? s.Q + 1.0 : Qtilde;
  if (s.Qtilde <= s.Q)
    throw ValidationError("make_space: Qtilde must exceed Q=" + std::to_string(s.Q));
  return s;
}

double density(const SpaceParams& s, double r) {
  if (r < 0.0) throw ValidationError("density: r must be >= 0");
  // Work in logs for large r; V ~ 2^{-k} e^{Qr} so no overflow below r ~ 700/Q,
  // but sinh^{m+k} overflows much earlier when composed naively.
  if (r == 0.0) return 0.0;
  const double ls = std::log(std::sinh(r / 2)), lc = std::log(std::cosh(r / 2));
  return std::exp((s.m + s.k) * (M_LN2 + ls) + s.k * lc);
}

double log_density_derivative(const SpaceParams& s, double r) {
  if (r <= 0.0) throw ValidationError("log_density_derivative: r must be > 0");
  return 0.5 * (s.m + s.k) / std::tanh(r / 2) + 0.5 * s.k * std::tanh(r / 2);
}

double omega(const SpaceParams& s, double r) {
  if (r <= 0.0) throw ValidationError("omega: r must be > 0");
  const double sh2 = std::sinh(r / 2), sh = std::sinh(r);
  const double c1 = 0.25 * (s.m / 2.0) * (s.Q - 1.0);
  const double c2 = 0.5 * s.k * (0.5 * s.k - 1.0);
  return c1 / (sh2 * sh2) + c2 / (sh * sh);
}

double OmegaCoeffs::coeff(int j) const {
  if (j < 1) throw ValidationError("OmegaCoeffs::coeff: j must be >= 1");
  double v = a * j;
  if (j % 2 == 0) v += b * j;
  return v;
}

OmegaCoeffs omega_coeffs(const SpaceParams& s, int jmax) {
  if (jmax < 1) throw ValidationError("omega_coeffs: jmax must be >= 1");
  OmegaCoeffs oc;
  oc.a = (s.m / 2.0) * (s.Q - 1.0);
  oc.b = 0.5 * s.k * (s.k - 2.0);
  oc.w.resize(jmax);
  for (int j = 1; j <= jmax; ++j) oc.w[j - 1] = oc.coeff(j);
  return oc;
}

}  // namespace drwave
