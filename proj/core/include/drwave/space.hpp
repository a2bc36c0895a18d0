#pragma once

#include <vector>

namespace drwave {

// Parameters of a Damek-Ricci space S = N x R^+ built over an H-type group N
// whose Lie algebra splits as v + z with dim v = m (even) and dim z = k.
//
//   n = m + k + 1      manifold dimension (always >= 4)
//   Q = m/2 + k        homogeneous dimension of N; integer because m is even
//   Qtilde > Q         spectral shift parameter of the regularized operator
struct SpaceParams {
  int m = 0;
  int k = 0;
  int n = 0;
  int Q = 0;
  double Qtilde = 0.0;
};

// Validates (m, k) and fills the derived fields.  Qtilde <= 0 selects the
// default Q + 1.  Throws ValidationError on m odd, m < 2, k < 1, or
// Qtilde <= Q.
SpaceParams make_space(int m, int k, double Qtilde = 0.0);

// Volume density V(r) = 2^{m+k} sinh^{m+k}(r/2) cosh^k(r/2) of the geodesic
// sphere of radius r (up to the angular measure).  r >= 0.
double density(const SpaceParams& s, double r);

// V'(r)/V(r) = (m+k)/2 coth(r/2) + k/2 tanh(r/2).  Diverges ~ (n-1)/r at 0;
// r must be > 0.
double log_density_derivative(const SpaceParams& s, double r);

// Shifted-wave potential
//   omega(r) = 1/4 (m/2)(Q-1) sinh(r/2)^{-2} + (k/2)(k/2-1) sinh(r)^{-2},
// i.e. the function with V^{-1/2} (V^{1/2})'' - Q^2/4 = omega.  r > 0.
double omega(const SpaceParams& s, double r);

// Coefficients of the expansion omega(r) = sum_{j>=1} omega_j e^{-j r}.
// Every omega_j is an exact multiple of 1/2, hence exact in double:
//   omega_j = (m/2)(Q-1) j + [j even] (k^2-2k)/2 * j.
struct OmegaCoeffs {
  std::vector<double> w;      // w[j-1] = omega_j
  double a = 0.0;             // (m/2)(Q-1), multiplies j for every j
  double b = 0.0;             // k(k-2)/2,  multiplies j for even j only
  double coeff(int j) const;  // omega_j for any j >= 1 (closed form)
};

// First jmax coefficients. jmax >= 1.
OmegaCoeffs omega_coeffs(const SpaceParams& s, int jmax);

}  // namespace drwave
