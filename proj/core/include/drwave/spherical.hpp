#pragma once

#include <complex>
#include <vector>

#include "drwave/space.hpp"

namespace drwave::spherical {

using cplx = std::complex<double>;

// Harish-Chandra c-function
//   c(lambda) = Gamma(n/2) 2^{Q - 2 i lambda} Gamma(2 i lambda)
//               / [ Gamma(i lambda + Q/2) Gamma(i lambda + m/4 + 1/2) ].
// Defined for complex lambda away from the poles 2 i lambda in -N (i.e.
// lambda in (i/2) * {0,-1,-2,...} after rotation); throws SingularityError
// there.  log_c is the overflow-safe form used for large |lambda|.
cplx log_c(const SpaceParams& s, cplx lambda);
cplx c_function(const SpaceParams& s, cplx lambda);

// Plancherel density |c(lambda)|^{-2} for real lambda (even in lambda).
// Vanishes ~ lambda^2 at 0 (returned as the exact limit 0 at lambda = 0)
// and grows ~ lambda^{n-1} at infinity.
double plancherel_density(const SpaceParams& s, double lambda);

// Coefficients of the converging expansion of the spherical function:
//   Gamma_0 = 1,  l (l - 2 i lambda) Gamma_l = sum_{j<l} omega_{l-j} Gamma_j.
// Throws SingularityError if lambda is within 1e-9 of a pole -i l / 2.
std::vector<cplx> gamma_coeffs(const SpaceParams& s, cplx lambda, int lmax);

// Global bound |Gamma_l(lambda)| <= C l^d (1+|lambda|)^{-1}: least-squares fit
// of d on the upper envelope over l <= lmax, lambda in [1, 100], then C as the
// max ratio.  Deterministic for fixed inputs.
struct GammaBoundFit {
  double C = 0.0;
  double d = 0.0;
};
GammaBoundFit fit_gamma_bound(const SpaceParams& s, int lmax = 200);

// Evaluator for the spherical function phi_lambda(r) of a fixed space.
//
// Two branches:
//  * series, r >= r_switch: phi = c(lambda) Phi_lambda + c(-lambda) Phi_{-lambda}
//    with Phi_lambda(r) = 2^{-k/2} V(r)^{-1/2} sum_l Gamma_l(lambda) e^{(i lambda - l) r},
//    truncated at the first l with (1+l)^d e^{-l r} < 1e-14 (cap l <= 5000);
//  * ODE, r < r_switch or |lambda| < lambda_ode_all: integrate
//      phi'' + (V'/V) phi' + (lambda^2 + Q^2/4) phi = 0
//    outward from r0 = 1e-3 (Taylor start phi ~ 1 - (lambda^2+Q^2/4) r^2 / (2n))
//    with a fixed-step 8th-order Runge-Kutta scheme, step 1e-3.
class PhiEvaluator {
 public:
  static constexpr double kRSwitch = 1.0;       // series/ODE branch point
  static constexpr double kOverlapEnd = 2.0;    // agreement window [1, 2]
  static constexpr double kLambdaOdeAll = 0.05; // below: series cancels, use ODE
  static constexpr double kOdeStep = 1e-3;
  static constexpr double kOdeStart = 1e-3;
  static constexpr double kSeriesTol = 1e-14;
  static constexpr int kSeriesCap = 5000;

  explicit PhiEvaluator(const SpaceParams& s);

  const SpaceParams& space() const { return s_; }
  const GammaBoundFit& bound_fit() const { return fit_; }

  // Number of series terms needed at radius r (independent of lambda).
  int series_terms(double r) const;

  // Series branch, real lambda.  Emits the value and the truncation estimate.
  struct SeriesValue {
    cplx big_phi;   // Phi_lambda(r)
    double phi;     // 2 Re[c(lambda) Phi_lambda(r)]
    double trunc;   // size of the first omitted envelope term
    int terms;
  };
  SeriesValue phi_series(double lambda, double r) const;

  // Phi_lambda(r) for complex lambda (series only; r >= r_switch).
  cplx phi_big(cplx lambda, double r) const;

  // ODE branch: phi at each of the ascending radii rs (values >= 0 allowed;
  // r below the Taylor start uses the Taylor polynomial directly).  The step
  // is overridable so convergence under step halving can be measured.
  std::vector<double> phi_ode(double lambda, const std::vector<double>& rs,
                              double step = kOdeStep) const;

  // Hybrid evaluation (the public phi_lambda(r)).
  double operator()(double lambda, double r) const;

  // phi_0(r) = ground spherical function (ODE branch everywhere).
  double phi_zero(double r) const;
  std::vector<double> phi_zero(const std::vector<double>& rs) const;

  // Dense table phi[i][j] = phi_{lambdas[i]}(rs[j]); rs ascending.
  std::vector<std::vector<double>> table(const std::vector<double>& lambdas,
                                         const std::vector<double>& rs) const;

  // Max relative branch disagreement over the overlap window [1, 2]
  // (normalized by e^{-Q r / 2}); used as an internal consistency check.
  double branch_delta(double lambda, int nprobe = 11) const;

 private:
  SpaceParams s_;
  GammaBoundFit fit_;
  double cQ2_;  // Q^2 / 4
};

}  // namespace drwave::spherical
