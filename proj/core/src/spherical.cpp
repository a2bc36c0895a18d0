#include "drwave/spherical.hpp"

#include <boost/numeric/odeint/stepper/runge_kutta_fehlberg78.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "drwave/complex_gamma.hpp"
#include "drwave/errors.hpp"
#include "drwave/quadrature.hpp"

namespace drwave::spherical {

cplx log_c(const SpaceParams& s, cplx lambda) {
  const cplx il(0.0, 1.0);
  const cplx two_il = 2.0 * il * lambda;
  // Poles of Gamma(2 i lambda): 2 i lambda at a nonpositive integer.
  if (std::abs(two_il.imag()) < 1e-9) {
    const double re = two_il.real();
    if (re < 0.5 && std::abs(re - std::round(re)) < 1e-9)
      throw SingularityError("c_function: pole of Gamma(2 i lambda) at lambda = " +
                             std::to_string(lambda.real()) + "+" +
                             std::to_string(lambda.imag()) + "i");
  }
  return log_gamma(0.5 * s.n) + (static_cast<double>(s.Q) - two_il) * M_LN2 +
         log_gamma(two_il) - log_gamma(il * lambda + 0.5 * s.Q) -
         log_gamma(il * lambda + 0.25 * s.m + 0.5);
}

cplx c_function(const SpaceParams& s, cplx lambda) { return std::exp(log_c(s, lambda)); }

double plancherel_density(const SpaceParams& s, double lambda) {
  if (lambda == 0.0) return 0.0;  // |c|^{-2} ~ lambda^2 -> 0
  return std::exp(-2.0 * log_c(s, cplx(std::abs(lambda), 0.0)).real());
}

std::vector<cplx> gamma_coeffs(const SpaceParams& s, cplx lambda, int lmax) {
  if (lmax < 0) throw ValidationError("gamma_coeffs: lmax must be >= 0");
  const OmegaCoeffs om = omega_coeffs(s, std::max(1, lmax));
  std::vector<cplx> g(lmax + 1);
  g[0] = 1.0;
  const cplx two_il = cplx(0.0, 2.0) * lambda;
  for (int l = 1; l <= lmax; ++l) {
    const cplx denom = static_cast<double>(l) * (static_cast<double>(l) - two_il);
    if (std::abs(denom) < 1e-9 * l)
      throw SingularityError("gamma_coeffs: recurrence pole near lambda = -i l / 2, l = " +
                             std::to_string(l));
    cplx acc = 0.0;
    for (int j = 0; j < l; ++j) acc += om.w[l - j - 1] * g[j];
    g[l] = acc / denom;
  }
  return g;
}

GammaBoundFit fit_gamma_bound(const SpaceParams& s, int lmax) {
  if (lmax < 16) throw ValidationError("fit_gamma_bound: lmax must be >= 16");
  // lambda grid: log-spaced over [1, 100].
  std::vector<double> lambdas;
  for (int i = 0; i <= 20; ++i) lambdas.push_back(std::pow(10.0, 2.0 * i / 20.0));
  std::vector<double> env(lmax + 1, 0.0);
  for (double lam : lambdas) {
    const auto g = gamma_coeffs(s, cplx(lam, 0.0), lmax);
    for (int l = 1; l <= lmax; ++l)
      env[l] = std::max(env[l], std::abs(g[l]) * (1.0 + lam));
  }
  // Fit d on the upper envelope for l in [8, lmax] (skips the initial transient).
  std::vector<double> lx, ly;
  for (int l = 8; l <= lmax; ++l) {
    if (env[l] <= 0.0) continue;
    lx.push_back(std::log(static_cast<double>(l)));
    ly.push_back(std::log(env[l]));
  }
  GammaBoundFit fit;
  fit.d = std::max(0.0, quad::fit_line(lx, ly).slope);
  for (int l = 1; l <= lmax; ++l)
    fit.C = std::max(fit.C, env[l] / std::pow(static_cast<double>(l), fit.d));
  fit.C = std::max(fit.C, 1.0);  // Gamma_0 = 1
  return fit;
}

PhiEvaluator::PhiEvaluator(const SpaceParams& s)
    : s_(s), fit_(fit_gamma_bound(s, 200)), cQ2_(0.25 * s.Q * s.Q) {}

int PhiEvaluator::series_terms(double r) const {
  if (r < kRSwitch - 1e-12)
    throw ValidationError("series_terms: series branch requires r >= " +
                          std::to_string(kRSwitch));
  for (int l = 1; l <= kSeriesCap; ++l) {
    if (std::pow(1.0 + l, fit_.d) * std::exp(-l * r) < kSeriesTol) return l;
  }
  throw NumericalError("series_terms: truncation rule not met below the l cap");
}

namespace {

cplx series_sum(const std::vector<cplx>& g, double r, int terms) {
  // sum_{l<terms} Gamma_l e^{-l r}, summed small-to-large for accuracy
  cplx acc = 0.0;
  const double q = std::exp(-r);
  double ql = std::pow(q, terms - 1);
  for (int l = terms - 1; l >= 0; --l) {
    acc += g[l] * ql;
    ql /= q;
  }
  return acc;
}

}  // namespace

PhiEvaluator::SeriesValue PhiEvaluator::phi_series(double lambda, double r) const {
  const int terms = series_terms(r);
  const auto g = gamma_coeffs(s_, cplx(lambda, 0.0), terms);
  const cplx S = series_sum(g, r, terms);
  const double pref = std::exp2(-0.5 * s_.k) / std::sqrt(density(s_, r));
  SeriesValue out;
  out.terms = terms;
  out.big_phi = pref * std::exp(cplx(0.0, lambda * r)) * S;
  const cplx c = c_function(s_, cplx(lambda, 0.0));
  out.phi = 2.0 * (c * out.big_phi).real();
  out.trunc = 2.0 * std::abs(c) * pref * fit_.C *
              std::pow(1.0 + terms, fit_.d) * std::exp(-terms * r) / (1.0 + std::abs(lambda));
  return out;
}

cplx PhiEvaluator::phi_big(cplx lambda, double r) const {
  const int terms = series_terms(r);
  const auto g = gamma_coeffs(s_, lambda, terms);
  cplx acc = 0.0;
  for (int l = terms - 1; l >= 0; --l)
    acc += g[l] * std::exp((cplx(0.0, 1.0) * lambda - static_cast<double>(l)) * r);
  return std::exp2(-0.5 * s_.k) / std::sqrt(density(s_, r)) * acc;
}

std::vector<double> PhiEvaluator::phi_ode(double lambda, const std::vector<double>& rs,
                                          double step) const {
  for (std::size_t i = 0; i + 1 < rs.size(); ++i)
    if (!(rs[i] <= rs[i + 1])) throw ValidationError("phi_ode: radii must be ascending");
  if (!rs.empty() && rs.front() < 0.0) throw ValidationError("phi_ode: radii must be >= 0");
  if (!(step > 0.0)) throw ValidationError("phi_ode: step must be > 0");

  const double c = lambda * lambda + cQ2_;
  std::vector<double> out(rs.size());

  auto taylor = [&](double r) { return 1.0 - c * r * r / (2.0 * s_.n); };

  using state = std::array<double, 2>;
  auto rhs = [&](const state& y, state& dy, double r) {
    dy[0] = y[1];
    dy[1] = -log_density_derivative(s_, r) * y[1] - c * y[0];
  };
  boost::numeric::odeint::runge_kutta_fehlberg78<state> stepper;

  state y{taylor(kOdeStart), -c * kOdeStart / s_.n};
  double r = kOdeStart;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    const double target = rs[i];
    if (target <= kOdeStart) {
      out[i] = taylor(target);
      continue;
    }
    while (target - r > step * (1.0 + 1e-12)) {
      stepper.do_step(rhs, y, r, step);
      r += step;
    }
    if (target - r > 1e-15) {
      stepper.do_step(rhs, y, r, target - r);
      r = target;
    }
    out[i] = y[0];
  }
  return out;
}

double PhiEvaluator::operator()(double lambda, double r) const {
  lambda = std::abs(lambda);  // phi is even in lambda (real lambda)
  if (r < kRSwitch || lambda < kLambdaOdeAll) return phi_ode(lambda, {r})[0];
  return phi_series(lambda, r).phi;
}

double PhiEvaluator::phi_zero(double r) const { return phi_ode(0.0, {r})[0]; }

std::vector<double> PhiEvaluator::phi_zero(const std::vector<double>& rs) const {
  return phi_ode(0.0, rs);
}

std::vector<std::vector<double>> PhiEvaluator::table(const std::vector<double>& lambdas,
                                                     const std::vector<double>& rs) const {
  for (std::size_t i = 0; i + 1 < rs.size(); ++i)
    if (!(rs[i] <= rs[i + 1])) throw ValidationError("table: radii must be ascending");
  std::vector<std::vector<double>> tab(lambdas.size(), std::vector<double>(rs.size()));

  // Radii below the branch point (evaluated by one ODE sweep per lambda).
  std::size_t n_ode_base = 0;
  while (n_ode_base < rs.size() && rs[n_ode_base] < kRSwitch) ++n_ode_base;

  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    const double lam = std::abs(lambdas[i]);
    const std::size_t n_ode = (lam < kLambdaOdeAll) ? rs.size() : n_ode_base;
    if (n_ode > 0) {
      const std::vector<double> head(rs.begin(), rs.begin() + n_ode);
      const auto vals = phi_ode(lam, head);
      std::copy(vals.begin(), vals.end(), tab[i].begin());
    }
    if (n_ode < rs.size()) {
      // One Gamma table per lambda, reused across radii.
      const int terms_max = series_terms(rs[n_ode]);
      const auto g = gamma_coeffs(s_, cplx(lam, 0.0), terms_max);
      const cplx c = c_function(s_, cplx(lam, 0.0));
      const double p2 = std::exp2(-0.5 * s_.k);
      for (std::size_t j = n_ode; j < rs.size(); ++j) {
        const double r = rs[j];
        const cplx S = series_sum(g, r, std::min(terms_max, series_terms(r)));
        const double pref = p2 / std::sqrt(density(s_, r));
        tab[i][j] = 2.0 * (c * std::exp(cplx(0.0, lam * r)) * S * pref).real();
      }
    }
  }
  return tab;
}

double PhiEvaluator::branch_delta(double lambda, int nprobe) const {
  if (nprobe < 2) throw ValidationError("branch_delta: nprobe must be >= 2");
  std::vector<double> rs(nprobe);
  for (int i = 0; i < nprobe; ++i)
    rs[i] = kRSwitch + (kOverlapEnd - kRSwitch) * i / (nprobe - 1);
  const auto ode = phi_ode(std::abs(lambda), rs);
  double delta = 0.0;
  for (int i = 0; i < nprobe; ++i) {
    const double ser = phi_series(std::abs(lambda), rs[i]).phi;
    const double scale = (1.0 + rs[i]) * std::exp(-0.5 * s_.Q * rs[i]);
    delta = std::max(delta, std::abs(ser - ode[i]) / scale);
  }
  return delta;
}

}  // namespace drwave::spherical
