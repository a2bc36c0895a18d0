#pragma once

#include <array>
#include <complex>
#include <vector>

namespace drwave::quad {

// 16-point Gauss-Legendre rule on [-1, 1].
extern const std::array<double, 16> kGlNodes;
extern const std::array<double, 16> kGlWeights;

// Node/weight set of a composite GL16 rule.
struct NodeSet {
  std::vector<double> x;
  std::vector<double> w;
  std::size_t size() const { return x.size(); }
};

// Panel edges covering [a, b]: uniform panels of width <= max_width between
// consecutive alignment points.  Alignment points inside (a, b) always land on
// panel edges (used to keep piecewise-smooth integrands analytic per panel).
std::vector<double> make_edges(double a, double b, double max_width,
                               const std::vector<double>& align = {});

// Panel edges for slowly decaying tails: the width starts at `base` and grows
// geometrically by `growth` per panel, but never exceeds `cap` (typically the
// half-oscillation bound pi/(2|x|)).  Alignment points are honored by
// restarting the growth at each of them.
std::vector<double> make_tail_edges(double a, double b, double base, double growth,
                                    double cap, const std::vector<double>& align = {});

NodeSet gl_nodes(const std::vector<double>& edges);

template <class F>
double integrate(const NodeSet& ns, F&& f) {
  double acc = 0.0;
  for (std::size_t i = 0; i < ns.x.size(); ++i) acc += ns.w[i] * f(ns.x[i]);
  return acc;
}

template <class F>
std::complex<double> integrate_c(const NodeSet& ns, F&& f) {
  std::complex<double> acc = 0.0;
  for (std::size_t i = 0; i < ns.x.size(); ++i) acc += ns.w[i] * f(ns.x[i]);
  return acc;
}

// C^infinity taper: 1 for u <= 0, 0 for u >= 1, all derivatives vanish at both
// ends (exp(-1/x) partition of unity).  Used to cut off slowly decaying
// oscillatory spectral integrands without ringing.
double smooth_taper(double u);

// Quintic smoothstep 6t^5 - 15t^4 + 10t^3 clamped to [0, 1]; C^2 at the ends.
double smoothstep5(double t);

// Low-frequency cutoff: 1 on [0, 1], 0 on [2, inf), C^infinity ramp on (1, 2).
// Full smoothness matters: a cutoff with a derivative jump of order p adds a
// spurious |t|^{-p-1} e^{i lambda t} term to every spectral integral it
// truncates, and for the propagator kernels that term would dominate the
// genuine lambda = 0 endpoint asymptotics throughout the verification window.
inline double chi0(double lambda) { return smooth_taper(lambda - 1.0); }
// Complementary high-frequency cutoff.
inline double chi_inf(double lambda) { return 1.0 - smooth_taper(lambda - 1.0); }

// Least-squares fit y = intercept + slope * x.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double resid_max = 0.0;  // max |y - fit|
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace drwave::quad
