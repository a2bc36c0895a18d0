#include "drwave/quadrature.hpp"

#include <algorithm>
#include <cmath>

#include "drwave/errors.hpp"

namespace drwave::quad {

namespace {
// Positive abscissae / weights of the 16-point Gauss-Legendre rule.
constexpr double kA[8] = {
    0.0950125098376374401853193, 0.2816035507792589132304605,
    0.4580167776572273863424194, 0.6178762444026437484466718,
    0.7554044083550030338951012, 0.8656312023878317438804679,
    0.9445750230732325760779884, 0.9894009349916499325961542};
constexpr double kW[8] = {
    0.1894506104550684962853967, 0.1826034150449235888667637,
    0.1691565193950025381893121, 0.1495959888165767320815017,
    0.1246289712555338720524763, 0.0951585116824927848099251,
    0.0622535239386478928628438, 0.0271524594117540948517806};

std::array<double, 16> full_nodes() {
  std::array<double, 16> r{};
  for (int i = 0; i < 8; ++i) {
    r[i] = -kA[7 - i];
    r[8 + i] = kA[i];
  }
  return r;
}
std::array<double, 16> full_weights() {
  std::array<double, 16> r{};
  for (int i = 0; i < 8; ++i) {
    r[i] = kW[7 - i];
    r[8 + i] = kW[i];
  }
  return r;
}
}  // namespace

const std::array<double, 16> kGlNodes = full_nodes();
const std::array<double, 16> kGlWeights = full_weights();

std::vector<double> make_edges(double a, double b, double max_width,
                               const std::vector<double>& align) {
  if (!(b > a)) throw ValidationError("make_edges: need b > a");
  if (!(max_width > 0.0)) throw ValidationError("make_edges: need max_width > 0");
  std::vector<double> marks{a, b};
  for (double p : align)
    if (p > a && p < b) marks.push_back(p);
  std::sort(marks.begin(), marks.end());
  marks.erase(std::unique(marks.begin(), marks.end()), marks.end());

  std::vector<double> edges;
  edges.push_back(a);
  for (std::size_t i = 0; i + 1 < marks.size(); ++i) {
    const double lo = marks[i], hi = marks[i + 1];
    const int np = std::max(1, static_cast<int>(std::ceil((hi - lo) / max_width - 1e-12)));
    for (int j = 1; j <= np; ++j) edges.push_back(lo + (hi - lo) * j / np);
  }
  return edges;
}

std::vector<double> make_tail_edges(double a, double b, double base, double growth,
                                    double cap, const std::vector<double>& align) {
  if (!(b > a)) throw ValidationError("make_tail_edges: need b > a");
  if (!(base > 0.0) || !(cap > 0.0)) throw ValidationError("make_tail_edges: need base, cap > 0");
  if (!(growth >= 1.0)) throw ValidationError("make_tail_edges: need growth >= 1");
  std::vector<double> marks{a, b};
  for (double p : align)
    if (p > a && p < b) marks.push_back(p);
  std::sort(marks.begin(), marks.end());
  marks.erase(std::unique(marks.begin(), marks.end()), marks.end());

  std::vector<double> edges;
  edges.push_back(a);
  for (std::size_t i = 0; i + 1 < marks.size(); ++i) {
    const double hi = marks[i + 1];
    double w = std::min(base, cap);
    double x = marks[i];
    while (x < hi - 1e-12 * (1.0 + std::abs(hi))) {
      x = std::min(x + w, hi);
      edges.push_back(x);
      w = std::min(w * growth, cap);
    }
    edges.back() = hi;
  }
  return edges;
}

NodeSet gl_nodes(const std::vector<double>& edges) {
  NodeSet ns;
  if (edges.size() < 2) throw ValidationError("gl_nodes: need at least one panel");
  ns.x.reserve(16 * (edges.size() - 1));
  ns.w.reserve(16 * (edges.size() - 1));
  for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
    const double mid = 0.5 * (edges[p] + edges[p + 1]);
    const double hw = 0.5 * (edges[p + 1] - edges[p]);
    for (int i = 0; i < 16; ++i) {
      ns.x.push_back(mid + hw * kGlNodes[i]);
      ns.w.push_back(hw * kGlWeights[i]);
    }
  }
  return ns;
}

double smooth_taper(double u) {
  if (u <= 0.0) return 1.0;
  if (u >= 1.0) return 0.0;
  const double f1 = std::exp(-1.0 / (1.0 - u));
  const double f0 = std::exp(-1.0 / u);
  return f1 / (f0 + f1);
}

double smoothstep5(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t * t * t * (t * (6.0 * t - 15.0) + 10.0);
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw ValidationError("fit_line: need two same-length samples of size >= 2");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double det = n * sxx - sx * sx;
  if (det == 0.0) throw ValidationError("fit_line: degenerate abscissae");
  LineFit f;
  f.slope = (n * sxy - sx * sy) / det;
  f.intercept = (sy - f.slope * sx) / n;
  for (std::size_t i = 0; i < x.size(); ++i)
    f.resid_max = std::max(f.resid_max, std::abs(y[i] - f.intercept - f.slope * x[i]));
  return f;
}

}  // namespace drwave::quad
