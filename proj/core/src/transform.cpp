#include "drwave/transform.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "drwave/errors.hpp"
#include "drwave/quadrature.hpp"

namespace drwave::transform {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kPanelCap = 100000;  // oscillatory resolution cap

void write_csv(const std::string& path, const SpaceParams& s, const char* abscissa,
               const std::vector<double>& x, const std::vector<cplx>& v) {
  std::ofstream out(path);
  if (!out) throw ValidationError("save_csv: cannot open '" + path + "' for writing");
  char buf[128];
  std::snprintf(buf, sizeof buf, "# space m=%d k=%d qtilde=%.17g\n", s.m, s.k, s.Qtilde);
  out << buf << abscissa << ",value_re,value_im\n";
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", x[i], v[i].real(), v[i].imag());
    out << buf;
  }
  if (!out.good()) throw NumericalError("save_csv: write to '" + path + "' failed");
}

struct CsvTable {
  SpaceParams space;
  std::vector<double> x;
  std::vector<cplx> v;
};

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("load_csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("load_csv: empty file " + path);
  int m = 0, k = 0;
  double qt = 0.0;
  if (std::sscanf(line.c_str(), "# space m=%d k=%d qtilde=%lf", &m, &k, &qt) != 3)
    throw ValidationError("load_csv: missing '# space m=.. k=.. qtilde=..' header in " + path);
  CsvTable t{make_space(m, k, qt), {}, {}};
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    double a, re, im;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &a, &re, &im) != 3) {
      if (t.x.empty()) continue;  // column-name header row
      throw ValidationError("load_csv: malformed row '" + line + "' in " + path);
    }
    t.x.push_back(a);
    t.v.emplace_back(re, im);
  }
  if (t.x.empty()) throw ValidationError("load_csv: no data rows in " + path);
  return t;
}

void check_grid_match(const std::vector<double>& a, const std::vector<double>& b,
                      const char* what) {
  if (a.size() != b.size())
    throw ValidationError(std::string(what) + ": profile grid does not match the transform grid");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) > 1e-9)
      throw ValidationError(std::string(what) + ": profile grid does not match the transform grid");
}

void check_space_match(const SpaceParams& a, const SpaceParams& b, const char* what) {
  if (a.m != b.m || a.k != b.k || a.Qtilde != b.Qtilde)
    throw ValidationError(std::string(what) + ": profile space does not match the transform space");
}

// Max |v| over grid window [lo, hi] and the abscissa where it is attained.
std::pair<double, double> window_max(const std::vector<double>& x, const std::vector<cplx>& v,
                                     double lo, double hi) {
  double best = 0.0, pos = 0.5 * (lo + hi);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < lo || x[i] > hi) continue;
    const double a = std::abs(v[i]);
    if (a > best) {
      best = a;
      pos = x[i];
    }
  }
  return {best, pos};
}

// Tail energy int_end^inf amp^2 e^{-2 rate (x-end)} * rho_end e^{growth (x-end)} dx
// for a fitted per-sample decay; infinite when decay loses to the growth.
double tail_energy(double amp, double rate, double growth, double rho_end) {
  if (!(rate > 0.0)) return kInf;
  const double d = 2.0 * rate - growth;
  if (d <= 1e-12) return kInf;
  return amp * amp * rho_end / d;
}

double fd1(const std::function<double(double)>& f, double s, double h) {
  return (f(s - 2 * h) - 8 * f(s - h) + 8 * f(s + h) - f(s + 2 * h)) / (12 * h);
}

// p-th derivative of csch at x, p <= 4 (polynomials in csch and coth).
double cschd(int p, double x) {
  const double c = 1.0 / std::sinh(x), t = 1.0 / std::tanh(x), c2 = c * c;
  switch (p) {
    case 0: return c;
    case 1: return -c * t;
    case 2: return c + 2.0 * c * c2;
    case 3: return -t * (c + 6.0 * c * c2);
    case 4: return c * (1.0 + c2 * (20.0 + 24.0 * c2));
    default: throw ValidationError("abel_inverse: csch derivative order > 4 unsupported");
  }
}

using Stage = std::function<double(double, int)>;

// Wrap a stage with D = -(1/sinh(alpha s)) d/ds, propagating derivatives via
// the Leibniz rule: (q * inner')^{(j)} = sum_i C(j,i) q^{(j-i)} inner^{(i+1)}
// with q = 1/sinh(alpha s).
Stage apply_d(Stage inner, double alpha) {
  return [inner = std::move(inner), alpha](double s, int j) {
    static const double binom[5][5] = {{1, 0, 0, 0, 0},
                                       {1, 1, 0, 0, 0},
                                       {1, 2, 1, 0, 0},
                                       {1, 3, 3, 1, 0},
                                       {1, 4, 6, 4, 1}};
    if (j > 4) throw ValidationError("abel_inverse: operator depth > 5 unsupported");
    double acc = 0.0;
    for (int i = 0; i <= j; ++i)
      acc += binom[j][i] * std::pow(alpha, j - i) * cschd(j - i, alpha * s) * inner(s, i + 1);
    return -acc;
  };
}

Stage base_stage(const SmoothEven& g) {
  if (g.deriv) {
    return [value = g.value, deriv = g.deriv](double s, int j) {
      return j == 0 ? value(s) : deriv(s, j);
    };
  }
  // Finite-difference fallback: iterated 5-point stencils, step 1e-3.
  const double h = 1e-3;
  std::function<double(double, int)> fd = [value = g.value, h](double s, int j) {
    std::function<double(double, int)> self = [&](double x, int ord) -> double {
      if (ord == 0) return value(x);
      return fd1([&](double y) { return self(y, ord - 1); }, x, h);
    };
    return self(s, j);
  };
  return fd;
}

Stage build_chain(const SpaceParams& s, const SmoothEven& g) {
  const int n1 = (s.k % 2 == 0) ? s.k / 2 : (s.k + 1) / 2;  // D1 count
  const int n2 = s.m / 2;                                   // D2 count
  if (n1 + n2 > 5)
    throw ValidationError("abel_inverse: operator depth m/2 + ceil(k/2) > 5 unsupported");
  Stage st = base_stage(g);
  for (int i = 0; i < n2; ++i) st = apply_d(std::move(st), 0.5);
  for (int i = 0; i < n1; ++i) st = apply_d(std::move(st), 1.0);
  return st;
}

}  // namespace

void save_csv(const RadialProfile& f, const std::string& path) {
  write_csv(path, f.space, "r", f.rgrid, f.values);
}
void save_csv(const SpectralProfile& g, const std::string& path) {
  write_csv(path, g.space, "lambda", g.lgrid, g.values);
}
RadialProfile load_radial_csv(const std::string& path) {
  CsvTable t = read_csv(path);
  return RadialProfile{std::move(t.x), std::move(t.v), t.space};
}
SpectralProfile load_spectral_csv(const std::string& path) {
  CsvTable t = read_csv(path);
  return SpectralProfile{std::move(t.x), std::move(t.v), t.space};
}

SphericalTransform::SphericalTransform(const SpaceParams& s, const TransformConfig& cfg)
    : s_(s), cfg_(cfg), phi_(s) {
  if (!(cfg.rmax > 0.0) || !(cfg.lmax > 0.0) || !(cfg.r_panel > 0.0))
    throw ValidationError("SphericalTransform: rmax, lmax, r_panel must be positive");
  const double lw = cfg.l_panel > 0.0
                        ? cfg.l_panel
                        : std::min(0.1, M_PI / (2.0 * (1.0 + cfg.rmax)));
  auto rns = quad::gl_nodes(quad::make_edges(0.0, cfg.rmax, cfg.r_panel));
  auto lns = quad::gl_nodes(quad::make_edges(0.0, cfg.lmax, lw));
  rg_ = std::move(rns.x);
  rw_ = std::move(rns.w);
  lg_ = std::move(lns.x);
  lw_ = std::move(lns.w);
  vol_.reserve(rg_.size());
  for (double r : rg_) vol_.push_back(density(s_, r));
  rho_.reserve(lg_.size());
  for (double l : lg_) rho_.push_back(spherical::plancherel_density(s_, l));
}

const std::vector<std::vector<double>>& SphericalTransform::phi_table() const {
  if (tab_.empty()) tab_ = phi_.table(lg_, rg_);
  return tab_;
}

RadialProfile SphericalTransform::sample_radial(const std::function<cplx(double)>& f) const {
  RadialProfile p{rg_, {}, s_};
  p.values.reserve(rg_.size());
  for (double r : rg_) p.values.push_back(f(r));
  return p;
}

SpectralProfile SphericalTransform::sample_spectral(const std::function<cplx(double)>& g) const {
  SpectralProfile p{lg_, {}, s_};
  p.values.reserve(lg_.size());
  for (double l : lg_) p.values.push_back(g(l));
  return p;
}

double SphericalTransform::radial_tail_fraction(const RadialProfile& f) const {
  check_space_match(f.space, s_, "radial_tail_fraction");
  check_grid_match(f.rgrid, rg_, "radial_tail_fraction");
  const double R = cfg_.rmax, w = 0.05 * R;
  double peak = 0.0;
  for (const cplx& v : f.values) peak = std::max(peak, std::abs(v));
  auto [a2, p2] = window_max(rg_, f.values, R - w, R);
  // Trailing samples at the relative roundoff floor are quadrature noise, not
  // a measurable tail; fitting a decay rate to them would be meaningless.
  if (a2 <= 1e-11 * peak) return 0.0;
  auto [a1, p1] = window_max(rg_, f.values, R - 2 * w, R - w);
  if (a1 == 0.0 || p2 <= p1) return kInf;
  const double rate = std::log(a1 / a2) / (p2 - p1);
  const double amp_end = a2 * std::exp(-rate * (R - p2));
  double norm2 = 0.0;
  for (std::size_t j = 0; j < rg_.size(); ++j)
    norm2 += rw_[j] * vol_[j] * std::norm(f.values[j]);
  if (norm2 == 0.0) return 0.0;
  return tail_energy(amp_end, rate, s_.Q, density(s_, R)) / norm2;
}

double SphericalTransform::spectral_tail_fraction(const SpectralProfile& g) const {
  check_space_match(g.space, s_, "spectral_tail_fraction");
  check_grid_match(g.lgrid, lg_, "spectral_tail_fraction");
  const double L = cfg_.lmax, w = 0.05 * L;
  double peak = 0.0;
  for (const cplx& v : g.values) peak = std::max(peak, std::abs(v));
  auto [a2, p2] = window_max(lg_, g.values, L - w, L);
  if (a2 <= 1e-11 * peak) return 0.0;
  auto [a1, p1] = window_max(lg_, g.values, L - 2 * w, L - w);
  if (a1 == 0.0 || p2 <= p1) return kInf;
  double norm2 = 0.0;
  for (std::size_t i = 0; i < lg_.size(); ++i)
    norm2 += lw_[i] * rho_[i] * std::norm(g.values[i]);
  if (norm2 == 0.0) return 0.0;
  const double rho_end = spherical::plancherel_density(s_, L);
  // Exponential-decay extrapolation; if that cannot beat the |c|^-2 ~ l^{n-1}
  // growth, retry with an algebraic-decay model before declaring divergence.
  const double rate = std::log(a1 / a2) / (p2 - p1);
  const double amp_end = a2 * std::exp(-rate * (L - p2));
  double tail = tail_energy(amp_end, rate, (s_.n - 1.0) / L, rho_end);
  if (std::isinf(tail) && a1 > a2 && p1 > 0.0) {
    const double power = std::log(a1 / a2) / std::log(p2 / p1);
    if (2.0 * power > s_.n) {
      const double ae = a2 * std::pow(L / p2, -power);
      tail = ae * ae * rho_end * L / (2.0 * power - s_.n);
    }
  }
  return tail / norm2;
}

SpectralProfile SphericalTransform::forward(const RadialProfile& f) const {
  check_space_match(f.space, s_, "forward");
  check_grid_match(f.rgrid, rg_, "forward");
  const double tf = radial_tail_fraction(f);
  if (!(tf < cfg_.forward_tail_tol)) {
    std::ostringstream msg;
    msg << "forward: truncation warning: estimated relative tail energy beyond rmax="
        << cfg_.rmax << " is " << tf << " (tolerance " << cfg_.forward_tail_tol
        << "); the profile decays too slowly against the e^{-Qr/2} envelope";
    throw NumericalError(msg.str());
  }
  const auto& tab = phi_table();
  SpectralProfile g{lg_, std::vector<cplx>(lg_.size()), s_};
  for (std::size_t i = 0; i < lg_.size(); ++i) {
    cplx acc = 0.0;
    const auto& row = tab[i];
    for (std::size_t j = 0; j < rg_.size(); ++j)
      acc += rw_[j] * vol_[j] * row[j] * f.values[j];
    g.values[i] = acc;
  }
  return g;
}

RadialProfile SphericalTransform::inverse(const SpectralProfile& g) const {
  check_space_match(g.space, s_, "inverse");
  check_grid_match(g.lgrid, lg_, "inverse");
  const double tf = spectral_tail_fraction(g);
  if (!(tf < cfg_.inverse_tail_tol)) {
    std::ostringstream msg;
    msg << "inverse: truncation warning: estimated relative spectral tail energy beyond lmax="
        << cfg_.lmax << " is " << tf << " (tolerance " << cfg_.inverse_tail_tol
        << "); the spectral profile decays too slowly against the |c|^-2 growth";
    throw NumericalError(msg.str());
  }
  const double c = cs();
  const auto& tab = phi_table();
  RadialProfile f{rg_, std::vector<cplx>(rg_.size()), s_};
  std::vector<cplx> wg(lg_.size());
  for (std::size_t i = 0; i < lg_.size(); ++i) wg[i] = lw_[i] * rho_[i] * g.values[i];
  for (std::size_t j = 0; j < rg_.size(); ++j) {
    cplx acc = 0.0;
    for (std::size_t i = 0; i < lg_.size(); ++i) acc += wg[i] * tab[i][j];
    f.values[j] = c * acc;
  }
  return f;
}

double SphericalTransform::plancherel_cs(const RadialProfile& f) const {
  SpectralProfile g = forward(f);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t j = 0; j < rg_.size(); ++j)
    lhs += rw_[j] * vol_[j] * std::norm(f.values[j]);
  for (std::size_t i = 0; i < lg_.size(); ++i)
    rhs += lw_[i] * rho_[i] * std::norm(g.values[i]);
  if (rhs == 0.0) throw ValidationError("plancherel_cs: zero profile");
  return lhs / rhs;
}

double SphericalTransform::cs() const {
  if (cs_ == 0.0) {
    RadialProfile ref = sample_radial([](double r) { return cplx(std::exp(-r * r), 0.0); });
    cs_ = plancherel_cs(ref);
  }
  return cs_;
}

double SphericalTransform::l2_radial(const RadialProfile& f) const {
  check_space_match(f.space, s_, "l2_radial");
  check_grid_match(f.rgrid, rg_, "l2_radial");
  double acc = 0.0;
  for (std::size_t j = 0; j < rg_.size(); ++j)
    acc += rw_[j] * vol_[j] * std::norm(f.values[j]);
  return std::sqrt(acc);
}

double SphericalTransform::l2_spectral(const SpectralProfile& g) const {
  check_space_match(g.space, s_, "l2_spectral");
  check_grid_match(g.lgrid, lg_, "l2_spectral");
  double acc = 0.0;
  for (std::size_t i = 0; i < lg_.size(); ++i)
    acc += lw_[i] * rho_[i] * std::norm(g.values[i]);
  return std::sqrt(cs() * acc);
}

SpectralProfile forward_sft(const SphericalTransform& t, const RadialProfile& f) {
  return t.forward(f);
}
RadialProfile inverse_sft(const SphericalTransform& t, const SpectralProfile& g) {
  return t.inverse(g);
}

SmoothEven cosine_series(const std::vector<double>& lgrid,
                         const std::vector<double>& weights,
                         const std::vector<cplx>& values) {
  if (lgrid.size() != weights.size() || lgrid.size() != values.size() || lgrid.empty())
    throw ValidationError("cosine_series: need equal-length non-empty tables");
  std::vector<double> c(lgrid.size());
  for (std::size_t i = 0; i < lgrid.size(); ++i) c[i] = weights[i] * values[i].real() / M_PI;
  SmoothEven g;
  g.value = [lg = lgrid, c](double s) {
    double acc = 0.0;
    for (std::size_t i = 0; i < lg.size(); ++i) acc += c[i] * std::cos(lg[i] * s);
    return acc;
  };
  g.deriv = [lg = lgrid, c](double s, int order) {
    double acc = 0.0;
    for (std::size_t i = 0; i < lg.size(); ++i) {
      const double ph = lg[i] * s;
      double trig;
      switch (order % 4) {
        case 0: trig = std::cos(ph); break;
        case 1: trig = -std::sin(ph); break;
        case 2: trig = -std::cos(ph); break;
        default: trig = std::sin(ph); break;
      }
      acc += c[i] * std::pow(lg[i], order) * trig;
    }
    return acc;
  };
  return g;
}

double abel_inverse(const SpaceParams& s, const SmoothEven& g, double r, double smax,
                    int panels) {
  if (!g.value) throw ValidationError("abel_inverse: missing function handle");
  if (!(r > 0.0)) throw ValidationError("abel_inverse: need r > 0");
  Stage chain = build_chain(s, g);
  double out;
  if (s.k % 2 == 0) {
    const double ase = std::pow(2.0, -0.5 * (3 * s.m + s.k)) * std::pow(M_PI, -0.5 * (s.m + s.k));
    out = ase * chain(r, 0);
  } else {
    if (!(smax > r)) throw ValidationError("abel_inverse: need smax > r for odd k");
    if (panels < 1) throw ValidationError("abel_inverse: need panels >= 1");
    const double aso = std::pow(2.0, -0.5 * (3 * s.m + s.k)) * std::pow(M_PI, -0.5 * s.n);
    // s = r + u^2; cosh s - cosh r = 2 sinh(u^2/2) sinh(r + u^2/2) avoids the
    // cancellation near u = 0 and makes the integrand smooth there.
    auto ns = quad::gl_nodes(quad::make_edges(0.0, std::sqrt(smax - r), (std::sqrt(smax - r)) / panels));
    double acc = 0.0;
    for (std::size_t i = 0; i < ns.x.size(); ++i) {
      const double u = ns.x[i], sv = r + u * u;
      const double denom = std::sqrt(2.0 * std::sinh(0.5 * u * u) * std::sinh(r + 0.5 * u * u));
      acc += ns.w[i] * chain(sv, 0) * std::sinh(sv) / denom * 2.0 * u;
    }
    out = aso * acc;
  }
  if (!std::isfinite(out))
    throw NumericalError("abel_inverse: derivative estimates are not finite (insufficient smoothness)");
  return out;
}

double abel_pair_constant(const SpaceParams& s) {
  double df = 1.0;
  for (int i = s.n - 2; i >= 2; i -= 2) df *= i;
  const int p2 = s.m + s.k / 2 + 1;           // m + floor(k/2) + 1
  const int ppi = (s.n - 1 + 1) / 2;          // ceil((n-1)/2)
  return std::pow(2.0, p2) * std::pow(M_PI, ppi) / df;
}

cplx oscillatory_fourier(const Symbol& b, double x) {
  if (!b.f) throw ValidationError("oscillatory_fourier: missing symbol handle");
  if (x == 0.0) throw ValidationError("oscillatory_fourier: need x != 0");
  const double cap = M_PI / (2.0 * std::abs(x));
  const bool compact = b.support_end > 0.0;
  const double upper = compact ? b.support_end : std::max(50.0, 20.0 / std::abs(x));
  // Reject before materializing the edge vector: a lower bound on the panel
  // count is range / cap (the tail grid is never finer than the cap allows).
  if (upper / cap > static_cast<double>(kPanelCap) + 1.0) {
    std::ostringstream msg;
    msg << "oscillatory_fourier: resolution cap exceeded: more than " << kPanelCap
        << " panels of width <= pi/(2|x|) needed for x=" << x;
    throw NumericalError(msg.str());
  }
  std::vector<double> edges;
  if (compact) {
    edges = quad::make_edges(0.0, upper, std::min(0.1, cap), {1.0, 2.0});
  } else {
    edges = quad::make_tail_edges(0.0, upper, std::min(0.1, cap), 1.4, cap, {1.0, 2.0});
  }
  if (edges.size() - 1 > kPanelCap) {
    std::ostringstream msg;
    msg << "oscillatory_fourier: resolution cap exceeded: " << edges.size() - 1
        << " panels of width <= pi/(2|x|) needed for x=" << x << " (cap " << kPanelCap << ")";
    throw NumericalError(msg.str());
  }
  auto ns = quad::gl_nodes(edges);
  const double t0 = 0.5 * upper;
  cplx acc = 0.0;
  for (std::size_t i = 0; i < ns.x.size(); ++i) {
    const double l = ns.x[i];
    double taper = 1.0;
    if (!compact) taper = quad::smooth_taper((l - t0) / (upper - t0));
    if (taper == 0.0) continue;
    cplx term = b.f(l) * std::polar(1.0, l * x);
    if (!b.half_line) term += b.f(-l) * std::polar(1.0, -l * x);
    acc += ns.w[i] * taper * term;
  }
  return acc;
}

double riesz_boundary_check(int m_order, double zeta, const Symbol& f_symbol, double x) {
  if (m_order < 0) throw ValidationError("riesz_boundary_check: need m_order >= 0");
  if (zeta < 0.0) throw ValidationError("riesz_boundary_check: need zeta >= 0");
  if (f_symbol.f && !(f_symbol.order < -m_order - 1))
    throw ValidationError(
        "riesz_boundary_check: f_symbol must have declared order < -m_order - 1");
  const double mexp = -m_order - 1.0;
  Symbol sym;
  sym.order = -1.0;  // after the (i lambda)^m derivative factor
  sym.half_line = true;
  sym.support_end = (zeta == 0.0 && f_symbol.f) ? f_symbol.support_end : 0.0;
  sym.f = [m_order, zeta, mexp, f = f_symbol.f](double l) {
    cplx val = 0.0;
    if (zeta > 0.0 && l > 1.0) {
      const double lg = std::log(l);
      val += zeta * quad::chi_inf(l) * std::exp(mexp * lg) *
             std::polar(1.0, -zeta * lg);
    }
    if (f) val += f(l);
    return val * std::pow(cplx(0.0, l), m_order);
  };
  return std::abs(oscillatory_fourier(sym, x));
}

}  // namespace drwave::transform
