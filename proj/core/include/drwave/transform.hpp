#pragma once

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "drwave/space.hpp"
#include "drwave/spherical.hpp"

namespace drwave::transform {

using cplx = std::complex<double>;

// A radial function sampled on a fixed r-grid.  The reference measure is
// dmu = V(r) dr, so L^2 pairings always carry the volume density.
struct RadialProfile {
  std::vector<double> rgrid;  // strictly increasing, inside (0, rmax]
  std::vector<cplx> values;
  SpaceParams space;
};

// A spectral function sampled on a fixed lambda-grid.
struct SpectralProfile {
  std::vector<double> lgrid;  // strictly increasing, inside [0, lmax]
  std::vector<cplx> values;
  SpaceParams space;
};

// CSV round-trip.  First line is "# space m=<m> k=<k> qtilde=<v>", then a
// column header, then one "<abscissa>,<re>,<im>" row per grid point.
void save_csv(const RadialProfile& f, const std::string& path);
void save_csv(const SpectralProfile& g, const std::string& path);
RadialProfile load_radial_csv(const std::string& path);
SpectralProfile load_spectral_csv(const std::string& path);

struct TransformConfig {
  double rmax = 15.0;
  double r_panel = 0.1;  // GL16 panel width in r
  double lmax = 50.0;
  double l_panel = 0.0;  // <= 0: min(0.1, pi / (2 (1 + rmax))), half an
                         // oscillation of exp(i lambda r) at the largest radius
  double forward_tail_tol = 1e-10;  // relative L^2(dmu) energy allowed past rmax
  double inverse_tail_tol = 1e-8;   // relative Plancherel energy allowed past lmax
};

// Spherical Fourier transform engine.  Grids are composite 16-point
// Gauss-Legendre node sets, so integrals over profiles sampled on them are
// spectrally accurate sums against the stored weights.  The phi table over
// (lambda-grid) x (r-grid) is built once on first use and shared by every
// forward/inverse call.
class SphericalTransform {
 public:
  explicit SphericalTransform(const SpaceParams& s, const TransformConfig& cfg = {});

  const SpaceParams& space() const { return s_; }
  const TransformConfig& config() const { return cfg_; }
  const std::vector<double>& rgrid() const { return rg_; }
  const std::vector<double>& rweights() const { return rw_; }
  const std::vector<double>& lgrid() const { return lg_; }
  const std::vector<double>& lweights() const { return lw_; }
  const std::vector<double>& density_table() const { return rho_; }  // |c|^-2 on lgrid
  const std::vector<double>& volume_table() const { return vol_; }   // V on rgrid
  const spherical::PhiEvaluator& phi() const { return phi_; }

  RadialProfile sample_radial(const std::function<cplx(double)>& f) const;
  SpectralProfile sample_spectral(const std::function<cplx(double)>& g) const;

  // Hf(lambda) = int_0^rmax f(r) phi_lambda(r) V(r) dr.  Requires the decay
  // gate radial_tail_fraction(f) < forward_tail_tol.
  SpectralProfile forward(const RadialProfile& f) const;

  // f(r) = c_S int_0^lmax |c(lambda)|^-2 g(lambda) phi_lambda(r) dlambda.
  // Requires spectral_tail_fraction(g) < inverse_tail_tol.
  RadialProfile inverse(const SpectralProfile& g) const;

  // Plancherel constant, calibrated once per transform on exp(-r^2) and then
  // frozen; every inverse and spectral norm uses this single value.
  double cs() const;

  double l2_radial(const RadialProfile& f) const;    // sqrt(int |f|^2 V dr)
  double l2_spectral(const SpectralProfile& g) const;  // sqrt(cs int |c|^-2 |g|^2)
  // The constant that would make Plancherel exact for this profile alone.
  double plancherel_cs(const RadialProfile& f) const;

  // Estimated tail energy past the grid end relative to the energy on the
  // grid, from a fitted decay rate of the trailing samples.  Infinite when the
  // fitted decay cannot beat the measure growth (V ~ e^{Qr}, |c|^-2 ~ l^{n-1}).
  double radial_tail_fraction(const RadialProfile& f) const;
  double spectral_tail_fraction(const SpectralProfile& g) const;

 private:
  const std::vector<std::vector<double>>& phi_table() const;

  SpaceParams s_;
  TransformConfig cfg_;
  spherical::PhiEvaluator phi_;
  std::vector<double> rg_, rw_, lg_, lw_;
  std::vector<double> vol_;  // V(r_j)
  std::vector<double> rho_;  // |c(lambda_i)|^-2
  mutable std::vector<std::vector<double>> tab_;
  mutable double cs_ = 0.0;
};

SpectralProfile forward_sft(const SphericalTransform& t, const RadialProfile& f);
RadialProfile inverse_sft(const SphericalTransform& t, const SpectralProfile& g);

// Smooth even function handle.  When `deriv` is set it must return
// d^order g / ds^order for order >= 1; otherwise derivatives fall back to
// 5-point central finite differences with step 1e-3 per differentiation.
struct SmoothEven {
  std::function<double(double)> value;
  std::function<double(double, int)> deriv;  // optional
};

// s -> (1/pi) sum_i w_i Re(h_i) cos(lambda_i s): the inverse 1-D Fourier
// transform of an even real spectral table, with exact derivatives.  This is
// the F^-1 stage of the Abel factorization H^-1 = A^-1 o F^-1.
SmoothEven cosine_series(const std::vector<double>& lgrid,
                         const std::vector<double>& weights,
                         const std::vector<cplx>& values);

// Inverse Abel transform at radius r > 0.  With D1 = -(1/sinh r) d/dr and
// D2 = -(1/sinh(r/2)) d/dr:
//   k even: 2^{-(3m+k)/2} pi^{-(m+k)/2} D1^{k/2} D2^{m/2} g (r)
//   k odd:  2^{-(3m+k)/2} pi^{-n/2} int_r^inf D1^{(k+1)/2} D2^{m/2} g (s)
//             (cosh s - cosh r)^{-1/2} sinh s ds
// The odd-k integral is regularized by s = r + u^2 and integrated by
// composite GL16 on `panels` panels up to s = smax.
double abel_inverse(const SpaceParams& s, const SmoothEven& g, double r,
                    double smax = 15.0, int panels = 200);

// Normalization constant pairing cosine_series with abel_inverse, so that
//   abel_pair_constant(s) * abel_inverse(s, cosine_series(l, w, Hf), r) = f(r).
// The inverse-Abel constants above assume a Fourier normalization the
// factorization itself does not fix; relative to our cosine_series convention
// the mismatch is the space-dependent constant
//   2^{m + floor(k/2) + 1} * pi^{ceil((n-1)/2)} / (n-2)!!,
// verified numerically on all spaces with m <= 8, k <= 5.
double abel_pair_constant(const SpaceParams& s);

// Symbol handle for model oscillatory integrals.
struct Symbol {
  std::function<cplx(double)> f;
  double order = 0.0;        // declared symbol order nu (decay rate at infinity)
  bool half_line = true;     // domain [0, inf); false: all of R
  double support_end = 0.0;  // > 0: f vanishes beyond this point
};

// k(x) = int b(lambda) e^{i lambda x} dlambda over the symbol's domain.
// Panels never exceed half an oscillation pi/(2|x|); non-compact symbols are
// truncated at max(50, 20/|x|) with a C^infinity taper over the upper half of
// the window.  Throws when the required panel count exceeds the resolution cap.
cplx oscillatory_fourier(const Symbol& b, double x);

// |d^m/dx^m k(x)| for the boundary symbol
//   b(lambda) = zeta chi_inf(lambda) lambda^{-m-1-i zeta} + f(lambda),
// where f must have declared order < -m - 1.
double riesz_boundary_check(int m_order, double zeta, const Symbol& f_symbol, double x);

}  // namespace drwave::transform
