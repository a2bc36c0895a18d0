#pragma once

#include <complex>
#include <memory>
#include <string>
#include <vector>

#include "drwave/space.hpp"
#include "drwave/spherical.hpp"
#include "drwave/transform.hpp"

namespace drwave::kernels {

using cplx = std::complex<double>;
using transform::RadialProfile;

// ---------------------------------------------------------------------------
// Wave propagator kernels.
//
// The kernel of the operator D^{-tau} Dtilde^{tau-sigma} e^{itD} splits along
// the partition of unity chi0 + chi_inf into a low-frequency part
//
//   w_t^0(r) = int_0^2 chi0(lambda) |c(lambda)|^{-2} lambda^{-tau}
//              (lambda^2 + Qtilde^2/4)^{(tau-sigma)/2} phi_lambda(r)
//              e^{i t lambda} dlambda,
//
// and a regularized high-frequency part
//
//   wtilde_t^inf(r) = e^{sigma^2} / Gamma((n+1)/2 - sigma) *
//              int_1^inf chi_inf(lambda) |c(lambda)|^{-2} lambda^{-tau}
//              (lambda^2 + Qtilde^2/4)^{(tau-sigma)/2} phi_lambda(r)
//              e^{i t lambda} dlambda.
//
// Normalizing constants in front of the inversion integrals are set to 1:
// every verified statement below is a scale-invariant boundedness or slope
// claim, never an absolute constant.
// ---------------------------------------------------------------------------

enum class KernelPart { low, high_regularized, full };

struct KernelRequest {
  std::complex<double> sigma{0.0, 0.0};  // spectral order
  double tau = 0.0;                      // time-decay tuning exponent
  double t = 0.0;                        // time, nonzero
  KernelPart part = KernelPart::low;
};

// Evaluation settings for the high-frequency integral, which is truncated at a
// finite lambda_max and closed with a C^infinity taper over the last half of
// the window.  For small |t| the oscillation e^{i t lambda} cancels the tail
// only once the taper window spans enough phase, so the truncation point is
// extended to keep |t| * lambda_max above 2 * phase_target.
// truncation_tol must sit above the Abel-front floor: at Im sigma = 1 the
// non-decaying front wobble is ~0.15-0.22 of the kernel sup for small |t|
// (it scales with t exactly as the sup does), while genuinely under-resolved
// windows produce increments of 0.33 and above.  The default phase_target
// resolves n = 4 down to t = 0.05; the n = 5 density grows a power faster,
// so below t ~ 0.25 it needs phase_target = 80 to reach the floor.
struct KernelConfig {
  double lambda_max = 300.0;     // base truncation of the high-frequency window
  bool auto_extend = true;       // grow the window as ~ 2 phase_target / |t|
  double phase_target = 40.0;    // phase the taper window must span (radians)
  double lambda_cap = 4000.0;    // never extend beyond this
  double truncation_tol = 0.25;  // max tolerated relative last-increment size
  double panel_width = 0.1;      // GL16 panel width cap in lambda
};

// High-frequency kernel values plus the a-posteriori truncation estimate:
// the sup over the radial grid of the difference between the kernel computed
// with the taper at scale lambda_max_used and at scale lambda_max_used / 2
// (the last dyadic increment of the regularized value).  Off the wave front
// the smooth taper makes successive increments collapse rapidly; at the
// front r = |t| on the line Re sigma = (n+1)/2 the value converges only in
// the Abel sense and the increment settles to a small bounded wobble.
struct HighKernel {
  RadialProfile profile;
  double truncation_bound = 0.0;  // sup of the last taper-doubling increment
  double lambda_max_used = 0.0;   // effective truncation after auto-extension
};

// chi0(lambda), chi_inf(lambda): C^infinity partition of unity with
// chi0 = 1 on [0,1], chi0 = 0 on [2,inf), chi_inf = 1 - chi0.  lambda >= 0.
std::pair<double, double> chi_cutoffs(double lambda);

// Shared quadrature tables for kernel evaluation over a fixed radial grid and
// a planned range of times.  Panels are sized so each one sees at most a
// quarter period of the fastest phase (t_max + r_max); the phi_lambda values
// on the (lambda, r) grid are precomputed once (or streamed with per-node
// expansion coefficients when the table would exceed the memory budget) and
// reused across t.  Evaluation is read-only after construction.
class KernelEvaluator {
 public:
  // t_min/t_max bound the |t| of later requests: t_max fixes the panel width,
  // t_min fixes how far the high-frequency table must reach after
  // auto-extension.  rgrid must be ascending, nonnegative, nonempty.
  // `parts` selects which tables to prepare (low, high_regularized, or full
  // for both); calling a method whose table was not prepared throws.
  KernelEvaluator(const SpaceParams& s, std::vector<double> rgrid, double t_min,
                  double t_max, const KernelConfig& cfg = {},
                  KernelPart parts = KernelPart::full);
  ~KernelEvaluator();
  KernelEvaluator(KernelEvaluator&&) noexcept;
  KernelEvaluator& operator=(KernelEvaluator&&) noexcept;

  const SpaceParams& space() const;
  const std::vector<double>& rgrid() const;
  const KernelConfig& config() const;
  const spherical::PhiEvaluator& phi() const;

  // Low-frequency kernel w_t^0.  Requires part == low, 0 < |t| <= t_max,
  // 0 <= tau < 2 (the integrand is integrable at 0 since |c|^{-2} ~ lambda^2).
  RadialProfile w0(const KernelRequest& req) const;

  // Regularized high-frequency kernel wtilde_t^inf.  Requires
  // part == high_regularized, 0 < |t| <= t_max, |t| >= t_min,
  // 0 <= tau < 3/2, 0 <= Re sigma <= (n+1)/2.  Throws NumericalError if the
  // truncation estimate exceeds truncation_tol relative to the kernel sup.
  HighKernel w_inf(const KernelRequest& req) const;

  // Sum of both parts at common (sigma, tau).  Requires part == full.
  RadialProfile full(const KernelRequest& req) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// One-shot conveniences: build a KernelEvaluator for the single time req.t
// and evaluate.  Prefer the class for sweeps over many t.
RadialProfile kernel_w0(const SpaceParams& s, const KernelRequest& req,
                        const std::vector<double>& rgrid);
HighKernel kernel_w_inf(const SpaceParams& s, const KernelRequest& req,
                        const std::vector<double>& rgrid,
                        const KernelConfig& cfg = {});
RadialProfile kernel_full(const SpaceParams& s, const KernelRequest& req,
                          const std::vector<double>& rgrid,
                          const KernelConfig& cfg = {});

// ---------------------------------------------------------------------------
// Pointwise envelope verification.
//
// Each regime pairs a (t, r) region with the claimed envelope:
//   w0_small_time          0 < |t| <= 2            |w| <= C phi_0(r)
//   w0_large_time_inside   |t| >= 2, r <= |t|/2    |w| <= C |t|^{tau-3} phi_0(r)
//   w0_large_time_outside  |t| >= 2, r >= |t|/2    |w| <= C (1+|r-|t||)^{tau-2} e^{-Qr/2}
//   winf_small_time_near   0 < |t| <= 2, r <= 3    |w| <= C |t|^{-(n-1)/2}
//   winf_small_time_far    0 < |t| <= 2, r >= 3    |w| <= C r^{-N} e^{-Qr/2}
//   winf_large_time        |t| >= 2                |w| <= C (1+|r-|t||)^{-N} e^{-Qr/2}
// The rapid-decay claims are tested at the finite order N = decay_order; the
// C^infinity partition of unity keeps every finite N meaningful (default 3).
// The winf regimes assume Re sigma = (n+1)/2 (the boundary line the
// envelopes are stated on).
// ---------------------------------------------------------------------------

enum class EnvelopeRegime {
  w0_small_time,
  w0_large_time_inside,
  w0_large_time_outside,
  winf_small_time_near,
  winf_small_time_far,
  winf_large_time,
};

struct ScanOptions {
  // Added to the envelope's decay power, turning the scan into a negative
  // control: the flag statistic (max ratio over median ratio) detects the
  // power-law trend a misstated envelope leaves in the ratio list, in either
  // direction.  Its sensitivity goes like the square root of the trend's
  // dynamic range across the grid, so sharp power-law regimes flag at
  // |exponent_shift| = 1 on the default grids, while the rapid-decay regimes
  // (whose kernels fall off faster than any tested power) need
  // |exponent_shift| around 3 before the misfit outruns the window.
  double exponent_shift = 0.0;
  int decay_order = 3;  // N standing in for the rapid-decay envelopes
  KernelConfig kernel;  // high-frequency evaluation settings
};

struct EnvelopeReport {
  std::string region;            // human-readable regime description
  double max_ratio = 0.0;        // sup over the scan of |kernel| / envelope
  double fitted_constant = 0.0;  // geometric mean of the nonzero ratios
  bool divergence = false;       // max_ratio > 10 x median ratio on some sweep
};

struct ScanGrid {
  std::vector<double> tlist;
  std::vector<double> rgrid;
};

// Default scan grids wide enough that the regime's shifted-exponent control
// moves the max ratio beyond 10x the median (the control has power), while
// the correct envelopes stay below the flag.  The inside regime's window is
// space-dependent (its transient-to-settled ratio grows with n); grids are
// tuned for n in {4, 5}.
ScanGrid default_scan_grid(EnvelopeRegime regime, const SpaceParams& s);

// Scans |kernel| / envelope over tlist x rgrid (rgrid filtered per t to the
// regime's r-range).  Time-power regimes reduce each t to the sup over r and
// test the per-t list; space-power regimes test each per-t sweep over r.
// Throws ValidationError on regime/range mismatch (wrong part, t outside the
// regime, empty filtered r-range) and, for winf regimes, if Re sigma is not
// (n+1)/2.  req.t is ignored; tlist supplies the times.
EnvelopeReport envelope_scan(const SpaceParams& s, const KernelRequest& req,
                             EnvelopeRegime regime,
                             const std::vector<double>& tlist,
                             const std::vector<double>& rgrid,
                             const ScanOptions& opts = {});

// ---------------------------------------------------------------------------
// Convolution-norm criterion and dispersive decay fits.
// ---------------------------------------------------------------------------

// Upper-bound proxy (up to a fixed constant) for the L^{qtilde'} -> L^q norm
// of convolution with the radial kernel kappa:
//
//   ( int_0^inf V(r) phi_0(r)^nu |kappa(r)|^alpha dr )^{1/alpha},
//   nu = 2 min(q, qtilde) / (q + qtilde),  alpha = q qtilde / (q + qtilde).
//
// Requires q, qtilde in (2, inf) and kappa sampled far enough out that the
// integrand tail is below 1e-12 of its peak (NumericalError otherwise).
double criterion_bound(const SpaceParams& s, const RadialProfile& kappa,
                       double q, double qtilde);

struct SlopeFit {
  double slope = 0.0;
  double ci_half_width = 0.0;  // ~95% confidence half-width (2 x std. error)
};

struct DispersiveFit {
  SlopeFit small_time;  // fitted on tlist entries with |t| <= 1/2
  SlopeFit large_time;  // fitted on tlist entries with |t| >= 4
  std::vector<double> t_small, value_small;
  std::vector<double> t_large, value_large;
};

// Combined decay proxy for D^{-tau} Dtilde^{tau-sigma} e^{itD} as an
// L^{q'} -> L^q operator: the criterion bound of w_t^0 (with qtilde = q) plus
// the interpolation-endpoint proxy (sup_r |wtilde_t^inf|)^{1-2/q} computed on
// the line Re sigma = (n+1)/2 (at unit imaginary offset; the L^2 endpoint is
// a t-independent constant and is dropped).  Fits log value against log t
// separately for |t| <= 1/2 and |t| >= 4; each side needs >= 3 points.
// Requires q in (2, inf), tau in [0, 3/2), and the dispersive hypothesis
// sigma >= (n+1)(1/2 - 1/q) (ValidationError citing the hypothesis if
// violated).
DispersiveFit dispersive_decay_fit(const SpaceParams& s, double q, double sigma,
                                   double tau, const std::vector<double>& tlist,
                                   const KernelConfig& cfg = {});

// ---------------------------------------------------------------------------
// CSV serialization.
// ---------------------------------------------------------------------------

// Kernel table rows `t,r,kernel_re,kernel_im`, one block per (t, kernel).
// tlist and kernels must have equal sizes; all kernels share one space.
void save_kernel_csv(const std::string& path, const std::vector<double>& tlist,
                     const std::vector<RadialProfile>& kernels);

// Envelope report rows `regime,max_ratio,constant` (region strings are
// comma-free by construction).
void save_envelope_csv(const std::string& path,
                       const std::vector<EnvelopeReport>& reports);

}  // namespace drwave::kernels
