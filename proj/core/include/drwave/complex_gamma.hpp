#pragma once

#include <complex>

namespace drwave {

using cplx = std::complex<double>;

// Principal branch of log Gamma(z) for complex z, Lanczos approximation
// (g = 7, 9 coefficients), argument-shifted so it is accurate on the whole
// plane away from the poles at z = 0, -1, -2, ...  Relative accuracy of
// exp(log_gamma) is ~1e-13.  Throws SingularityError within 1e-12 of a pole.
cplx log_gamma(cplx z);

// Gamma(z) = exp(log_gamma(z)); overflows for Re z large are the caller's
// problem (use log_gamma directly for ratios).
cplx gamma_fn(cplx z);

}  // namespace drwave
