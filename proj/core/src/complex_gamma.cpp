#include "drwave/complex_gamma.hpp"

#include <cmath>

#include "drwave/errors.hpp"

namespace drwave {

namespace {

constexpr double kLanczosG = 7.0;
constexpr double kLanczos[9] = {
    0.99999999999980993,    676.5203681218851,      -1259.1392167224028,
    771.32342877765313,     -176.61502916214059,    12.507343278686905,
    -0.13857109526572012,   9.9843695780195716e-6,  1.5056327351493116e-7};

// log Gamma via Lanczos, valid for Re z >= 0.5.
cplx log_gamma_half_plane(cplx z) {
  z -= 1.0;
  cplx x = kLanczos[0];
  for (int i = 1; i < 9; ++i) x += kLanczos[i] / (z + static_cast<double>(i));
  const cplx t = z + kLanczosG + 0.5;
  return 0.5 * std::log(2.0 * M_PI) + (z + 0.5) * std::log(t) - t + std::log(x);
}

}  // namespace

cplx log_gamma(cplx z) {
  if (z.imag() == 0.0 && z.real() <= 0.0 &&
      std::abs(z.real() - std::round(z.real())) < 1e-12)
    throw SingularityError("log_gamma: pole at nonpositive integer z");
  if (z.real() >= 0.5) return log_gamma_half_plane(z);
  // Shift into the half plane: log Gamma(z) = log Gamma(z+K) - sum log(z+j).
  const int K = static_cast<int>(std::ceil(0.5 - z.real()));
  cplx acc = 0.0;
  for (int j = 0; j < K; ++j) {
    const cplx zj = z + static_cast<double>(j);
    if (std::abs(zj) < 1e-12)
      throw SingularityError("log_gamma: pole at nonpositive integer z");
    acc += std::log(zj);
  }
  return log_gamma_half_plane(z + static_cast<double>(K)) - acc;
}

cplx gamma_fn(cplx z) { return std::exp(log_gamma(z)); }

}  // namespace drwave
