#pragma once

// 128-bit complex Gamma oracle for tests (Spouge's series, a = 30, relative
// error ~ 1e-25).  Deliberately independent of the library's Lanczos code so
// comparisons at the 1e-10 level are meaningful.
//
// No 'Q' floating literals are used (they require GNU numeric-literal
// extensions); constants are built from double literals and quadmath calls.

#include <quadmath.h>

#include <complex>
#include <stdexcept>

namespace testsupport {

using c128 = __complex128;

inline c128 make_c128(double re, double im) {
  c128 z;
  __real__ z = re;
  __imag__ z = im;
  return z;
}

inline c128 from_real(__float128 x) {
  c128 z;
  __real__ z = x;
  __imag__ z = 0;
  return z;
}

inline std::complex<double> to_double(c128 z) {
  return {static_cast<double>(__real__ z), static_cast<double>(__imag__ z)};
}

// Gamma(z) for Re z >= 1 via Spouge's approximation with a = 30:
//   Gamma(z) = (w+a)^{w+1/2} e^{-(w+a)} [c0 + sum_{i=1}^{a-1} c_i/(w+i)],
//   w = z-1, c0 = sqrt(2 pi), c_i = (-1)^{i-1}/(i-1)! (a-i)^{i-1/2} e^{a-i}.
inline c128 spouge_gamma_right(c128 z) {
  constexpr int a = 30;
  const __float128 two_pi = 2 * acosq(static_cast<__float128>(-1.0));
  const c128 w = z - make_c128(1.0, 0.0);
  c128 sum = from_real(sqrtq(two_pi));
  __float128 fact = 1;  // (i-1)!
  for (int i = 1; i < a; ++i) {
    if (i > 1) fact *= static_cast<__float128>(i - 1);
    const __float128 ai = static_cast<__float128>(a - i);
    const __float128 ci = ((i % 2 == 1) ? 1 : -1) *
                          powq(ai, static_cast<__float128>(i) - static_cast<__float128>(0.5)) *
                          expq(ai) / fact;
    sum = sum + from_real(ci) / (w + make_c128(static_cast<double>(i), 0.0));
  }
  const c128 t = w + make_c128(static_cast<double>(a), 0.0);
  return cexpq((w + make_c128(0.5, 0.0)) * clogq(t) - t) * sum;
}

// Gamma(z) anywhere away from the poles, by shifting into Re z >= 1.
inline c128 gamma_q(c128 z) {
  int shift = 0;
  while (static_cast<double>(__real__ z) + shift < 1.0) ++shift;
  c128 g = spouge_gamma_right(z + make_c128(static_cast<double>(shift), 0.0));
  for (int j = 0; j < shift; ++j) {
    const c128 f = z + make_c128(static_cast<double>(j), 0.0);
    if (static_cast<double>(cabsq(f)) < 1e-30)
      throw std::runtime_error("gamma_q: evaluation at a pole");
    g = g / f;
  }
  return g;
}

}  // namespace testsupport
