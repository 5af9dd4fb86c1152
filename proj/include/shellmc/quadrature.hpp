#pragma once

#include <array>
#include <cmath>
#include <cstddef>

#include "shellmc/errors.hpp"

namespace shellmc {

namespace detail {

template <typename F>
double adaptive_simpson_step(const F& f, double a, double m, double b,
                             double fa, double fm, double fb, double whole,
                             double tol, int depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double err = left + right - whole;
  // Accept on the requested tolerance, or once the estimate sits at the
  // rounding floor of the local panel values.
  if (std::fabs(err) <= 15.0 * tol ||
      std::fabs(err) <= 4e-16 * (std::fabs(left) + std::fabs(right))) {
    return left + right + err / 15.0;
  }
  if (depth <= 0) {
    throw QuadratureNonConvergence(
        "adaptive_simpson: error estimate stalled at maximum depth");
  }
  return adaptive_simpson_step(f, a, lm, m, fa, flm, fm, left, 0.5 * tol,
                               depth - 1) +
         adaptive_simpson_step(f, m, rm, b, fm, frm, fb, right, 0.5 * tol,
                               depth - 1);
}

}  // namespace detail

// Adaptive Simpson with interval bisection and Richardson error estimation.
// `tol` is an absolute tolerance on the whole interval.
template <typename F>
double adaptive_simpson(const F& f, double a, double b, double tol,
                        int max_depth = 48) {
  if (a == b) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a);
  const double fm = f(m);
  const double fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::adaptive_simpson_step(f, a, m, b, fa, fm, fb, whole, tol,
                                       max_depth);
}

// Fixed-order Gauss-Legendre on [a, b]; order 8 overshoots the per-segment
// accuracy needed by the characteristic integrals.
template <typename F>
double gauss_legendre_8(const F& f, double a, double b) {
  static constexpr std::array<double, 4> node = {
      0.1834346424956498, 0.5255324099163290, 0.7966664774136267,
      0.9602898564975363};
  static constexpr std::array<double, 4> wgt = {
      0.3626837833783620, 0.3137066458778873, 0.2223810344533745,
      0.1012285362903763};
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double sum = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    const double d = h * node[k];
    sum += wgt[k] * (f(c - d) + f(c + d));
  }
  return h * sum;
}

}  // namespace shellmc
