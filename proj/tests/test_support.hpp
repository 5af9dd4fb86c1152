#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace testsupport {

// Adaptive Simpson that accepts the Richardson-corrected value once the
// depth budget is spent, instead of throwing. Test oracles integrate kinked
// or weakly singular integrands where the strict halving criterion is overly
// pessimistic; the residual panels at depth ~45 are far below the comparison
// tolerances used here.
template <typename F>
double soft_simpson_step(const F& f, double a, double m, double b, double fa,
                         double fm, double fb, double whole, double tol,
                         int depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double err = left + right - whole;
  if (std::fabs(err) <= 15.0 * tol || depth <= 0 ||
      std::fabs(err) <= 4e-16 * (std::fabs(left) + std::fabs(right))) {
    return left + right + err / 15.0;
  }
  return soft_simpson_step(f, a, lm, m, fa, flm, fm, left, 0.5 * tol,
                           depth - 1) +
         soft_simpson_step(f, m, rm, b, fm, frm, fb, right, 0.5 * tol,
                           depth - 1);
}

template <typename F>
double soft_simpson(const F& f, double a, double b, double tol,
                    int max_depth = 45) {
  if (a == b) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a);
  const double fm = f(m);
  const double fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return soft_simpson_step(f, a, m, b, fa, fm, fb, whole, tol, max_depth);
}

// One-sample Kolmogorov-Smirnov statistic against an analytic CDF.
template <typename Cdf>
double ks_statistic(std::vector<double> samples, const Cdf& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double c = cdf(samples[i]);
    d = std::max(d, std::fabs(c - static_cast<double>(i) / n));
    d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - c));
  }
  return d;
}

// Two-sided KS critical value at the 1% level, asymptotic form.
inline double ks_critical_1pct(std::size_t n) {
  return 1.6276 / std::sqrt(static_cast<double>(n));
}

// 99th percentile of chi-square with k degrees of freedom
// (Wilson-Hilferty approximation; adequate for test gating).
inline double chi2_critical_1pct(double k) {
  const double z = 2.3263478740408408;  // N(0,1) 99th percentile
  const double t = 1.0 - 2.0 / (9.0 * k) + z * std::sqrt(2.0 / (9.0 * k));
  return k * t * t * t;
}

}  // namespace testsupport
