#pragma once

#include <cmath>

#include "shellmc/adjoint.hpp"
#include "shellmc/errors.hpp"
#include "shellmc/quadrature.hpp"

namespace shellmc {

enum class Provenance { closed_form, quadrature };

struct OracleValue {
  double value;
  double abs_tolerance;
  Provenance provenance;
};

// Latest emission time from which a grazing particle still reaches the
// shrinking target by t_final.
inline OracleValue exact_tmax(double alpha, double beta, double r1,
                              double t_final) {
  const double r0 = alpha + beta * t_final;
  const double rad = r0 * r0 * beta * beta - r0 * r0 + r1 * r1;
  if (rad < 0.0) throw DomainError("exact_tmax: negative radicand");
  return {t_final - r0 * beta - std::sqrt(rad), 1e-12,
          Provenance::closed_form};
}

// Largest emission direction at time t that still reaches the target
// (discriminant of the crossing quadratic equal to zero).
inline double mu_max(double t, double alpha, double beta, double r1) {
  const double r0 = alpha + beta * t;
  return (beta * r0 -
          std::sqrt((1.0 - beta * beta) * (r1 * r1 - r0 * r0))) /
         r1;
}

// Arrival time at the moving target for emission (t, mu) inside the wedge:
// smaller root of R0(t + t')^2 = R1^2 + 2 t' R1 mu + t'^2.
inline double tau_arrival(double t, double mu, double alpha, double beta,
                          double r1) {
  const double b2 = beta * beta;
  const double q = r1 * mu - t - alpha * beta;
  const double rad =
      q * q - (1.0 - b2) * (t * t + r1 * r1 - alpha * alpha - 2.0 * r1 * mu * t);
  if (rad < -1e-12) {
    throw DomainError("tau_arrival: direction outside the reachable wedge");
  }
  return (t + alpha * beta - r1 * mu - std::sqrt(std::max(0.0, rad))) /
         (1.0 - b2);
}

// Streaming flux (kappa_s = kappa_t = 0): F = int_0^{Tmax} (1 - mu(t)^2)/2 dt.
inline OracleValue exact_flux_streaming(double alpha, double beta, double r1,
                                        double t_final) {
  const double tmax = exact_tmax(alpha, beta, r1, t_final).value;
  const auto f = [&](double t) {
    const double m = mu_max(t, alpha, beta, r1);
    return 0.5 * (1.0 - m * m);
  };
  return {adaptive_simpson(f, 0.0, tmax, 1e-11), 1e-10,
          Provenance::quadrature};
}

// Pure-absorber flux: the streaming integrand attenuated along the flight,
// F = int int |mu| exp(-kappa_t (tau - t)) dmu dt over the wedge. The inner
// integral is taken with mu = mu(t) - v^2 so the square-root edge of tau is
// smooth.
inline OracleValue exact_flux_absorbing(double alpha, double beta, double r1,
                                        double kappa_t, double t_final,
                                        double outer_tol = 3e-9) {
  const double tmax = exact_tmax(alpha, beta, r1, t_final).value;
  const auto inner = [&](double t) {
    const double mt = mu_max(t, alpha, beta, r1);
    const auto g = [&](double v) {
      const double mu = mt - v * v;
      const double tau = tau_arrival(t, mu, alpha, beta, r1);
      return 2.0 * v * std::fabs(mu) * std::exp(-kappa_t * (tau - t));
    };
    return adaptive_simpson(g, 0.0, std::sqrt(mt + 1.0), 1e-12);
  };
  return {adaptive_simpson(inner, 0.0, tmax, outer_tol), 1e-7,
          Provenance::quadrature};
}

// Duality identity: the time-integrated target flux equals the importance-
// weighted incoming boundary integral, T * int_{mu<0} |mu| I(R1,mu) dmu.
// boundary_emission_weight already carries the factor 2 normalization that
// makes I == 1 reproduce the analog source strength T/2.
inline OracleValue duality_flux(const ImportanceTable& table, double t_final) {
  return {0.5 * t_final * table.boundary_emission_weight, 0.0,
          Provenance::closed_form};
}

// Scalar flux of the uncollided field of a unit isotropic shell source in a
// pure absorber, by quadrature over the emission sphere. After the standard
// reduction the direction integral becomes a chord-length integral
//   psi(r) = 1/(8 pi r r_s) int_{|r-r_s|}^{r+r_s} e^{-kappa_t d} / d  dd,
// evaluated here with d = |r-r_s| e^w so the 1/d end is benign.
inline double uncollided_shell_flux(double r, double r_source,
                                    double kappa_t) {
  if (!(r > 0.0) || !(r_source > 0.0)) {
    throw DomainError("uncollided_shell_flux: radii must be positive");
  }
  const double gap = std::fabs(r - r_source);
  if (gap <= 1e-12 * r_source) {
    throw SingularPoint(
        "uncollided_shell_flux: point value diverges at the source radius");
  }
  const double top = r + r_source;
  const auto f = [&](double w) {
    return std::exp(-kappa_t * gap * std::exp(w));
  };
  const double integral =
      adaptive_simpson(f, 0.0, std::log(top / gap), 1e-12);
  return integral / (8.0 * M_PI * r * r_source);
}

// Volume average of the uncollided flux over one radial tally cell. The cell
// containing the source is split there and integrated with r = r_s -+ v^2,
// which tames the logarithmic peak.
inline double uncollided_shell_flux_cell_avg(double lo, double hi,
                                             double r_source,
                                             double kappa_t) {
  if (!(hi > lo) || lo < 0.0) {
    throw DomainError("uncollided_shell_flux_cell_avg: bad cell");
  }
  const auto weighted = [&](double r) {
    return 4.0 * M_PI * r * r * uncollided_shell_flux(r, r_source, kappa_t);
  };
  const double volume =
      4.0 * M_PI / 3.0 * (hi * hi * hi - lo * lo * lo);
  const double pad = 2e-12 * r_source;

  auto toward_source = [&](double from, double rs) {
    // integral over [min(from,rs), max(from,rs)] anchored at rs
    const double span = std::fabs(rs - from);
    const double sgn = (from < rs) ? 1.0 : -1.0;
    const auto g = [&](double v) {
      return 2.0 * v * weighted(rs - sgn * v * v);
    };
    return adaptive_simpson(g, std::sqrt(pad), std::sqrt(span), 1e-12);
  };

  double integral;
  if (lo < r_source && r_source < hi) {
    integral = toward_source(lo, r_source) + toward_source(hi, r_source);
  } else if (hi <= r_source - pad || lo >= r_source + pad) {
    integral = adaptive_simpson(weighted, lo, hi, 1e-13);
  } else {
    // cell edge touches the source radius
    integral = (lo < r_source) ? toward_source(lo, r_source)
                               : toward_source(hi, r_source);
  }
  return integral / volume;
}

}  // namespace shellmc
