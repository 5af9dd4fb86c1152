#pragma once

#include <cmath>

#include "shellmc/errors.hpp"

namespace shellmc {

// Grazing direction: a particle at radius r with mu < mu_d(r) has a straight
// path that intersects the inner sphere of radius r0. Returns -1 when there
// is no inner sphere (r0 = 0).
inline double mu_d(double r, double r0) {
  if (r0 <= 0.0) return -1.0;
  if (r < r0) {
    if (r > r0 * (1.0 - 1e-12)) {
      r = r0;
    } else {
      throw DomainError("mu_d: r < r0");
    }
  }
  const double q = r0 / r;
  return -std::sqrt(std::max(0.0, 1.0 - q * q));
}

inline double impact_parameter(double r, double mu) {
  return r * std::sqrt(std::max(0.0, 1.0 - mu * mu));
}

struct FlightEnd {
  double r;
  double mu;
};

// Straight flight of length s in spherical coordinates (rdot = mu,
// mudot = (1-mu^2)/r): closed form keeps x = r*mu + s and y = r*sqrt(1-mu^2)
// exact.
inline FlightEnd advance_free_flight(double r, double mu, double s) {
  const double x = r * mu + s;
  const double y2 = r * r * std::max(0.0, 1.0 - mu * mu);
  const double rp = std::sqrt(x * x + y2);
  double mup;
  if (rp > 0.0) {
    mup = x / rp;
    if (mup > 1.0) mup = 1.0;
    if (mup < -1.0) mup = -1.0;
  } else {
    mup = 1.0;  // passing exactly through the origin, now heading outward
  }
  return {rp, mup};
}

enum class ShellHit { inner, outer };

struct ShellDistance {
  double s;
  ShellHit hit;
};

// Distance along the current direction to the first shell boundary:
// the inner sphere when mu < mu_d(r), the outer sphere otherwise.
inline ShellDistance distance_to_shells(double r, double mu, double r0,
                                        double r1) {
  const double tol = 1e-12 * r1;
  if (r < r0 - tol || r > r1 + tol) {
    throw DomainError("distance_to_shells: r outside [r0, r1]");
  }
  if (r < r0) r = r0;
  if (r > r1) r = r1;
  const double mud = mu_d(r, r0);
  if (mu < mud) {
    const double disc = r0 * r0 - r * r + r * r * mu * mu;
    return {-r * mu - std::sqrt(std::max(0.0, disc)), ShellHit::inner};
  }
  const double disc = r1 * r1 - r * r + r * r * mu * mu;
  return {-r * mu + std::sqrt(std::max(0.0, disc)), ShellHit::outer};
}

}  // namespace shellmc
