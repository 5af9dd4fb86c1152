#include <doctest.h>

#include <cmath>
#include <random>

#include "shellmc/ei.hpp"
#include "shellmc/quadrature.hpp"

using shellmc::adaptive_simpson;
using shellmc::expint_ei;
using shellmc::gauss_legendre_8;

namespace {

// Quadrature oracle for Ei on the negative axis, independent of the
// series/continued-fraction implementation:
//   Ei(x) = -E1(-x),  E1(z) = e^{-z} \int_0^inf e^{-s}/(z+s) ds.
double ei_oracle(double x) {
  REQUIRE(x < 0.0);
  const double z = -x;
  const auto f = [z](double s) { return std::exp(-s) / (z + s); };
  const double scale = (z >= 1.0) ? 1.0 / z : std::log1p(1.0 / z);
  const double integral = adaptive_simpson(f, 0.0, 60.0, 1e-14 * scale, 52);
  return -std::exp(-z) * integral;
}

}  // namespace

TEST_CASE("expint_ei matches the defining-integral oracle at spot values") {
  // x = -1
  const double v1 = expint_ei(-1.0);
  CHECK(v1 == doctest::Approx(-0.21938393439552).epsilon(1e-12));
  CHECK(std::fabs(v1 - ei_oracle(-1.0)) <= 1e-12 * std::fabs(v1));

  // x = -10
  const double v10 = expint_ei(-10.0);
  CHECK(v10 == doctest::Approx(-4.15697e-6).epsilon(1e-5));
  CHECK(std::fabs(v10 - ei_oracle(-10.0)) <= 1e-10 * std::fabs(v10));

  // Ei is negative and decreasing on the negative axis
  CHECK(expint_ei(-0.5) < expint_ei(-1.0));
  CHECK(expint_ei(-1.0) < 0.0);
}

TEST_CASE("expint_ei agrees with the quadrature oracle on a log-spaced grid") {
  const double lo = std::log(1e-6);
  const double hi = std::log(30.0);
  const int n = 120;
  for (int i = 0; i <= n; ++i) {
    const double z = std::exp(lo + (hi - lo) * i / n);
    const double x = -z;
    const double got = expint_ei(x);
    const double want = ei_oracle(x);
    CHECK(std::fabs(got - want) <= 1e-12 * std::fabs(want));
    CHECK(got < 0.0);
  }
}

TEST_CASE("expint_ei is strictly decreasing on random pairs") {
  std::mt19937_64 gen(12345);
  std::uniform_real_distribution<double> u(std::log(1e-8), std::log(29.0));
  for (int i = 0; i < 10000; ++i) {
    double a = -std::exp(u(gen));
    double b = -std::exp(u(gen));
    if (a == b) continue;
    if (a > b) std::swap(a, b);  // a < b < 0
    CHECK(expint_ei(a) > expint_ei(b));
  }
}

TEST_CASE("expint_ei rejects out-of-domain arguments") {
  CHECK_THROWS_AS(expint_ei(0.0), shellmc::DomainError);
  CHECK_THROWS_AS(expint_ei(1.0), shellmc::DomainError);
  CHECK_THROWS_AS(expint_ei(-1e-301), shellmc::OverflowToNegInfinity);
}

TEST_CASE("adaptive_simpson reports a stalled error estimate") {
  const auto spike = [](double t) { return 1.0 / std::sqrt(std::fabs(t)); };
  CHECK_THROWS_AS(adaptive_simpson(spike, 1e-12, 1.0, 1e-15, 3),
                  shellmc::QuadratureNonConvergence);
}

TEST_CASE("adaptive_simpson and gauss_legendre_8 handle smooth integrands") {
  const auto f = [](double t) { return std::sin(t); };
  CHECK(adaptive_simpson(f, 0.0, M_PI, 1e-13) ==
        doctest::Approx(2.0).epsilon(1e-12));

  // GL8 is exact for polynomials up to degree 15
  const auto p = [](double t) {
    double v = 0.0;
    double tp = 1.0;
    for (int k = 0; k <= 15; ++k) {
      v += (k % 3 == 0 ? 1.0 : -0.5) * tp;
      tp *= t;
    }
    return v;
  };
  const double exact = adaptive_simpson(p, -0.3, 1.7, 1e-14);
  CHECK(gauss_legendre_8(p, -0.3, 1.7) ==
        doctest::Approx(exact).epsilon(1e-13));
}
