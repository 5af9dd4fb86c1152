#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "shellmc/errors.hpp"

namespace shellmc {

// Uniform radial mesh over the active shell [r_inner, r_outer]. In moving
// inner-boundary mode the grid spacing comes from the fixed global grid on
// [0, r_outer]; cells wholly below the current inner radius are dropped and
// the cell containing it gets the inner radius as its inner edge.
struct RadialMesh {
  double r_inner = 0.0;
  double r_outer = 1.0;
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<double> center;
  std::vector<double> width;

  int n_cells() const { return static_cast<int>(center.size()); }

  static RadialMesh stationary(double r0, double r1, int n) {
    if (!(r1 > r0) || r0 < 0.0 || n < 1) {
      throw ConfigError("RadialMesh: need 0 <= r0 < r1 and n >= 1");
    }
    RadialMesh m;
    m.r_inner = r0;
    m.r_outer = r1;
    const double dr = (r1 - r0) / n;
    m.lo.resize(n);
    m.hi.resize(n);
    for (int j = 0; j < n; ++j) {
      m.lo[j] = r0 + j * dr;
      m.hi[j] = (j + 1 == n) ? r1 : r0 + (j + 1) * dr;
    }
    m.finish();
    return m;
  }

  // Active window of the fixed grid with spacing r1/n_global, above r0_t.
  static RadialMesh moving_inner(double r1, int n_global, double r0_t) {
    if (!(r1 > 0.0) || n_global < 1 || r0_t < 0.0 || r0_t >= r1) {
      throw ConfigError("RadialMesh: inner radius outside (0, r_outer)");
    }
    RadialMesh m;
    m.r_inner = r0_t;
    m.r_outer = r1;
    const double dr = r1 / n_global;
    int jf = static_cast<int>(std::floor(r0_t / dr));
    if (jf >= n_global) jf = n_global - 1;
    // A sliver thinner than 1e-9*dr would make the first cell degenerate;
    // fold it into the next cell.
    if ((jf + 1) * dr - r0_t < 1e-9 * dr && jf + 1 < n_global) ++jf;
    const int n = n_global - jf;
    m.lo.resize(n);
    m.hi.resize(n);
    for (int k = 0; k < n; ++k) {
      const int g = jf + k;
      m.lo[k] = (k == 0) ? r0_t : g * dr;
      m.hi[k] = (g + 1 == n_global) ? r1 : (g + 1) * dr;
    }
    m.finish();
    return m;
  }

  int locate(double r) const {
    const auto it = std::upper_bound(hi.begin(), hi.end(), r);
    int j = static_cast<int>(it - hi.begin());
    if (j >= n_cells()) j = n_cells() - 1;
    return j;
  }

  // All cell edges, ascending: lo[0], hi[0], ..., hi[n-1].
  std::vector<double> edges() const {
    std::vector<double> e;
    e.reserve(hi.size() + 1);
    e.push_back(lo.front());
    e.insert(e.end(), hi.begin(), hi.end());
    return e;
  }

 private:
  void finish() {
    const int n = static_cast<int>(lo.size());
    center.resize(n);
    width.resize(n);
    for (int j = 0; j < n; ++j) {
      center[j] = 0.5 * (lo[j] + hi[j]);
      width[j] = hi[j] - lo[j];
    }
  }
};

// Uniform direction mesh on [-1, 1].
struct DirectionMesh {
  int n = 0;
  double dmu = 0.0;

  explicit DirectionMesh(int n_cells) : n(n_cells), dmu(2.0 / n_cells) {
    if (n_cells < 1) throw ConfigError("DirectionMesh: need n >= 1");
  }

  double edge(int l) const { return (l == n) ? 1.0 : -1.0 + l * dmu; }
  double center(int l) const { return -1.0 + (l + 0.5) * dmu; }

  int locate(double mu) const {
    int l = static_cast<int>(std::floor((mu + 1.0) / dmu));
    if (l < 0) l = 0;
    if (l >= n) l = n - 1;
    return l;
  }
};

}  // namespace shellmc
