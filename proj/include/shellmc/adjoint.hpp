#pragma once

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "shellmc/ei.hpp"
#include "shellmc/errors.hpp"
#include "shellmc/kinematics.hpp"
#include "shellmc/mesh.hpp"
#include "shellmc/quadrature.hpp"
#include "shellmc/util.hpp"

namespace shellmc {

namespace detail {

// Antiderivative of e^{kt*theta} (1 + (W^2 - r^2)/theta^2) with respect to
// theta, evaluated on theta < 0. This is the closed form behind every
// mu-integrated boundary term of the radial integral equation.
inline double boundary_antiderivative(double theta, double w2_minus_r2,
                                      double kt) {
  if (!(theta < 0.0)) {
    throw NumericalError(
        "boundary term: non-negative Ei argument, mesh inconsistent");
  }
  const double e = std::exp(kt * theta);
  return e / kt + w2_minus_r2 * (kt * expint_ei(kt * theta) - e / theta);
}

}  // namespace detail

// Right-hand side b_j of the phi system: the mu-integral of the inner-sphere
// boundary exponential, reduced to Ei differences with theta endpoints
// R0 - r_j and -sqrt(r_j^2 - R0^2).
inline std::vector<double> assemble_rhs(const RadialMesh& m, double kappa_s,
                                        double kappa_t) {
  const int n = m.n_cells();
  std::vector<double> b(n, 0.0);
  if (kappa_s == 0.0) return b;
  if (!(kappa_t > 0.0) || kappa_s < 0.0 || kappa_s > kappa_t) {
    throw DomainError("assemble_rhs: need 0 <= kappa_s <= kappa_t, kappa_t > 0");
  }
  const double r0 = m.r_inner;
  for (int j = 0; j < n; ++j) {
    const double r = m.center[j];
    const double u = std::sqrt((r - r0) * (r + r0));
    const double w2mr2 = (r0 - r) * (r0 + r);
    const double upper = detail::boundary_antiderivative(-u, w2mr2, kappa_t);
    const double lower =
        detail::boundary_antiderivative(r0 - r, w2mr2, kappa_t);
    b[j] = 0.25 * kappa_s * (upper - lower);
    if (!std::isfinite(b[j])) {
      throw NumericalError("assemble_rhs: non-finite entry");
    }
  }
  return b;
}

// Outer-sphere boundary coefficient c_j from the H = 1 closure. Derived the
// same way as b_j but along characteristics that leave through r = R1, where
// the exit factor is exp(kt*(r*mu - sqrt(r^2 mu^2 - r^2 + R1^2))); both
// endpoints of the resulting bracket are strictly negative.
inline double outer_boundary_coefficient(const RadialMesh& m, int j,
                                         double kappa_s, double kappa_t) {
  if (kappa_s == 0.0) return 0.0;
  const double r0 = m.r_inner;
  const double r1 = m.r_outer;
  const double r = m.center[j];
  const double u = std::sqrt((r - r0) * (r + r0));
  const double w2mr2 = (r1 - r) * (r1 + r);
  const double span = std::sqrt((r1 - r0) * (r1 + r0));
  const double upper =
      detail::boundary_antiderivative(r - r1, w2mr2, kappa_t);
  const double lower =
      detail::boundary_antiderivative(-u - span, w2mr2, kappa_t);
  return 0.25 * kappa_s * (upper - lower);
}

// Dense collocation matrix A of the phi system (Id - A) phi = b.
// Off-diagonal entries are the Ei-difference kernel times the source-cell
// width; the diagonal comes from the H = 1 row identity
//   r_j kappa_s = b_j + c_j + kappa_t sum_i A_ji r_i.
inline std::vector<double> assemble_matrix(const RadialMesh& m, double kappa_s,
                                           double kappa_t) {
  const int n = m.n_cells();
  std::vector<double> a(static_cast<std::size_t>(n) * n, 0.0);
  if (kappa_s == 0.0) return a;
  if (!(kappa_t > 0.0) || kappa_s < 0.0 || kappa_s > kappa_t) {
    throw DomainError(
        "assemble_matrix: need 0 <= kappa_s <= kappa_t, kappa_t > 0");
  }
  const double r0 = m.r_inner;
  std::vector<double> u(n);
  for (int j = 0; j < n; ++j) {
    const double r = m.center[j];
    u[j] = std::sqrt((r - r0) * (r + r0));
  }
  const std::vector<double> b = assemble_rhs(m, kappa_s, kappa_t);
  for (int j = 0; j < n; ++j) {
    const double rj = m.center[j];
    double row_moment = 0.0;  // sum_{i != j} A_ji r_i
    for (int i = 0; i < n; ++i) {
      if (i == j) continue;
      const double far = expint_ei(-kappa_t * (u[j] + u[i]));
      const double near = expint_ei(-kappa_t * std::fabs(rj - m.center[i]));
      const double entry = 0.5 * kappa_s * m.width[i] * (far - near);
      if (!std::isfinite(entry)) {
        throw NumericalError("assemble_matrix: non-finite entry");
      }
      a[static_cast<std::size_t>(j) * n + i] = entry;
      row_moment += entry * m.center[i];
    }
    const double cj = outer_boundary_coefficient(m, j, kappa_s, kappa_t);
    a[static_cast<std::size_t>(j) * n + j] =
        (rj * kappa_s - b[j] - cj) / (kappa_t * rj) - row_moment / rj;
    if (!std::isfinite(a[static_cast<std::size_t>(j) * n + j])) {
      throw NumericalError("assemble_matrix: non-finite diagonal");
    }
  }
  return a;
}

struct PhiSolution {
  std::vector<double> phi;
  std::vector<double> rhs;
  std::vector<double> matrix_a;  // row-major A
  double residual_norm = 0.0;    // ||(Id - A) phi - b||_inf
  double rhs_norm = 0.0;         // ||b||_inf
  bool negative_phi = false;     // any phi_j < -1e-12 before clamping
};

// Direct dense solve of (Id - A) phi = b by LU with partial pivoting.
inline PhiSolution solve_phi(std::vector<double> a, std::vector<double> b) {
  const int n = static_cast<int>(b.size());
  PhiSolution out;
  out.rhs = b;
  out.matrix_a = a;

  // M = Id - A, kept twice: one copy factorized, one for the residual.
  std::vector<double> m(a.size());
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const std::size_t k = static_cast<std::size_t>(j) * n + i;
      m[k] = (i == j ? 1.0 : 0.0) - a[k];
    }
  }
  std::vector<double> lu = m;
  std::vector<double> x = b;

  for (int k = 0; k < n; ++k) {
    int p = k;
    double best = std::fabs(lu[static_cast<std::size_t>(k) * n + k]);
    for (int i = k + 1; i < n; ++i) {
      const double v = std::fabs(lu[static_cast<std::size_t>(i) * n + k]);
      if (v > best) {
        best = v;
        p = i;
      }
    }
    if (best < 1e-300) {
      throw SingularSystem("solve_phi: factorization failed (zero pivot)");
    }
    if (p != k) {
      for (int c = 0; c < n; ++c) {
        std::swap(lu[static_cast<std::size_t>(k) * n + c],
                  lu[static_cast<std::size_t>(p) * n + c]);
      }
      std::swap(x[k], x[p]);
    }
    const double piv = lu[static_cast<std::size_t>(k) * n + k];
    for (int i = k + 1; i < n; ++i) {
      const double f = lu[static_cast<std::size_t>(i) * n + k] / piv;
      if (f == 0.0) continue;
      lu[static_cast<std::size_t>(i) * n + k] = 0.0;
      for (int c = k + 1; c < n; ++c) {
        lu[static_cast<std::size_t>(i) * n + c] -=
            f * lu[static_cast<std::size_t>(k) * n + c];
      }
      x[i] -= f * x[k];
    }
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = x[i];
    for (int c = i + 1; c < n; ++c) {
      s -= lu[static_cast<std::size_t>(i) * n + c] * x[c];
    }
    x[i] = s / lu[static_cast<std::size_t>(i) * n + i];
  }

  double res = 0.0, bn = 0.0;
  for (int j = 0; j < n; ++j) {
    double dot = 0.0;
    for (int i = 0; i < n; ++i) {
      dot += m[static_cast<std::size_t>(j) * n + i] * x[i];
    }
    res = std::max(res, std::fabs(dot - b[j]));
    bn = std::max(bn, std::fabs(b[j]));
  }
  out.residual_norm = res;
  out.rhs_norm = bn;

  for (double& v : x) {
    if (v < 0.0) {
      if (v < -1e-12) out.negative_phi = true;
      v = 0.0;  // M-matrix structure guarantees phi >= 0; drop rounding dust
    }
  }
  out.phi = std::move(x);
  return out;
}

// Pointwise importance from the characteristics formula: inner-boundary
// exponential (only inside the mu < mu_d(r) cone) plus the phi-weighted path
// integral, integrated cell by cell with Gauss-Legendre and split at the
// turning point s = 0.
inline double importance_characteristic(const RadialMesh& m,
                                        std::span<const double> phi, double kt,
                                        double r, double mu,
                                        bool phi_nonzero = true) {
  const double r0 = m.r_inner;
  const double r1 = m.r_outer;
  const double x = r * mu;
  const double y2 = r * r * std::max(0.0, 1.0 - mu * mu);
  const double y = std::sqrt(y2);
  const double mud = mu_d(std::max(r, r0), r0);

  double value = 0.0;
  double s_end;
  if (r0 > 0.0 && mu < mud) {
    const double root = std::sqrt(std::max(0.0, r0 * r0 - y2));
    value += std::exp(kt * (x + root));
    s_end = -root;
  } else {
    s_end = std::sqrt(std::max(0.0, r1 * r1 - y2));
  }
  if (!phi_nonzero || s_end <= x) return value;

  // Breakpoints where the path crosses a cell edge, plus the turning point.
  static thread_local std::vector<double> pts;
  pts.clear();
  pts.push_back(x);
  pts.push_back(s_end);
  if (x < 0.0 && 0.0 < s_end) pts.push_back(0.0);
  const double eps = 1e-14 * (std::fabs(x) + std::fabs(s_end) + 1.0);
  auto push_interior = [&](double s) {
    if (s > x + eps && s < s_end - eps) pts.push_back(s);
  };
  push_interior(-std::sqrt(std::max(0.0, r0 * r0 - y2)));
  for (int j = 0; j < m.n_cells(); ++j) {
    const double e = m.hi[j];
    if (e <= y) continue;
    const double sp = std::sqrt((e - y) * (e + y));
    push_interior(sp);
    push_interior(-sp);
  }
  std::sort(pts.begin(), pts.end());

  const auto integrand = [&](double s) {
    return std::exp(kt * (x - s)) / std::sqrt(s * s + y2);
  };
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    const double a = pts[k];
    const double bnd = pts[k + 1];
    if (bnd - a <= eps) continue;
    const double rm = std::sqrt(0.25 * (a + bnd) * (a + bnd) + y2);
    const double w = phi[m.locate(rm)];
    if (w == 0.0) continue;
    value += w * gauss_legendre_8(integrand, a, bnd);
  }
  return value;
}

// Piecewise-constant importance I(r_j, mu_l) with the modified kernels and
// the sampling distributions the biased engine consumes.
struct ImportanceTable {
  RadialMesh rmesh;
  DirectionMesh dmesh{1};
  double kappa_s = 0.0;
  double kappa_t = 0.0;

  std::vector<double> value;       // I_jl, row-major j*n_mu + l
  std::vector<double> mean_value;  // <I>_j = (1/2) integral of I dmu
  std::vector<double> source;      // S_j = phi_j / r_j
  std::vector<double> ks_tilde;    // kappa_s <I>_j / I_jl
  std::vector<double> kt_tilde;    // S_j / I_jl
  std::vector<double> direction_cdf;  // per j, cumulative over l, ends at 1

  std::vector<double> boundary_value;        // I(R1, mu_l)
  std::vector<double> boundary_cell_weight;  // per l: int_cell |mu| I(R1,.) dmu
  std::vector<double> boundary_cdf;
  double boundary_emission_weight = 0.0;  // 2 * sum of cell weights; 1 if I == 1

  std::vector<std::pair<int, int>> degenerate_cells;
  bool degenerate_outer = false;

  double at(int j, int l) const { return value[idx(j, l)]; }
  double kst(int j, int l) const { return ks_tilde[idx(j, l)]; }
  double ktt(int j, int l) const { return kt_tilde[idx(j, l)]; }
  std::size_t idx(int j, int l) const {
    return static_cast<std::size_t>(j) * dmesh.n + l;
  }
};

inline ImportanceTable importance_table(const PhiSolution& sol,
                                        const RadialMesh& rm,
                                        const DirectionMesh& dm,
                                        double kappa_s, double kappa_t,
                                        int workers = 1) {
  const int nr = rm.n_cells();
  const int nmu = dm.n;
  ImportanceTable t;
  t.rmesh = rm;
  t.dmesh = dm;
  t.kappa_s = kappa_s;
  t.kappa_t = kappa_t;
  t.value.assign(static_cast<std::size_t>(nr) * nmu, 0.0);
  t.mean_value.assign(nr, 0.0);
  t.source.assign(nr, 0.0);
  t.ks_tilde.assign(t.value.size(), 0.0);
  t.kt_tilde.assign(t.value.size(), 0.0);
  t.direction_cdf.assign(t.value.size(), 0.0);

  bool phi_nonzero = false;
  for (double p : sol.phi) {
    if (p != 0.0) {
      phi_nonzero = true;
      break;
    }
  }

  // Per-cell direction masses m_jl = int_cell I(r_j, mu) dmu. I jumps at
  // mu_d(r_j), in both of its pieces: the inner-boundary exponential switches
  // off and the path integral switches from the inner tangent to the full
  // chord. The exponential's cell integral has the same closed form as b_j;
  // the path piece of a straddling cell is split at mu_d with one midpoint
  // evaluation per side. The same masses normalize <I>_j, kappa_s_tilde and
  // the collision direction distribution, which keeps the biased collision
  // operator exactly consistent.
  std::vector<double> mass(t.value.size(), 0.0);

  parallel_for_chunks(nr, workers, 4, [&](long long jb, long long je, long long) {
    for (long long jj = jb; jj < je; ++jj) {
      const int j = static_cast<int>(jj);
      const double r = rm.center[j];
      const double mud = mu_d(r, rm.r_inner);
      const double w2mr2 = (rm.r_inner - r) * (rm.r_inner + r);
      const auto theta = [&](double mu) {
        const double disc = std::max(0.0, r * r * mu * mu + w2mr2);
        return r * mu + std::sqrt(disc);
      };
      // path integral only, exponential removed below the cone boundary
      const auto path_only = [&](double mu) {
        double p = importance_characteristic(rm, sol.phi, kappa_t, r, mu,
                                             phi_nonzero);
        if (rm.r_inner > 0.0 && mu < mud) p -= std::exp(kappa_t * theta(mu));
        return p;
      };
      for (int l = 0; l < nmu; ++l) {
        t.value[t.idx(j, l)] = importance_characteristic(
            rm, sol.phi, kappa_t, r, dm.center(l), phi_nonzero);
        const double a = dm.edge(l);
        const double b = dm.edge(l + 1);
        const bool straddles = rm.r_inner > 0.0 && a < mud && mud < b;
        double m;
        if (straddles) {
          // integrate the path piece on each side of the jump with
          // mu = mu_d -+ v^2, which removes the square-root slope there
          const auto below = [&](double v) {
            return 2.0 * v * path_only(mud - v * v);
          };
          const auto above = [&](double v) {
            return 2.0 * v * path_only(mud + v * v);
          };
          m = gauss_legendre_8(below, 0.0, std::sqrt(mud - a)) +
              gauss_legendre_8(above, 0.0, std::sqrt(b - mud));
        } else if (rm.r_inner > 0.0 && dm.center(l) < mud) {
          m = (t.value[t.idx(j, l)] -
               std::exp(kappa_t * theta(dm.center(l)))) *
              dm.dmu;
        } else {
          m = t.value[t.idx(j, l)] * dm.dmu;
        }
        if (rm.r_inner > 0.0 && a < mud) {
          const double hi_mu = std::min(b, mud);
          if (kappa_t > 0.0) {
            m += 0.5 / r * (detail::boundary_antiderivative(theta(hi_mu),
                                                            w2mr2, kappa_t) -
                            detail::boundary_antiderivative(theta(a), w2mr2,
                                                            kappa_t));
          } else {
            m += hi_mu - a;  // streaming limit: the exponential is 1
          }
        }
        mass[t.idx(j, l)] = std::max(m, 0.0);
        // The cell holding the mu_d jump is represented by its mass average:
        // a center value from one side of the jump misrepresents the cell,
        // and the collision channel is only exactly balanced when the
        // sampling mass and the tracked cell value agree.
        if (straddles) {
          t.value[t.idx(j, l)] = mass[t.idx(j, l)] / dm.dmu;
        }
      }
    }
  });

  constexpr double clamp_floor = 1e-300;
  for (int j = 0; j < nr; ++j) {
    double msum = 0.0;
    for (int l = 0; l < nmu; ++l) msum += mass[t.idx(j, l)];
    t.mean_value[j] = 0.5 * msum;
    t.source[j] = sol.phi[j] / rm.center[j];
    double cum = 0.0;
    for (int l = 0; l < nmu; ++l) {
      double& v = t.value[t.idx(j, l)];
      if (v < clamp_floor) {
        t.degenerate_cells.emplace_back(j, l);
        if (j == nr - 1) t.degenerate_outer = true;
        v = clamp_floor;
      }
      t.ks_tilde[t.idx(j, l)] = kappa_s * t.mean_value[j] / v;
      t.kt_tilde[t.idx(j, l)] = t.source[j] / v;
      cum += mass[t.idx(j, l)];
      t.direction_cdf[t.idx(j, l)] = cum;
    }
    if (cum <= 0.0) {
      throw DegenerateImportance(
          "importance_table: vanishing direction distribution in cell " +
          std::to_string(j));
    }
    for (int l = 0; l < nmu; ++l) t.direction_cdf[t.idx(j, l)] /= cum;
    t.direction_cdf[t.idx(j, nmu - 1)] = 1.0;
  }

  // Emission row at r = R1: per-cell integrals of |mu| I(R1, mu) over the
  // incoming half, split at the grazing direction where the inner-boundary
  // indicator switches.
  t.boundary_value.assign(nmu, 0.0);
  t.boundary_cell_weight.assign(nmu, 0.0);
  t.boundary_cdf.assign(nmu, 0.0);
  const double mud1 = mu_d(rm.r_outer, rm.r_inner);
  const auto bdry = [&](double mu) {
    return std::fabs(mu) * importance_characteristic(rm, sol.phi, kappa_t,
                                                     rm.r_outer, mu,
                                                     phi_nonzero);
  };
  double wsum = 0.0;
  for (int l = 0; l < nmu; ++l) {
    t.boundary_value[l] = importance_characteristic(
        rm, sol.phi, kappa_t, rm.r_outer, dm.center(l), phi_nonzero);
    const double a = dm.edge(l);
    const double b = std::min(dm.edge(l + 1), 0.0);
    if (b <= a) continue;  // outgoing cells carry no emission
    double w;
    if (a < mud1 && mud1 < b) {
      w = gauss_legendre_8(bdry, a, mud1) + gauss_legendre_8(bdry, mud1, b);
    } else {
      w = gauss_legendre_8(bdry, a, b);
    }
    t.boundary_cell_weight[l] = w;
    wsum += w;
    t.boundary_cdf[l] = wsum;
  }
  t.boundary_emission_weight = 2.0 * wsum;
  if (wsum > 0.0) {
    for (double& c : t.boundary_cdf) c /= wsum;
    // cdf must terminate at exactly 1 on the last emitting cell
    for (int l = nmu - 1; l >= 0; --l) {
      if (t.boundary_cell_weight[l] > 0.0) {
        t.boundary_cdf[l] = 1.0;
        break;
      }
    }
    // non-emitting cells carry the running value so the cdf is monotone
    // and binary-searchable
    for (int l = 1; l < nmu; ++l) {
      t.boundary_cdf[l] = std::max(t.boundary_cdf[l], t.boundary_cdf[l - 1]);
    }
  }
  return t;
}

// Planar-slab eigenpair: K solves (kappa_s / 2K) ln((kt+K)/(kt-K)) = 1 on
// (0, kappa_t); the associated direction density is
// Phi_K(mu) = kappa_s / (2 (kappa_t - K mu)).
struct PlanarEigen {
  double K = 0.0;
  double kappa_s = 0.0;
  double kappa_t = 0.0;
  double density(double mu) const { return 0.5 * kappa_s / (kappa_t - K * mu); }
};

inline PlanarEigen planar_eigenvalue(double kappa_s, double kappa_t) {
  if (!(kappa_s > 0.0) || kappa_s > kappa_t) {
    throw DomainError("planar_eigenvalue: need 0 < kappa_s <= kappa_t");
  }
  if (kappa_s == kappa_t) return {0.0, kappa_s, kappa_t};
  const auto g = [&](double k) {
    return 0.5 * kappa_s / k * std::log((kappa_t + k) / (kappa_t - k)) - 1.0;
  };
  double lo = kappa_t * 1e-12;
  double hi = kappa_t * (1.0 - 1e-15);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) > 0.0) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return {0.5 * (lo + hi), kappa_s, kappa_t};
}

}  // namespace shellmc
