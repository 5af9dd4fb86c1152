#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <vector>

#include "shellmc/adjoint.hpp"
#include "shellmc/config.hpp"
#include "shellmc/kinematics.hpp"
#include "shellmc/rng.hpp"
#include "shellmc/stats.hpp"
#include "shellmc/tally.hpp"
#include "shellmc/transport.hpp"
#include "shellmc/util.hpp"

namespace shellmc {

// State of an importance-sampled history. The conserved flight coordinates
// x = r mu and y = r sqrt(1-mu^2) are primary; (j, l) is the current
// (radial, direction) cell of the table and is kept consistent with them.
struct BiasedParticle {
  double x = 0.0;
  double y = 0.0;
  double weight = 0.0;
  double time = 0.0;
  int j = 0;
  int l = 0;
  Status status = Status::in_flight;

  double r() const { return std::sqrt(x * x + y * y); }
  double mu() const {
    const double rr = r();
    if (rr <= 0.0) return 1.0;
    return std::clamp(x / rr, -1.0, 1.0);
  }
};

// Cell-crossing continuity correction: u is continuous, so utilde = I u must
// be rescaled by the importance ratio when the piecewise-constant I jumps.
inline double cross_cell_weight_update(double w, double i_from, double i_to) {
  if (!(i_from > 0.0)) {
    throw DegenerateImportance(
        "cross_cell_weight_update: vanishing source-cell importance");
  }
  return w * i_to / i_from;
}

// Emit one biased history from the outer sphere: the direction cell comes
// from the |mu| I(R1, mu) distribution, |mu| is linear within the cell, and
// the weight is the analog weight_scale times the importance integral
// (boundary_emission_weight is 1 for I == 1, so the analog engine is
// recovered exactly in that limit).
inline BiasedParticle biased_source_emit(Rng& rng, const ImportanceTable& t,
                                         double weight_scale) {
  if (!(t.boundary_emission_weight > 0.0)) {
    throw DegenerateImportance(
        "biased_source_emit: no incoming importance on the outer sphere");
  }
  const double u = rng.uniform();
  const auto it =
      std::lower_bound(t.boundary_cdf.begin(), t.boundary_cdf.end(), u);
  int l = static_cast<int>(it - t.boundary_cdf.begin());
  if (l >= t.dmesh.n) l = t.dmesh.n - 1;

  const double a = t.dmesh.edge(l);
  const double b = std::min(t.dmesh.edge(l + 1), 0.0);
  const double hi2 = a * a;  // |mu|^2 range within the cell
  const double lo2 = b * b;
  const double mu = -std::sqrt(lo2 + rng.uniform() * (hi2 - lo2));

  const double r1 = t.rmesh.r_outer;
  BiasedParticle p;
  p.j = t.rmesh.n_cells() - 1;
  p.l = l;
  p.x = r1 * mu;
  p.y = impact_parameter(r1, mu);
  p.weight = weight_scale * t.boundary_emission_weight;

  // continuity from the emission row into the tracking cell: divide by the
  // mass-averaged row importance the sampling used, multiply by the cell value
  const double mu_mass = 0.5 * (hi2 - lo2);
  if (mu_mass > 0.0 && t.boundary_cell_weight[l] > 0.0) {
    const double row_avg = t.boundary_cell_weight[l] / mu_mass;
    p.weight = cross_cell_weight_update(p.weight, row_avg, t.at(p.j, p.l));
  }
  return p;
}

enum class BiasedEvent {
  collision,
  cell_radial,
  cell_direction,
  target,
  escape,
  census,
  cutoff
};

// One surface-tracking event: fly to the nearest of {collision, radial cell
// edge, direction cell edge, census} with the current cell's constant
// modified scattering rate, apply the exp(-(kappa_t - ks~) s) weight law
// along the segment, then act. Collisions redraw the direction from the
// cell's importance-weighted distribution; cell crossings apply the
// continuity ratio. Reaching the innermost edge is the target tally (I = 1
// there by the adjoint boundary condition), the outermost edge is escape.
inline BiasedEvent biased_flight_and_collide(
    BiasedParticle& p, const ImportanceTable& t, Rng& rng,
    double census_time = std::numeric_limits<double>::infinity(),
    double weight_cutoff = -1.0) {
  const RadialMesh& rm = t.rmesh;
  const DirectionMesh& dm = t.dmesh;
  const int nr = rm.n_cells();

  const double kst = t.kst(p.j, p.l);

  const double s_coll = rng.exponential(kst);

  const double lo = rm.lo[p.j];
  const double hi = rm.hi[p.j];
  bool inward = false;
  double s_rad;
  if (p.x < 0.0 && p.y < lo) {
    s_rad = -p.x - std::sqrt((lo - p.y) * (lo + p.y));
    inward = true;
  } else {
    s_rad = -p.x + std::sqrt(std::max(0.0, (hi - p.y) * (hi + p.y)));
  }
  if (s_rad < 0.0) s_rad = 0.0;

  double s_dir = std::numeric_limits<double>::infinity();
  if (p.l + 1 < dm.n && p.y > 0.0) {
    const double m = dm.edge(p.l + 1);
    if (m < 1.0) {
      const double x_edge = m * p.y / std::sqrt((1.0 - m) * (1.0 + m));
      s_dir = std::max(0.0, x_edge - p.x);
    }
  }

  const double s_cen = census_time - p.time;

  double s = s_rad;
  BiasedEvent ev = BiasedEvent::cell_radial;
  if (s_dir < s) {
    s = s_dir;
    ev = BiasedEvent::cell_direction;
  }
  if (s_coll < s) {
    s = s_coll;
    ev = BiasedEvent::collision;
  }
  if (s_cen <= s) {
    s = s_cen;
    ev = BiasedEvent::census;
  }

  // Weight law for the flat-importance cell: inside the cell the transform
  // derivative vanishes, so the modified total rate is the physical kappa_t;
  // the importance drift lives entirely in the cell-crossing ratios. Using
  // the continuous-field kt_tilde = S/I here as well would count the drift
  // twice (once in the exponent, once in the ratios) and inflate the mean.
  p.weight *= std::exp(-(t.kappa_t - kst) * s);
  p.x += s;
  p.time += s;

  if (weight_cutoff >= 0.0 && p.weight < weight_cutoff) {
    p.status = Status::absorbed_cutoff;
    return BiasedEvent::cutoff;
  }

  switch (ev) {
    case BiasedEvent::cell_radial: {
      if (inward) {
        if (p.j == 0) {
          // crossing into the target boundary, where the adjoint condition
          // fixes I = 1: the continuity rule converts the cell-referenced
          // weight into the tallied one (grazing arrivals sit in direction
          // cells whose interior importance is far from the boundary value)
          p.weight = cross_cell_weight_update(p.weight, t.at(0, p.l), 1.0);
          p.status = Status::exited_inner;
          return BiasedEvent::target;
        }
        p.weight =
            cross_cell_weight_update(p.weight, t.at(p.j, p.l), t.at(p.j - 1, p.l));
        --p.j;
      } else {
        if (p.j == nr - 1) {
          p.status = Status::exited_outer;
          return BiasedEvent::escape;
        }
        p.weight =
            cross_cell_weight_update(p.weight, t.at(p.j, p.l), t.at(p.j + 1, p.l));
        ++p.j;
      }
      return BiasedEvent::cell_radial;
    }
    case BiasedEvent::cell_direction: {
      p.weight =
          cross_cell_weight_update(p.weight, t.at(p.j, p.l), t.at(p.j, p.l + 1));
      ++p.l;
      return BiasedEvent::cell_direction;
    }
    case BiasedEvent::collision: {
      const double u = rng.uniform();
      const auto row = t.direction_cdf.begin() +
                       static_cast<std::ptrdiff_t>(p.j) * dm.n;
      const auto it = std::lower_bound(row, row + dm.n, u);
      int lnew = static_cast<int>(it - row);
      if (lnew >= dm.n) lnew = dm.n - 1;
      const double mu = rng.uniform(dm.edge(lnew), dm.edge(lnew + 1));
      const double r = p.r();
      p.l = lnew;
      p.x = r * mu;
      p.y = impact_parameter(r, mu);
      return BiasedEvent::collision;
    }
    default: {
      p.status = Status::census;
      return BiasedEvent::census;
    }
  }
}

namespace detail {

struct BiasedTable {
  RadialMesh mesh;
  ImportanceTable table;
};

inline BiasedTable build_biased_table(const ProblemConfig& cfg, double r0) {
  BiasedTable out;
  if (cfg.mode == Mode::stationary) {
    out.mesh = RadialMesh::stationary(r0, cfg.r1, cfg.n_r);
  } else {
    out.mesh = RadialMesh::moving_inner(cfg.r1, cfg.n_r, r0);
  }
  const DirectionMesh dm(cfg.n_mu);
  const auto sol = solve_phi(assemble_matrix(out.mesh, cfg.kappa_s, cfg.kappa_t),
                             assemble_rhs(out.mesh, cfg.kappa_s, cfg.kappa_t));
  out.table = importance_table(sol, out.mesh, dm, cfg.kappa_s, cfg.kappa_t,
                               cfg.workers);
  if (out.table.degenerate_outer || !(out.table.boundary_emission_weight > 0.0)) {
    throw DegenerateImportance(
        "run_biased: degenerate importance on the outer boundary");
  }
  return out;
}

}  // namespace detail

// Importance-sampled run. Stationary mode builds the table once; unsteady
// mode rebuilds it each time step for the frozen inner radius and carries
// censused particles across, rescaling their weight by the new/old cell
// importance ratio (the same continuity rule as a cell crossing, applied to
// the table swap).
inline TallyResult run_biased(const ProblemConfig& cfg) {
  cfg.validate();
  if (!cfg.importance) {
    throw ConfigError("run_biased: importance flag is off; use run_analog");
  }
  if (cfg.tally_profile) {
    throw ConfigError("run_biased: the shell profile tally is analog-only");
  }
  const auto t0 = std::chrono::steady_clock::now();
  const double cutoff = cfg.biased_weight_cutoff ? cfg.weight_cutoff : -1.0;

  TallyResult res;
  double table_seconds = 0.0;
  std::vector<double> contribution;
  std::vector<Status> final_status;

  if (cfg.mode == Mode::stationary) {
    const auto tb0 = std::chrono::steady_clock::now();
    const auto bt = detail::build_biased_table(cfg, cfg.alpha);
    const auto tb1 = std::chrono::steady_clock::now();
    table_seconds = std::chrono::duration<double>(tb1 - tb0).count();

    const long long n = cfg.particles;
    contribution.assign(n, 0.0);
    final_status.assign(n, Status::in_flight);
    parallel_for_chunks(n, cfg.workers, 4096,
                        [&](long long b, long long e, long long) {
                          for (long long i = b; i < e; ++i) {
                            Rng rng(cfg.seed, static_cast<std::uint64_t>(i));
                            auto p = biased_source_emit(
                                rng, bt.table, 0.5 * cfg.t_final);
                            for (long long ev = 0;; ++ev) {
                              if (ev >= detail::kEventGuard) {
                                throw EventLoopStall(
                                    "run_biased: event budget exceeded");
                              }
                              const auto kind = biased_flight_and_collide(
                                  p, bt.table, rng,
                                  std::numeric_limits<double>::infinity(),
                                  cutoff);
                              if (kind == BiasedEvent::target) {
                                contribution[i] += p.weight;
                                break;
                              }
                              if (kind == BiasedEvent::escape ||
                                  kind == BiasedEvent::cutoff) {
                                break;
                              }
                            }
                            final_status[i] = p.status;
                          }
                        });
    res.n_histories = n;
  } else {
    const long long steps = cfg.n_steps();
    const long long m_per = cfg.particles_per_step;
    const double send = cfg.source_end();

    long long n_tot = 0;
    std::vector<long long> first_index(steps, -1);
    for (long long m = 0; m < steps; ++m) {
      if (static_cast<double>(m) * cfg.dt < send) {
        first_index[m] = n_tot;
        n_tot += m_per;
      }
    }
    contribution.assign(n_tot, 0.0);
    final_status.assign(n_tot, Status::in_flight);

    struct Carried {
      BiasedParticle p;
      Rng rng;
      long long history;
      double i_old;
    };
    std::vector<Carried> bank;

    for (long long m = 0; m < steps; ++m) {
      const double t_step = static_cast<double>(m) * cfg.dt;
      const auto tb0 = std::chrono::steady_clock::now();
      const auto bt = detail::build_biased_table(cfg, cfg.inner_radius(t_step));
      const auto tb1 = std::chrono::steady_clock::now();
      table_seconds += std::chrono::duration<double>(tb1 - tb0).count();
      const double census = static_cast<double>(m + 1) * cfg.dt;

      // carried particles: re-locate in the new table, continuity-rescale
      std::vector<Carried> active;
      active.reserve(bank.size() + (first_index[m] >= 0 ? m_per : 0));
      for (auto& c : bank) {
        const double r = c.p.r();
        if (r <= bt.mesh.r_inner) {
          // the boundary overtook the particle between steps; tally through
          // the I = 1 target interface
          contribution[c.history] +=
              cross_cell_weight_update(c.p.weight, c.i_old, 1.0);
          final_status[c.history] = Status::exited_inner;
          continue;
        }
        c.p.j = bt.mesh.locate(r);
        c.p.weight = cross_cell_weight_update(c.p.weight, c.i_old,
                                              bt.table.at(c.p.j, c.p.l));
        active.push_back(c);
      }
      bank.clear();

      if (first_index[m] >= 0) {
        const double active_dt = std::min(cfg.dt, send - t_step);
        const double w_scale =
            active_dt / (2.0 * static_cast<double>(m_per));
        for (long long k = 0; k < m_per; ++k) {
          Carried c;
          c.history = first_index[m] + k;
          c.rng = Rng(cfg.seed, static_cast<std::uint64_t>(c.history));
          c.p = biased_source_emit(c.rng, bt.table, w_scale);
          c.p.time = t_step;
          active.push_back(c);
        }
      }

      const long long n_active = static_cast<long long>(active.size());
      std::vector<std::vector<Carried>> survivors(
          (n_active + 1023) / 1024);
      parallel_for_chunks(
          n_active, cfg.workers, 1024,
          [&](long long b, long long e, long long chunk_id) {
            for (long long i = b; i < e; ++i) {
              Carried& c = active[i];
              for (long long ev = 0;; ++ev) {
                if (ev >= detail::kEventGuard) {
                  throw EventLoopStall("run_biased: event budget exceeded");
                }
                const auto kind = biased_flight_and_collide(
                    c.p, bt.table, c.rng, census, cutoff);
                if (kind == BiasedEvent::target) {
                  contribution[c.history] += c.p.weight;
                  final_status[c.history] = Status::exited_inner;
                  break;
                }
                if (kind == BiasedEvent::escape ||
                    kind == BiasedEvent::cutoff) {
                  final_status[c.history] = c.p.status;
                  break;
                }
                if (kind == BiasedEvent::census) {
                  if (m + 1 >= steps) {
                    final_status[c.history] = Status::census;
                  } else {
                    c.i_old = bt.table.at(c.p.j, c.p.l);
                    survivors[chunk_id].push_back(c);
                  }
                  break;
                }
              }
            }
          });
      for (auto& sv : survivors) {
        bank.insert(bank.end(), sv.begin(), sv.end());
      }
    }
    res.n_histories = n_tot;
  }

  const double scale =
      (cfg.mode == Mode::unsteady) ? static_cast<double>(res.n_histories) : 1.0;
  SampleAccumulator acc;
  long long reached = 0;
  for (long long i = 0; i < res.n_histories; ++i) {
    acc.add(scale * contribution[i]);
    if (contribution[i] > 0.0) ++reached;
    detail::count_status(res, final_status[i]);
  }
  const auto mo = finalize(acc);
  res.flux = mo.mean;
  res.sigma2 = mo.sigma2;
  res.Sigma2 = mo.Sigma2;
  res.p_reach =
      static_cast<double>(reached) / static_cast<double>(res.n_histories);

  const auto t1 = std::chrono::steady_clock::now();
  res.time1_s = std::chrono::duration<double>(t1 - t0).count();
  res.table_build_s = table_seconds;
  res.time2_s = res.time1_s - table_seconds;
  return res;
}

}  // namespace shellmc
