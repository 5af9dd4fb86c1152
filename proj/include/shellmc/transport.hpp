#pragma once

#include <chrono>
#include <cmath>
#include <vector>

#include "shellmc/config.hpp"
#include "shellmc/errors.hpp"
#include "shellmc/kinematics.hpp"
#include "shellmc/rng.hpp"
#include "shellmc/stats.hpp"
#include "shellmc/tally.hpp"
#include "shellmc/util.hpp"

namespace shellmc {

struct Particle {
  double r = 0.0;
  double mu = 0.0;
  double weight = 0.0;
  double time = 0.0;
  Status status = Status::in_flight;
};

// Lambert cosine emission on the outer sphere: density 2|mu| over incoming
// directions [-1, 0).
inline Particle sample_boundary_source(Rng& rng, double r1, double t,
                                       double weight) {
  Particle p;
  p.r = r1;
  p.mu = -std::sqrt(1.0 - rng.uniform());
  p.weight = weight;
  p.time = t;
  return p;
}

// Isotropic emission from the shell r = r_source.
inline Particle sample_shell_source(Rng& rng, double r_source, double t,
                                    double weight) {
  Particle p;
  p.r = r_source;
  p.mu = rng.uniform(-1.0, 1.0);
  p.weight = weight;
  p.time = t;
  return p;
}

// Isotropic scattering kernel k = 1/2: outgoing direction uniform on [-1, 1].
inline double scatter_direction(Rng& rng) { return rng.uniform(-1.0, 1.0); }

// Free path to the next scattering event; absorption is continuous.
inline double sample_collision_distance(Rng& rng, double kappa_s) {
  return rng.exponential(kappa_s);
}

inline double attenuate_weight(double w, double kappa_a, double s) {
  return w * std::exp(-kappa_a * s);
}

namespace detail {

constexpr long long kEventGuard = 1000000;

struct HistoryOutcome {
  double contribution = 0.0;
  Status status = Status::in_flight;
};

// One analog history tracked to termination. In unsteady mode the inner
// radius is frozen at its step-start value and the history pauses at each
// census before resuming against the updated radius.
inline HistoryOutcome track_analog(const ProblemConfig& cfg, Particle p,
                                   Rng& rng, ProfileTally* profile) {
  const double kappa_a = cfg.kappa_t - cfg.kappa_s;
  const bool unsteady = cfg.mode == Mode::unsteady;
  HistoryOutcome out;
  long long step =
      unsteady ? static_cast<long long>(std::floor(p.time / cfg.dt + 1e-9))
               : 0;
  const long long last_step = unsteady ? cfg.n_steps() : 0;

  for (long long events = 0;; ++events) {
    if (events >= kEventGuard) {
      out.status = Status::stalled;
      break;
    }
    double r0;
    double census_s = std::numeric_limits<double>::infinity();
    if (unsteady) {
      r0 = cfg.inner_radius(static_cast<double>(step) * cfg.dt);
      if (p.r <= r0) {
        // the boundary overtook the particle at a census
        out.contribution += p.weight;
        out.status = Status::exited_inner;
        break;
      }
      census_s = (static_cast<double>(step) + 1.0) * cfg.dt - p.time;
    } else {
      r0 = cfg.alpha;
    }

    const double s_coll = sample_collision_distance(rng, cfg.kappa_s);
    const auto shell = distance_to_shells(p.r, p.mu, r0, cfg.r1);
    const double s = std::min({s_coll, shell.s, census_s});

    if (profile) profile->add_segment(p.r, p.mu, s, p.weight, kappa_a);

    const auto end = advance_free_flight(p.r, p.mu, s);
    p.r = end.r;
    p.mu = end.mu;
    p.time += s;
    p.weight = attenuate_weight(p.weight, kappa_a, s);

    if (p.weight < cfg.weight_cutoff) {
      out.status = Status::absorbed_cutoff;
      break;
    }

    if (s_coll <= s) {
      p.mu = scatter_direction(rng);
      continue;
    }
    if (unsteady && census_s <= shell.s) {
      ++step;
      if (step >= last_step) {
        out.status = Status::census;
        break;
      }
      continue;
    }
    if (shell.hit == ShellHit::inner) {
      out.contribution += p.weight;
      out.status = Status::exited_inner;
      break;
    }
    out.status = Status::exited_outer;
    break;
  }
  return out;
}

inline void count_status(TallyResult& res, Status s) {
  switch (s) {
    case Status::exited_inner:
      ++res.n_exit_inner;
      break;
    case Status::exited_outer:
      ++res.n_exit_outer;
      break;
    case Status::absorbed_cutoff:
      ++res.n_cutoff;
      break;
    case Status::census:
      ++res.n_census;
      break;
    default:
      ++res.n_stalled;
      break;
  }
}

inline RadialMesh profile_mesh(const ProblemConfig& cfg) {
  const int cells = cfg.profile_cells > 0 ? cfg.profile_cells : cfg.n_r;
  const double inner = std::min(cfg.inner_radius(0.0),
                                cfg.inner_radius(cfg.t_final));
  return RadialMesh::stationary(inner, cfg.r1, cells);
}

}  // namespace detail

// Analog Monte Carlo run. Stationary mode tracks cfg.particles histories to
// exit or cutoff; unsteady mode emits particles_per_step per active step and
// censuses them across step boundaries up to t_final. Per-history target
// contributions are kept by history index, so the reduction is identical for
// any worker count.
inline TallyResult run_analog(const ProblemConfig& cfg) {
  cfg.validate();
  if (cfg.importance) {
    throw ConfigError("run_analog: importance flag is set; use run_biased");
  }
  const auto t0 = std::chrono::steady_clock::now();

  const bool unsteady = cfg.mode == Mode::unsteady;

  // Emission schedule
  long long n_tot;
  long long active_steps = 0;
  if (unsteady) {
    const double send = cfg.source_end();
    active_steps = 0;
    for (long long m = 0; m < cfg.n_steps(); ++m) {
      if (static_cast<double>(m) * cfg.dt < send) ++active_steps;
    }
    n_tot = active_steps * cfg.particles_per_step;
  } else {
    n_tot = cfg.particles;
  }

  std::vector<double> contribution(n_tot, 0.0);
  std::vector<Status> final_status(n_tot, Status::in_flight);

  const long long chunk = 4096;
  const long long n_chunks = (n_tot + chunk - 1) / chunk;
  std::vector<ProfileTally> profiles;
  if (cfg.tally_profile) {
    profiles.assign(n_chunks, ProfileTally(detail::profile_mesh(cfg)));
  }

  parallel_for_chunks(
      n_tot, cfg.workers, chunk,
      [&](long long begin, long long end, long long c) {
        ProfileTally* prof = cfg.tally_profile ? &profiles[c] : nullptr;
        for (long long i = begin; i < end; ++i) {
          Rng rng(cfg.seed, static_cast<std::uint64_t>(i));
          Particle p;
          if (unsteady) {
            const long long m = i / cfg.particles_per_step;
            const double t_emit = static_cast<double>(m) * cfg.dt;
            const double active_dt =
                std::min(cfg.dt, cfg.source_end() - t_emit);
            const double w0 =
                active_dt /
                (2.0 * static_cast<double>(cfg.particles_per_step));
            p = sample_boundary_source(rng, cfg.r1, t_emit, w0);
          } else if (cfg.source == SourceKind::outer_boundary) {
            // stationary histories carry the [0, t_final]-integrated
            // unit-rate ensemble, so the flux is comparable with the
            // time-integrated duality value
            p = sample_boundary_source(rng, cfg.r1, 0.0, 0.5 * cfg.t_final);
          } else {
            p = sample_shell_source(rng, cfg.r_source, 0.0,
                                    1.0 / static_cast<double>(n_tot));
          }
          const auto outcome = detail::track_analog(cfg, p, rng, prof);
          contribution[i] = outcome.contribution;
          final_status[i] = outcome.status;
          if (prof) prof->end_history();
        }
      });

  TallyResult res;
  res.n_histories = n_tot;

  // X_i are scaled so that the flux estimate is their sample mean:
  // stationary boundary histories each carry the full unit-rate ensemble,
  // unsteady and shell runs estimate a sum over emissions.
  double scale = 1.0;
  if (unsteady || cfg.source == SourceKind::shell) {
    scale = static_cast<double>(n_tot);
  }
  SampleAccumulator acc;
  long long reached = 0;
  for (long long i = 0; i < n_tot; ++i) {
    acc.add(scale * contribution[i]);
    if (contribution[i] > 0.0) ++reached;
    detail::count_status(res, final_status[i]);
  }
  const auto m = finalize(acc);
  res.flux = m.mean;
  res.sigma2 = m.sigma2;
  res.Sigma2 = m.Sigma2;
  res.p_reach = static_cast<double>(reached) / static_cast<double>(n_tot);

  if (cfg.tally_profile) {
    ProfileTally total(detail::profile_mesh(cfg));
    for (const auto& p : profiles) total.merge(p);
    double pscale;
    if (unsteady) {
      pscale = 1.0 / cfg.t_final;
    } else if (cfg.source == SourceKind::outer_boundary) {
      pscale = 1.0 / static_cast<double>(n_tot);
    } else {
      pscale = 1.0;  // shell-source weights already sum to a unit source
    }
    total.finalize(res, n_tot, pscale);
  }

  const auto t1 = std::chrono::steady_clock::now();
  res.time1_s = std::chrono::duration<double>(t1 - t0).count();
  res.time2_s = res.time1_s;
  return res;
}

}  // namespace shellmc
