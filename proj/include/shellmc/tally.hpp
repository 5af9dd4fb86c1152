#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "shellmc/mesh.hpp"

namespace shellmc {

enum class Status {
  in_flight,
  absorbed_cutoff,
  exited_inner,
  exited_outer,
  census,
  stalled
};

struct TallyResult {
  double flux = 0.0;
  double sigma2 = 0.0;  // sample variance of the per-history X_i
  double Sigma2 = 0.0;  // variance of the mean
  double p_reach = 0.0;
  long long n_histories = 0;

  long long n_exit_inner = 0;
  long long n_exit_outer = 0;
  long long n_cutoff = 0;
  long long n_census = 0;
  long long n_stalled = 0;

  std::vector<double> shell_r_center;
  std::vector<double> shell_flux;
  std::vector<double> shell_flux_std;
  std::vector<long long> shell_crossings;

  double time1_s = 0.0;  // wall time including importance construction
  double time2_s = 0.0;  // wall time excluding it
  double table_build_s = 0.0;
};

// Track-length scalar-flux tally over radial shells. Per-history staging
// feeds per-cell first and second moments, so each cell carries its own
// statistical error estimate. Contributions integrate the exponentially
// attenuated weight along each chord; with kappa_a = 0 they reduce to
// weight * chord length exactly.
class ProfileTally {
 public:
  ProfileTally() = default;

  explicit ProfileTally(const RadialMesh& mesh)
      : mesh_(mesh),
        sum_(mesh.n_cells(), 0.0),
        sumsq_(mesh.n_cells(), 0.0),
        crossings_(mesh.n_cells(), 0),
        stage_(mesh.n_cells(), 0.0) {}

  bool enabled() const { return !sum_.empty(); }

  // Segment of length s from (r, mu) with entering weight w attenuating at
  // rate kappa_a along the path.
  void add_segment(double r, double mu, double s, double w, double kappa_a) {
    if (!enabled() || !(s > 0.0) || w <= 0.0) return;
    const double x = r * mu;
    const double y2 = r * r * std::max(0.0, 1.0 - mu * mu);
    const double y = std::sqrt(y2);

    static thread_local std::vector<double> cuts;
    cuts.clear();
    cuts.push_back(0.0);
    cuts.push_back(s);
    if (-x > 0.0 && -x < s) cuts.push_back(-x);  // turning point
    for (double e : mesh_.hi) {
      if (e <= y) continue;
      const double sp = std::sqrt((e - y) * (e + y));
      const double c1 = sp - x;
      if (c1 > 0.0 && c1 < s) cuts.push_back(c1);
      const double c2 = -sp - x;
      if (c2 > 0.0 && c2 < s) cuts.push_back(c2);
    }
    {
      const double e = mesh_.lo.front();
      if (e > y) {
        const double sp = std::sqrt((e - y) * (e + y));
        const double c1 = sp - x;
        if (c1 > 0.0 && c1 < s) cuts.push_back(c1);
        const double c2 = -sp - x;
        if (c2 > 0.0 && c2 < s) cuts.push_back(c2);
      }
    }
    std::sort(cuts.begin(), cuts.end());

    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      const double a = cuts[k];
      const double b = cuts[k + 1];
      if (b - a <= 0.0) continue;
      const double mid = 0.5 * (a + b);
      const double rm = std::sqrt((x + mid) * (x + mid) + y2);
      if (rm < mesh_.lo.front() || rm > mesh_.hi.back()) continue;
      const int j = mesh_.locate(rm);
      double contrib;
      if (kappa_a > 0.0) {
        contrib = w * (std::exp(-kappa_a * a) - std::exp(-kappa_a * b)) /
                  kappa_a;
      } else {
        contrib = w * (b - a);
      }
      if (stage_[j] == 0.0) touched_.push_back(j);
      stage_[j] += contrib;
      ++crossings_[j];
    }
  }

  void end_history() {
    for (int j : touched_) {
      sum_[j] += stage_[j];
      sumsq_[j] += stage_[j] * stage_[j];
      stage_[j] = 0.0;
    }
    touched_.clear();
  }

  void merge(const ProfileTally& o) {
    if (!o.enabled()) return;
    if (!enabled()) {
      *this = o;
      return;
    }
    for (std::size_t j = 0; j < sum_.size(); ++j) {
      sum_[j] += o.sum_[j];
      sumsq_[j] += o.sumsq_[j];
      crossings_[j] += o.crossings_[j];
    }
  }

  // Write psi = scale * sum / V_j and its standard error into the result.
  void finalize(TallyResult& out, long long n_histories, double scale) const {
    if (!enabled()) return;
    const int n = mesh_.n_cells();
    out.shell_r_center = mesh_.center;
    out.shell_flux.assign(n, 0.0);
    out.shell_flux_std.assign(n, 0.0);
    out.shell_crossings = crossings_;
    const double nn = static_cast<double>(n_histories);
    for (int j = 0; j < n; ++j) {
      const double vol = 4.0 * M_PI / 3.0 *
                         (mesh_.hi[j] * mesh_.hi[j] * mesh_.hi[j] -
                          mesh_.lo[j] * mesh_.lo[j] * mesh_.lo[j]);
      out.shell_flux[j] = scale * sum_[j] / vol;
      if (n_histories > 1) {
        const double var_sum =
            std::max(0.0, (sumsq_[j] - sum_[j] * sum_[j] / nn) * nn /
                              (nn - 1.0));
        out.shell_flux_std[j] = scale * std::sqrt(var_sum) / vol;
      }
    }
  }

  const RadialMesh& mesh() const { return mesh_; }

 private:
  RadialMesh mesh_;
  std::vector<double> sum_;
  std::vector<double> sumsq_;
  std::vector<long long> crossings_;
  std::vector<double> stage_;
  std::vector<int> touched_;
};

}  // namespace shellmc
