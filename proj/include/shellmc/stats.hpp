#pragma once

#include <cmath>

#include "shellmc/errors.hpp"

namespace shellmc {

// Single-pass running moments (Welford recurrence). Merging is exact for the
// concatenated stream, so worker-local accumulators reduced in a fixed order
// reproduce the serial result to rounding.
class SampleAccumulator {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }

  void merge(const SampleAccumulator& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
      *this = o;
      return;
    }
    const double na = static_cast<double>(n_);
    const double nb = static_cast<double>(o.n_);
    const double d = o.mean_ - mean_;
    mean_ += d * nb / (na + nb);
    m2_ += o.m2_ + d * d * na * nb / (na + nb);
    n_ += o.n_;
  }

  long long count() const { return n_; }
  double mean() const { return mean_; }

  // sigma_N^2 = (1/(N-1)) sum (X_i - mean)^2
  double sample_variance() const {
    if (n_ < 2) {
      throw InsufficientSamples("sample_variance: need at least two samples");
    }
    double v = m2_ / static_cast<double>(n_ - 1);
    return v < 0.0 ? 0.0 : v;
  }

  // Sigma_N^2 = sigma_N^2 / N, the variance of the sample mean
  double mean_variance() const {
    return sample_variance() / static_cast<double>(n_);
  }

 private:
  long long n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct Moments {
  double mean;
  double sigma2;
  double Sigma2;
};

inline Moments finalize(const SampleAccumulator& acc) {
  return {acc.mean(), acc.sample_variance(), acc.mean_variance()};
}

// F.O.M. = 1 / (Sigma^2 * T)
inline double figure_of_merit(double Sigma2, double seconds) {
  if (!(Sigma2 > 0.0) || !(seconds > 0.0)) {
    throw DomainError("figure_of_merit: need positive variance and time");
  }
  return 1.0 / (Sigma2 * seconds);
}

}  // namespace shellmc
