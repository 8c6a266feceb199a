#pragma once

#include "tsformer/buckets.hpp"
#include "tsformer/numcore.hpp"

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <vector>

namespace tsformer {

/// Euler scheme of a mean-reverting Ornstein-Uhlenbeck process:
///   h[n+1] = h[n] + theta (mu - h[n]) dt + sigma sqrt(dt) eps[n+1]
///   y[n+1] = h[n+1] - h[n]
/// The initial law is a point mass at h0.
struct OUConfig {
  double theta = 1.0;
  double mu = 0.0;
  double sigma = 1.0;
  double dt = 1.0;
  double h0 = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const OUConfig&) const = default;
};

/// hidden holds h_0..h_m, observed holds y_1..y_m (observed[i] is y_{i+1}).
struct OUTrajectory {
  std::vector<double> hidden;
  std::vector<double> observed;
};

struct NormalLaw {
  double mean = 0.0;
  double std = 1.0;
};

OUTrajectory simulate(const OUConfig& config, std::size_t m);

/// Law of the next increment y_{n+1} given h_n = h_prev.
NormalLaw conditional_law(double h_prev, const OUConfig& config);

/// Standard normal CDF through erfc.
double normal_cdf(double x);

/// Exact bucket probabilities of the next increment given h_prev.
Distribution target_distribution(double h_prev, const OUConfig& config, const BucketSpec& buckets);

/// Two-column CSV "hidden,observed". Row 0 carries h_0 and an empty observed
/// field; row n carries h_n and y_n.
void write_trajectory_csv(std::ostream& out, const OUTrajectory& trajectory);

}  // namespace tsformer
