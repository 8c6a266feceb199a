#include "tsformer/simulator.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace tsformer {

void OUConfig::validate() const {
  if (!(theta > 0.0) || !std::isfinite(theta)) throw std::invalid_argument("OUConfig: theta must be > 0");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("OUConfig: sigma must be > 0");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("OUConfig: dt must be > 0");
  if (!std::isfinite(mu) || !std::isfinite(h0)) {
    throw std::invalid_argument("OUConfig: mu and h0 must be finite");
  }
}

OUTrajectory simulate(const OUConfig& config, std::size_t m) {
  config.validate();
  if (m < 1) throw std::invalid_argument("simulate: m must be at least 1");
  Rng rng(config.seed);
  OUTrajectory out;
  out.hidden.resize(m + 1);
  out.observed.resize(m);
  const double drift = config.theta * config.dt;
  const double diffusion = config.sigma * std::sqrt(config.dt);
  double h = config.h0;
  out.hidden[0] = h;
  for (std::size_t n = 0; n < m; ++n) {
    const double next = h + drift * (config.mu - h) + diffusion * rng.normal();
    out.hidden[n + 1] = next;
    out.observed[n] = next - h;
    h = next;
  }
  return out;
}

NormalLaw conditional_law(double h_prev, const OUConfig& config) {
  config.validate();
  if (!std::isfinite(h_prev)) throw std::invalid_argument("conditional_law: h_prev must be finite");
  return NormalLaw{config.theta * (config.mu - h_prev) * config.dt,
                   config.sigma * std::sqrt(config.dt)};
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

Distribution target_distribution(double h_prev, const OUConfig& config, const BucketSpec& buckets) {
  const NormalLaw law = conditional_law(h_prev, config);
  const auto& b = buckets.boundaries();
  const std::size_t k = buckets.classes();
  Distribution t(k);
  // cumulative mass below each boundary, then differences; the upper tail
  // side is computed from the survival function to keep precision
  double prev_cdf = 0.0;
  double prev_sf = 1.0;
  for (std::size_t j = 0; j < k; ++j) {
    double cdf = 1.0;
    double sf = 0.0;
    if (j + 1 < k) {
      const double z = (b[j] - law.mean) / law.std;
      cdf = normal_cdf(z);
      sf = normal_cdf(-z);
    }
    t[j] = (cdf <= 0.5) ? cdf - prev_cdf : prev_sf - sf;
    if (t[j] < 0.0) t[j] = 0.0;
    prev_cdf = cdf;
    prev_sf = sf;
  }
  return t;
}

void write_trajectory_csv(std::ostream& out, const OUTrajectory& trajectory) {
  out << "hidden,observed\n";
  for (std::size_t n = 0; n < trajectory.hidden.size(); ++n) {
    out << format_real(trajectory.hidden[n]) << ',';
    if (n > 0) out << format_real(trajectory.observed[n - 1]);
    out << '\n';
  }
}

}  // namespace tsformer
