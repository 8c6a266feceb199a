#include "tsformer/buckets.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tsformer {

BucketSpec::BucketSpec(std::vector<double> boundaries) : boundaries_(std::move(boundaries)) {
  if (boundaries_.empty()) throw std::invalid_argument("BucketSpec: need at least one boundary");
  for (std::size_t i = 0; i < boundaries_.size(); ++i) {
    if (!std::isfinite(boundaries_[i])) throw std::invalid_argument("BucketSpec: non-finite boundary");
    if (i > 0 && !(boundaries_[i - 1] < boundaries_[i])) {
      throw std::invalid_argument("BucketSpec: boundaries must be strictly increasing");
    }
  }
}

BucketSpec fit_buckets(std::span<const double> values, std::size_t k) {
  if (k < 2) throw std::invalid_argument("fit_buckets: k must be at least 2");
  if (values.size() < k) throw DataError("fit_buckets: fewer values than classes");
  std::vector<double> sorted(values.begin(), values.end());
  for (double v : sorted) {
    if (!std::isfinite(v)) throw DataError("fit_buckets: non-finite value");
  }
  std::sort(sorted.begin(), sorted.end());
  std::size_t n_distinct = 1;
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i] != sorted[i - 1]) ++n_distinct;
  }
  if (n_distinct < k) {
    throw DataError("fit_buckets: " + std::to_string(n_distinct) + " distinct values for " +
                    std::to_string(k) + " classes");
  }
  const double last = static_cast<double>(sorted.size() - 1);
  std::vector<double> boundaries;
  boundaries.reserve(k - 1);
  for (std::size_t j = 1; j < k; ++j) {
    const double rank = last * static_cast<double>(j) / static_cast<double>(k);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    boundaries.push_back(sorted[lo] + frac * (sorted[hi] - sorted[lo]));
  }
  for (std::size_t i = 1; i < boundaries.size(); ++i) {
    if (!(boundaries[i - 1] < boundaries[i])) {
      throw DataError("fit_buckets: tied quantiles; too many repeated values for " +
                      std::to_string(k) + " classes");
    }
  }
  return BucketSpec(std::move(boundaries));
}

std::size_t bucket_of(double value, const BucketSpec& spec) {
  const auto& b = spec.boundaries();
  return static_cast<std::size_t>(std::lower_bound(b.begin(), b.end(), value) - b.begin());
}

}  // namespace tsformer
