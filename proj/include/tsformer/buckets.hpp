#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace tsformer {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// k classes separated by k-1 strictly increasing boundaries.
///
/// Class j (0-based) is the interval (boundary[j-1], boundary[j]] with
/// boundary[-1] = -inf and boundary[k-1] = +inf: intervals are left-open and
/// right-closed, the last one open on both sides.
class BucketSpec {
 public:
  explicit BucketSpec(std::vector<double> boundaries);

  std::size_t classes() const { return boundaries_.size() + 1; }
  const std::vector<double>& boundaries() const { return boundaries_; }

  bool operator==(const BucketSpec&) const = default;

 private:
  std::vector<double> boundaries_;
};

/// Sorted-sample linear interpolation at ranks (n-1) * j / k, j = 1..k-1.
/// Throws DataError when fewer than k distinct values exist or the resulting
/// boundaries are not strictly increasing.
BucketSpec fit_buckets(std::span<const double> values, std::size_t k);

/// 0-based class of `value`.
std::size_t bucket_of(double value, const BucketSpec& spec);

}  // namespace tsformer
