#pragma once

#include "tsformer/buckets.hpp"
#include "tsformer/embedding.hpp"
#include "tsformer/numcore.hpp"

#include <cstddef>
#include <cstdint>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

namespace tsformer {

/// Scalar observations y_1..y_m, stored 0-based. When present, hidden holds
/// h_0..h_m, so hidden[n] is the state just before values[n].
struct TimeSeries {
  std::vector<double> values;
  std::optional<std::vector<double>> hidden;
};

enum class Target { next_value, next_square };
enum class WindowMethod { non_overlapping = 1, overlapping = 2, phase_shifted = 3, bootstrap = 4 };

std::string_view to_string(Target t);
Target parse_target(std::string_view s);

struct WindowOptions {
  std::size_t length = 32;
  WindowMethod method = WindowMethod::overlapping;
  Target target = Target::next_value;
  /// Number of resampled datasets for the bootstrap method.
  std::size_t bootstrap_count = 0;  // 0 means `length` datasets
  std::uint64_t bootstrap_seed = 0;
};

/// Windows over a shared, pre-embedded series.
///
/// Window i covers values[start(i)] .. values[start(i) + l - 1] and is
/// labelled by values[start(i) + l] (or its square). The oracle state for
/// window i is hidden[start(i) + l], the last state before the target.
/// Embedded rows are computed once per series and shared by every subset.
class SequenceDataset {
 public:
  SequenceDataset() = default;

  std::size_t size() const { return starts_.size(); }
  bool empty() const { return starts_.empty(); }
  std::size_t length() const { return source_ ? source_->length : 0; }
  std::size_t dim() const { return source_ ? source_->embedding.d : 0; }
  std::size_t classes() const { return buckets_ ? buckets_->classes() : 0; }
  Target target() const { return source_->target; }
  const BucketSpec& buckets() const { return *buckets_; }

  /// (l, d) embedded window.
  Matrix window(std::size_t i) const;
  /// Copy window i into rows [row0, row0 + l) of `out`.
  void write_window(std::size_t i, Matrix& out, Eigen::Index row0) const;
  /// Raw observations of window i.
  std::span<const double> window_values(std::size_t i) const;

  std::size_t start(std::size_t i) const { return starts_.at(i); }
  double target_scalar(std::size_t i) const { return target_scalars_.at(i); }
  std::size_t target_bucket(std::size_t i) const { return target_buckets_.at(i); }
  Distribution target_one_hot(std::size_t i) const;
  bool has_oracle() const { return source_ && source_->hidden.has_value(); }
  double oracle_h(std::size_t i) const;

  /// Window indices [begin, end) in their current order.
  SequenceDataset slice(std::size_t begin, std::size_t end) const;
  SequenceDataset select(std::span<const std::size_t> indices) const;

  /// One-hot targets of the listed windows, (indices.size(), k).
  Matrix targets(std::span<const std::size_t> indices) const;
  /// Stacked windows, (indices.size() * l, d).
  Matrix stack(std::span<const std::size_t> indices) const;

  friend std::vector<SequenceDataset> make_windows(const TimeSeries&, const WindowOptions&,
                                                   const EmbeddingConfig&, const BucketSpec&);

 private:
  struct Source {
    std::vector<double> values;
    std::optional<std::vector<double>> hidden;
    Matrix embedded;  // (m, d), row n is phi(values[n])
    std::optional<PositionalMatrix> positional;
    EmbeddingConfig embedding;
    std::size_t length = 0;
    Target target = Target::next_value;
  };

  std::shared_ptr<const Source> source_;
  std::shared_ptr<const BucketSpec> buckets_;
  std::vector<std::size_t> starts_;
  std::vector<double> target_scalars_;
  std::vector<std::size_t> target_buckets_;
};

/// Target scalar of every overlapping window, in order (values[s + l] or its
/// square for s = 0..m-l-1). Used to fit buckets before labelling.
std::vector<double> window_targets(const TimeSeries& series, std::size_t length, Target target);

/// Build labelled window datasets. Non-overlapping and overlapping methods
/// return one dataset; the phase-shifted method returns l datasets (phase p
/// starts at p, p + l, ...); bootstrap returns resamples with replacement of
/// the overlapping windows, each of the same size.
std::vector<SequenceDataset> make_windows(const TimeSeries& series, const WindowOptions& options,
                                          const EmbeddingConfig& embedding,
                                          const BucketSpec& buckets);

struct SplitConfig {
  double train_fraction = 0.8;
  double validation_fraction = 0.2;

  void validate() const;
  bool operator==(const SplitConfig&) const = default;
};

struct SplitCounts {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;

  std::size_t learning() const { return train + validation; }
};

/// Chronological cut sizes: the first floor(p N) windows are for learning;
/// of those, the first floor((1 - v) floor(p N)) train and the rest validate.
SplitCounts split_counts(std::size_t n, const SplitConfig& config);

struct Splits {
  SequenceDataset train;
  SequenceDataset validation;
  SequenceDataset test;
};

Splits split(const SequenceDataset& dataset, const SplitConfig& config);

/// Shuffle window indices with a generator seeded by `epoch_seed`, then
/// chunk them; the final short batch is kept.
std::vector<std::vector<std::size_t>> batches(std::size_t count, std::size_t batch_size,
                                              std::uint64_t epoch_seed);

std::vector<std::vector<std::size_t>> batches(const SequenceDataset& train, std::size_t batch_size,
                                              std::uint64_t epoch_seed);

/// Fisher-Yates shuffle with Rng::below.
void shuffle_indices(std::vector<std::size_t>& indices, Rng& rng);

/// One audit row of a dataset snapshot. Windows are not serialized; they are
/// recomputed from the series by start index.
struct SnapshotRow {
  std::size_t window_start = 0;
  double target_scalar = 0.0;
  std::size_t target_bucket = 0;
  std::optional<double> oracle_h;

  bool operator==(const SnapshotRow&) const = default;
};

/// CSV with header "window_start_index,target_scalar,target_bucket,oracle_h";
/// oracle_h is empty when the series has no hidden states.
void write_snapshot_csv(std::ostream& out, const SequenceDataset& dataset);
std::vector<SnapshotRow> read_snapshot_csv(std::istream& in);
std::vector<SnapshotRow> snapshot_rows(const SequenceDataset& dataset);

}  // namespace tsformer
