#pragma once

#include "tsformer/buckets.hpp"
#include "tsformer/dataset.hpp"
#include "tsformer/numcore.hpp"
#include "tsformer/simulator.hpp"

#include <json.hpp>

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace tsformer {

struct EvalReport {
  std::string split;
  double mean_hpq = 0.0;
  double accuracy = 0.0;
  std::optional<double> mean_htq;
  std::optional<double> mean_htt;
  double baseline_uniform = 0.0;
  std::optional<double> baseline_naive;
  std::size_t n = 0;

  /// Keys: split, mean_hpq, accuracy, mean_htq, mean_htt, baseline_uniform,
  /// baseline_naive, n. Absent optionals are omitted.
  nlohmann::ordered_json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
};

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> row);
std::size_t argmax_row(const Matrix& m, Eigen::Index row);

/// Fraction of rows whose argmax equals the argmax of the one-hot target row.
double categorical_accuracy(const Matrix& predictions, const Matrix& targets);

/// Mean H(P, Q) over rows, plus mean H(T, Q) and H(T, T) when an oracle
/// matrix is supplied. Accuracy and uniform baseline are filled in as well.
EvalReport entropy_panel(const Matrix& predictions, const Matrix& targets, const Matrix* oracle,
                         std::string split_name);

/// Oracle target distributions T_i for every window of a synthetic dataset.
Matrix oracle_targets(const SequenceDataset& data, const OUConfig& config);

struct PointwiseRow {
  std::size_t instance = 0;
  std::size_t bucket = 0;
  double h = 0.0;
  double q = 0.0;
  double t = 0.0;
};

/// One row per (instance, bucket): the state before the target, the
/// predicted probability and the oracle probability.
std::vector<PointwiseRow> pointwise_table(std::span<const double> h_values, const Matrix& predictions,
                                          const Matrix* oracle);
void write_pointwise_csv(std::ostream& out, std::span<const PointwiseRow> rows);

/// Pearson correlation of q against t for one bucket.
double pointwise_correlation(std::span<const PointwiseRow> rows, std::size_t bucket);

struct BaselineReport {
  double uniform = 0.0;
  std::optional<double> naive;
};

/// Uniform baseline 1/k; naive baseline (bucket of the mean squared window
/// value) only when `want_naive` is set, which requires a next-square task.
BaselineReport baseline_report(const SequenceDataset& data, const BucketSpec& spec, bool want_naive);

}  // namespace tsformer
