#include "tsformer/evaluator.hpp"

#include "tsformer/market.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tsformer {

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["split"] = split;
  j["mean_hpq"] = mean_hpq;
  j["accuracy"] = accuracy;
  if (mean_htq) j["mean_htq"] = *mean_htq;
  if (mean_htt) j["mean_htt"] = *mean_htt;
  j["baseline_uniform"] = baseline_uniform;
  if (baseline_naive) j["baseline_naive"] = *baseline_naive;
  j["n"] = n;
  return j;
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport r;
  r.split = j.at("split").get<std::string>();
  r.mean_hpq = j.at("mean_hpq").get<double>();
  r.accuracy = j.at("accuracy").get<double>();
  if (j.contains("mean_htq")) r.mean_htq = j["mean_htq"].get<double>();
  if (j.contains("mean_htt")) r.mean_htt = j["mean_htt"].get<double>();
  r.baseline_uniform = j.at("baseline_uniform").get<double>();
  if (j.contains("baseline_naive")) r.baseline_naive = j["baseline_naive"].get<double>();
  r.n = j.at("n").get<std::size_t>();
  return r;
}

std::size_t argmax(std::span<const double> row) {
  if (row.empty()) throw std::invalid_argument("argmax: empty row");
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

std::size_t argmax_row(const Matrix& m, Eigen::Index row) {
  return argmax(std::span<const double>(m.row(row).data(), static_cast<std::size_t>(m.cols())));
}

namespace {

void require_aligned(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": inputs are not aligned");
  }
}

double row_cross_entropy(const Matrix& p, const Matrix& q, Eigen::Index r) {
  double h = 0.0;
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    if (p(r, j) != 0.0) h -= p(r, j) * std::log(std::max(q(r, j), 1e-12));
  }
  return h;
}

}  // namespace

double categorical_accuracy(const Matrix& predictions, const Matrix& targets) {
  require_aligned(predictions, targets, "categorical_accuracy");
  if (predictions.rows() == 0) return 0.0;
  std::size_t hits = 0;
  for (Eigen::Index r = 0; r < predictions.rows(); ++r) {
    if (argmax_row(predictions, r) == argmax_row(targets, r)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.rows());
}

EvalReport entropy_panel(const Matrix& predictions, const Matrix& targets, const Matrix* oracle,
                         std::string split_name) {
  require_aligned(predictions, targets, "entropy_panel");
  if (oracle != nullptr) require_aligned(predictions, *oracle, "entropy_panel oracle");
  EvalReport rep;
  rep.split = std::move(split_name);
  rep.n = static_cast<std::size_t>(predictions.rows());
  rep.baseline_uniform = 1.0 / static_cast<double>(predictions.cols());
  if (rep.n == 0) return rep;
  const auto n = static_cast<double>(rep.n);
  double hpq = 0.0, htq = 0.0, htt = 0.0;
  for (Eigen::Index r = 0; r < predictions.rows(); ++r) {
    hpq += row_cross_entropy(targets, predictions, r);
    if (oracle != nullptr) {
      htq += row_cross_entropy(*oracle, predictions, r);
      htt += row_cross_entropy(*oracle, *oracle, r);
    }
  }
  rep.mean_hpq = hpq / n;
  rep.accuracy = categorical_accuracy(predictions, targets);
  if (oracle != nullptr) {
    rep.mean_htq = htq / n;
    rep.mean_htt = htt / n;
  }
  return rep;
}

Matrix oracle_targets(const SequenceDataset& data, const OUConfig& config) {
  if (!data.has_oracle()) throw std::invalid_argument("oracle_targets: dataset has no hidden states");
  const auto k = static_cast<Eigen::Index>(data.classes());
  Matrix t(static_cast<Eigen::Index>(data.size()), k);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Distribution d = target_distribution(data.oracle_h(i), config, data.buckets());
    for (Eigen::Index j = 0; j < k; ++j) t(static_cast<Eigen::Index>(i), j) = d[static_cast<std::size_t>(j)];
  }
  return t;
}

std::vector<PointwiseRow> pointwise_table(std::span<const double> h_values, const Matrix& predictions,
                                          const Matrix* oracle) {
  if (oracle == nullptr) throw std::invalid_argument("pointwise_table: oracle distributions required");
  require_aligned(predictions, *oracle, "pointwise_table");
  if (h_values.size() != static_cast<std::size_t>(predictions.rows())) {
    throw ShapeError("pointwise_table: h values not aligned with predictions");
  }
  std::vector<PointwiseRow> rows;
  rows.reserve(h_values.size() * static_cast<std::size_t>(predictions.cols()));
  for (Eigen::Index i = 0; i < predictions.rows(); ++i) {
    for (Eigen::Index j = 0; j < predictions.cols(); ++j) {
      rows.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j),
                      h_values[static_cast<std::size_t>(i)], predictions(i, j), (*oracle)(i, j)});
    }
  }
  return rows;
}

void write_pointwise_csv(std::ostream& out, std::span<const PointwiseRow> rows) {
  out << "instance_index,bucket,h,q,t\n";
  for (const PointwiseRow& r : rows) {
    out << r.instance << ',' << r.bucket << ',' << format_real(r.h) << ',' << format_real(r.q) << ','
        << format_real(r.t) << '\n';
  }
}

double pointwise_correlation(std::span<const PointwiseRow> rows, std::size_t bucket) {
  double sq = 0.0, st = 0.0, sqq = 0.0, stt = 0.0, sqt = 0.0;
  std::size_t n = 0;
  for (const PointwiseRow& r : rows) {
    if (r.bucket != bucket) continue;
    sq += r.q;
    st += r.t;
    sqq += r.q * r.q;
    stt += r.t * r.t;
    sqt += r.q * r.t;
    ++n;
  }
  if (n < 2) throw std::invalid_argument("pointwise_correlation: need at least two rows");
  const double nn = static_cast<double>(n);
  const double cov = sqt / nn - (sq / nn) * (st / nn);
  const double vq = sqq / nn - (sq / nn) * (sq / nn);
  const double vt = stt / nn - (st / nn) * (st / nn);
  if (vq <= 0.0 || vt <= 0.0) return 0.0;
  return cov / std::sqrt(vq * vt);
}

BaselineReport baseline_report(const SequenceDataset& data, const BucketSpec& spec, bool want_naive) {
  BaselineReport rep;
  rep.uniform = 1.0 / static_cast<double>(spec.classes());
  if (!want_naive) return rep;
  if (data.target() != Target::next_square) {
    throw std::invalid_argument("baseline_report: the naive classifier needs a next-square task");
  }
  if (data.empty()) {
    rep.naive = 0.0;
    return rep;
  }
  std::size_t hits = 0;
  std::vector<double> squares;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto values = data.window_values(i);
    squares.assign(values.begin(), values.end());
    for (double& v : squares) v *= v;
    if (naive_classify(squares, spec) == data.target_bucket(i)) ++hits;
  }
  rep.naive = static_cast<double>(hits) / static_cast<double>(data.size());
  return rep;
}

}  // namespace tsformer
