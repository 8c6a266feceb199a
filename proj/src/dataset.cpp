#include "tsformer/dataset.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

namespace tsformer {

std::string_view to_string(Target t) {
  return t == Target::next_value ? "next-value" : "next-square";
}

Target parse_target(std::string_view s) {
  if (s == "next-value") return Target::next_value;
  if (s == "next-square") return Target::next_square;
  throw std::invalid_argument("unknown target '" + std::string(s) +
                              "' (expected next-value or next-square)");
}

Matrix SequenceDataset::window(std::size_t i) const {
  const auto l = static_cast<Eigen::Index>(length());
  Matrix out(l, static_cast<Eigen::Index>(dim()));
  write_window(i, out, 0);
  return out;
}

void SequenceDataset::write_window(std::size_t i, Matrix& out, Eigen::Index row0) const {
  const auto l = static_cast<Eigen::Index>(source_->length);
  const auto s = static_cast<Eigen::Index>(starts_.at(i));
  out.middleRows(row0, l) = source_->embedded.middleRows(s, l);
  if (source_->positional) out.middleRows(row0, l) += source_->positional->P;
}

std::span<const double> SequenceDataset::window_values(std::size_t i) const {
  return std::span<const double>(source_->values).subspan(starts_.at(i), source_->length);
}

Distribution SequenceDataset::target_one_hot(std::size_t i) const {
  Distribution p(classes(), 0.0);
  p[target_buckets_.at(i)] = 1.0;
  return p;
}

double SequenceDataset::oracle_h(std::size_t i) const {
  if (!has_oracle()) throw std::logic_error("SequenceDataset: no hidden states for this series");
  return (*source_->hidden)[starts_.at(i) + source_->length];
}

SequenceDataset SequenceDataset::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) throw std::out_of_range("SequenceDataset::slice");
  SequenceDataset out;
  out.source_ = source_;
  out.buckets_ = buckets_;
  out.starts_.assign(starts_.begin() + static_cast<std::ptrdiff_t>(begin),
                     starts_.begin() + static_cast<std::ptrdiff_t>(end));
  out.target_scalars_.assign(target_scalars_.begin() + static_cast<std::ptrdiff_t>(begin),
                             target_scalars_.begin() + static_cast<std::ptrdiff_t>(end));
  out.target_buckets_.assign(target_buckets_.begin() + static_cast<std::ptrdiff_t>(begin),
                             target_buckets_.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

SequenceDataset SequenceDataset::select(std::span<const std::size_t> indices) const {
  SequenceDataset out;
  out.source_ = source_;
  out.buckets_ = buckets_;
  out.starts_.reserve(indices.size());
  out.target_scalars_.reserve(indices.size());
  out.target_buckets_.reserve(indices.size());
  for (std::size_t i : indices) {
    out.starts_.push_back(starts_.at(i));
    out.target_scalars_.push_back(target_scalars_[i]);
    out.target_buckets_.push_back(target_buckets_[i]);
  }
  return out;
}

Matrix SequenceDataset::targets(std::span<const std::size_t> indices) const {
  Matrix t = Matrix::Zero(static_cast<Eigen::Index>(indices.size()),
                          static_cast<Eigen::Index>(classes()));
  for (std::size_t r = 0; r < indices.size(); ++r) {
    t(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(target_buckets_.at(indices[r]))) = 1.0;
  }
  return t;
}

Matrix SequenceDataset::stack(std::span<const std::size_t> indices) const {
  const auto l = static_cast<Eigen::Index>(length());
  Matrix x(static_cast<Eigen::Index>(indices.size()) * l, static_cast<Eigen::Index>(dim()));
  for (std::size_t r = 0; r < indices.size(); ++r) {
    write_window(indices[r], x, static_cast<Eigen::Index>(r) * l);
  }
  return x;
}

std::vector<double> window_targets(const TimeSeries& series, std::size_t length, Target target) {
  const std::size_t m = series.values.size();
  if (length < 1) throw std::invalid_argument("window length must be at least 1");
  if (m <= length) {
    throw DataError("series of length " + std::to_string(m) + " is too short for windows of length " +
                    std::to_string(length));
  }
  std::vector<double> out;
  out.reserve(m - length);
  for (std::size_t s = 0; s + length < m; ++s) {
    const double y = series.values[s + length];
    out.push_back(target == Target::next_square ? y * y : y);
  }
  return out;
}

std::vector<SequenceDataset> make_windows(const TimeSeries& series, const WindowOptions& options,
                                          const EmbeddingConfig& embedding,
                                          const BucketSpec& buckets) {
  const std::size_t l = options.length;
  const std::size_t m = series.values.size();
  const std::vector<double> scalars = window_targets(series, l, options.target);
  if (series.hidden && series.hidden->size() != m + 1) {
    throw DataError("hidden states must have one more entry than observations");
  }
  if (embedding.use_positional) embedding.validate();
  if (embedding.d < 1) throw std::invalid_argument("embedding dimension must be at least 1");

  auto source = std::make_shared<SequenceDataset::Source>();
  source->values = series.values;
  source->hidden = series.hidden;
  source->embedding = embedding;
  source->length = l;
  source->target = options.target;
  source->embedded.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(embedding.d));
  for (std::size_t n = 0; n < m; ++n) {
    if (!std::isfinite(series.values[n])) {
      throw DataError("non-finite observation at index " + std::to_string(n));
    }
    embed_into(series.values[n],
               std::span<double>(source->embedded.row(static_cast<Eigen::Index>(n)).data(), embedding.d));
  }
  if (embedding.use_positional) source->positional = positional_matrix(l, embedding.d);
  auto shared_buckets = std::make_shared<const BucketSpec>(buckets);

  auto build = [&](std::vector<std::size_t> starts) {
    SequenceDataset ds;
    ds.source_ = source;
    ds.buckets_ = shared_buckets;
    ds.target_scalars_.reserve(starts.size());
    ds.target_buckets_.reserve(starts.size());
    for (std::size_t s : starts) {
      ds.target_scalars_.push_back(scalars[s]);
      ds.target_buckets_.push_back(bucket_of(scalars[s], buckets));
    }
    ds.starts_ = std::move(starts);
    return ds;
  };

  const std::size_t n_windows = scalars.size();
  std::vector<SequenceDataset> out;
  switch (options.method) {
    case WindowMethod::overlapping: {
      std::vector<std::size_t> starts(n_windows);
      for (std::size_t s = 0; s < n_windows; ++s) starts[s] = s;
      out.push_back(build(std::move(starts)));
      break;
    }
    case WindowMethod::non_overlapping: {
      std::vector<std::size_t> starts;
      for (std::size_t s = 0; s < n_windows; s += l) starts.push_back(s);
      out.push_back(build(std::move(starts)));
      break;
    }
    case WindowMethod::phase_shifted: {
      for (std::size_t phase = 0; phase < l; ++phase) {
        std::vector<std::size_t> starts;
        for (std::size_t s = phase; s < n_windows; s += l) starts.push_back(s);
        out.push_back(build(std::move(starts)));
      }
      break;
    }
    case WindowMethod::bootstrap: {
      const std::size_t count = options.bootstrap_count == 0 ? l : options.bootstrap_count;
      Rng rng(options.bootstrap_seed);
      for (std::size_t b = 0; b < count; ++b) {
        std::vector<std::size_t> starts(n_windows);
        for (auto& s : starts) s = rng.below(n_windows);
        out.push_back(build(std::move(starts)));
      }
      break;
    }
    default:
      throw std::invalid_argument("unknown window method");
  }
  return out;
}

void SplitConfig::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("SplitConfig: train_fraction must lie in (0, 1)");
  }
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw std::invalid_argument("SplitConfig: validation_fraction must lie in [0, 1)");
  }
}

SplitCounts split_counts(std::size_t n, const SplitConfig& config) {
  config.validate();
  // the small offset absorbs products such as 0.8 * 80 = 64.00000000000001
  // landing just below an integer
  const auto cut = [](double x) { return static_cast<std::size_t>(std::floor(x + 1e-9)); };
  SplitCounts c;
  const std::size_t learning = cut(config.train_fraction * static_cast<double>(n));
  c.train = cut((1.0 - config.validation_fraction) * static_cast<double>(learning));
  c.validation = learning - c.train;
  c.test = n - learning;
  return c;
}

Splits split(const SequenceDataset& dataset, const SplitConfig& config) {
  if (dataset.empty()) throw DataError("split: empty dataset");
  const SplitCounts c = split_counts(dataset.size(), config);
  if (c.train == 0 || c.validation == 0 || c.test == 0) {
    std::ostringstream os;
    os << "split: empty partition (train " << c.train << ", validation " << c.validation
       << ", test " << c.test << ") for " << dataset.size() << " windows";
    throw DataError(os.str());
  }
  Splits s;
  s.train = dataset.slice(0, c.train);
  s.validation = dataset.slice(c.train, c.learning());
  s.test = dataset.slice(c.learning(), dataset.size());
  return s;
}

void shuffle_indices(std::vector<std::size_t>& indices, Rng& rng) {
  for (std::size_t i = indices.size(); i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(indices[i - 1], indices[j]);
  }
}

std::vector<std::vector<std::size_t>> batches(std::size_t count, std::size_t batch_size,
                                              std::uint64_t epoch_seed) {
  if (batch_size < 1) throw std::invalid_argument("batches: batch_size must be at least 1");
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  Rng rng(epoch_seed);
  shuffle_indices(order, rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t b = 0; b < count; b += batch_size) {
    const std::size_t e = std::min(count, b + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                     order.begin() + static_cast<std::ptrdiff_t>(e));
  }
  return out;
}

std::vector<std::vector<std::size_t>> batches(const SequenceDataset& train, std::size_t batch_size,
                                              std::uint64_t epoch_seed) {
  return batches(train.size(), batch_size, epoch_seed);
}

std::vector<SnapshotRow> snapshot_rows(const SequenceDataset& dataset) {
  std::vector<SnapshotRow> rows;
  rows.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    SnapshotRow r;
    r.window_start = dataset.start(i);
    r.target_scalar = dataset.target_scalar(i);
    r.target_bucket = dataset.target_bucket(i);
    if (dataset.has_oracle()) r.oracle_h = dataset.oracle_h(i);
    rows.push_back(r);
  }
  return rows;
}

void write_snapshot_csv(std::ostream& out, const SequenceDataset& dataset) {
  out << "window_start_index,target_scalar,target_bucket,oracle_h\n";
  for (const SnapshotRow& r : snapshot_rows(dataset)) {
    out << r.window_start << ',' << format_real(r.target_scalar) << ',' << r.target_bucket << ',';
    if (r.oracle_h) out << format_real(*r.oracle_h);
    out << '\n';
  }
}

namespace {

template <typename T>
T parse_field(std::string_view field, std::size_t line) {
  T value{};
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
    throw DataError("snapshot line " + std::to_string(line) + ": cannot parse '" +
                    std::string(field) + "'");
  }
  return value;
}

}  // namespace

std::vector<SnapshotRow> read_snapshot_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "window_start_index,target_scalar,target_bucket,oracle_h") {
    throw DataError("snapshot: missing or unexpected header");
  }
  std::vector<SnapshotRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 4) {
      throw DataError("snapshot line " + std::to_string(line_no) + ": expected 4 fields");
    }
    SnapshotRow r;
    r.window_start = parse_field<std::size_t>(fields[0], line_no);
    r.target_scalar = parse_field<double>(fields[1], line_no);
    r.target_bucket = parse_field<std::size_t>(fields[2], line_no);
    if (!fields[3].empty()) r.oracle_h = parse_field<double>(fields[3], line_no);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace tsformer
