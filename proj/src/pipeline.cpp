#include "tsformer/pipeline.hpp"

#include "tsformer/market.hpp"
#include "tsformer/simulator.hpp"

#include <fstream>
#include <numeric>

namespace tsformer {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

const SequenceDataset& pick_split(const Splits& s, const std::string& name) {
  if (name == "train") return s.train;
  if (name == "validation") return s.validation;
  if (name == "test") return s.test;
  throw ConfigError("unknown split '" + name + "' (expected train, validation or test)");
}

EncoderClassifier load_matching(const std::filesystem::path& checkpoint, const ModelConfig& expected) {
  EncoderClassifier model = EncoderClassifier::load(checkpoint);
  if (!(model.config() == expected)) {
    throw ConfigError("checkpoint " + checkpoint.string() + " does not match the configured model:\nstored:\n" +
                      serialize_model_config(model.config()) + "configured:\n" + serialize_model_config(expected));
  }
  return model;
}

}  // namespace

TimeSeries load_series(const RunConfig& config) {
  TimeSeries series;
  if (config.source == DataSource::simulate) {
    OUTrajectory path = simulate(config.ou, config.points);
    series.values = std::move(path.observed);
    series.hidden = std::move(path.hidden);
  } else {
    series.values = log_returns(load_prices(config.csv_path)).values;
  }
  return series;
}

PreparedData prepare_data(const RunConfig& config) {
  config.validate();
  TimeSeries series = load_series(config);
  const std::size_t l = config.model.length;
  if (series.values.size() <= l) {
    throw DataError("series of " + std::to_string(series.values.size()) +
                    " values is too short for windows of length " + std::to_string(l));
  }
  const std::vector<double> targets = window_targets(series, l, config.task);
  const SplitCounts counts = split_counts(targets.size(), config.split);
  if (counts.train == 0) throw DataError("empty training partition");
  BucketSpec buckets = fit_buckets(std::span<const double>(targets.data(), counts.train), config.model.classes);

  std::vector<SequenceDataset> sets = make_windows(series, config.window_options(), config.embedding, buckets);
  Splits splits = split(sets.front(), config.split);
  std::optional<OUConfig> oracle;
  if (config.source == DataSource::simulate) oracle = config.ou;
  return PreparedData{std::move(series), std::move(buckets), std::move(splits), oracle};
}

EvalReport evaluate_split(EncoderClassifier& model, const SequenceDataset& data, const std::string& name,
                          const std::optional<OUConfig>& oracle) {
  const Matrix preds = predict_all(model, data);
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const Matrix targets = data.targets(idx);
  std::optional<Matrix> t;
  if (oracle && data.has_oracle()) t = oracle_targets(data, *oracle);
  EvalReport rep = entropy_panel(preds, targets, t ? &*t : nullptr, name);
  const bool naive = data.target() == Target::next_square;
  const BaselineReport base = baseline_report(data, data.buckets(), naive);
  rep.baseline_uniform = base.uniform;
  rep.baseline_naive = base.naive;
  return rep;
}

void write_eval_json(const std::filesystem::path& path, const std::vector<EvalReport>& reports) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const EvalReport& r : reports) j.push_back(r.to_json());
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
}

TrainOutcome run_train(const RunConfig& config, std::ostream* log) {
  PreparedData data = prepare_data(config);
  std::filesystem::create_directories(config.output_dir);
  config.save(config.output_dir / kConfigFile);

  EncoderClassifier model = EncoderClassifier::init(config.model, config.init_seed);
  if (log) {
    *log << "windows: train " << data.splits.train.size() << ", validation "
         << data.splits.validation.size() << ", test " << data.splits.test.size() << "; parameters "
         << config.model.parameter_count() << '\n';
  }
  TrainOutcome outcome;
  outcome.history = train(model, data.splits.train, data.splits.validation, config.train,
                          [&](const EpochRecord& r, const EncoderClassifier&) {
                            if (!log) return;
                            *log << "epoch " << r.epoch << ": loss " << format_real(r.train_loss)
                                 << " acc " << format_real(r.train_accuracy) << " val_loss "
                                 << format_real(r.val_loss) << " val_acc "
                                 << format_real(r.val_accuracy) << '\n';
                            log->flush();
                          });

  model.save(config.output_dir / kCheckpointFile);
  {
    std::ofstream hist = open_out(config.output_dir / kHistoryFile);
    outcome.history.write_csv(hist);
  }
  outcome.reports.push_back(evaluate_split(model, data.splits.train, "train", data.oracle));
  outcome.reports.push_back(evaluate_split(model, data.splits.validation, "validation", data.oracle));
  outcome.reports.push_back(evaluate_split(model, data.splits.test, "test", data.oracle));
  write_eval_json(config.output_dir / kEvalFile, outcome.reports);
  return outcome;
}

std::vector<EvalReport> run_evaluate(const RunConfig& config, const std::filesystem::path& checkpoint) {
  EncoderClassifier model = load_matching(checkpoint, config.model);
  PreparedData data = prepare_data(config);
  std::vector<EvalReport> reports;
  reports.push_back(evaluate_split(model, data.splits.train, "train", data.oracle));
  reports.push_back(evaluate_split(model, data.splits.validation, "validation", data.oracle));
  reports.push_back(evaluate_split(model, data.splits.test, "test", data.oracle));
  std::filesystem::create_directories(config.output_dir);
  write_eval_json(config.output_dir / kEvalFile, reports);
  if (data.oracle) run_plotdata(config, checkpoint, "test", config.output_dir / kPointwiseFile);
  return reports;
}

void run_plotdata(const RunConfig& config, const std::filesystem::path& checkpoint,
                  const std::string& split_name, const std::filesystem::path& out) {
  EncoderClassifier model = load_matching(checkpoint, config.model);
  PreparedData data = prepare_data(config);
  if (!data.oracle) throw ConfigError("plotdata needs simulated data with oracle distributions");
  const SequenceDataset& set = pick_split(data.splits, split_name);
  const Matrix preds = predict_all(model, set);
  const Matrix t = oracle_targets(set, *data.oracle);
  std::vector<double> h(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) h[i] = set.oracle_h(i);
  std::ofstream os = open_out(out);
  write_pointwise_csv(os, pointwise_table(h, preds, &t));
}

void run_simulate(const RunConfig& config, const std::filesystem::path& out) {
  if (config.points == 0) throw ConfigError("run.points must be at least 1");
  config.ou.validate();
  const OUTrajectory path = simulate(config.ou, config.points);
  std::ofstream os = open_out(out);
  write_trajectory_csv(os, path);
}

void run_ingest(const std::filesystem::path& in, const std::filesystem::path& out) {
  const PriceSeries prices = load_prices(in);
  std::ofstream os = open_out(out);
  write_derived_csv(os, prices);
}

}  // namespace tsformer
