#pragma once

#include "tsformer/evaluator.hpp"
#include "tsformer/model.hpp"
#include "tsformer/run_config.hpp"
#include "tsformer/trainer.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace tsformer {

struct PreparedData {
  TimeSeries series;
  BucketSpec buckets;
  Splits splits;
  /// Set for simulated data, where oracle distributions exist.
  std::optional<OUConfig> oracle;
};

/// Simulated OU path or log returns of a price CSV.
TimeSeries load_series(const RunConfig& config);

/// Window targets, chronological split sizes, buckets fit on the training
/// windows' targets only, then labelled windows and the split itself. For
/// the multi-dataset window methods the first dataset is used.
PreparedData prepare_data(const RunConfig& config);

/// Infer-mode report for one split, with oracle and naive columns when
/// they apply.
EvalReport evaluate_split(EncoderClassifier& model, const SequenceDataset& data, const std::string& name,
                          const std::optional<OUConfig>& oracle);

struct TrainOutcome {
  History history;
  std::vector<EvalReport> reports;  // train, validation, test
};

/// File names inside the output directory.
inline constexpr const char* kCheckpointFile = "model.ckpt";
inline constexpr const char* kHistoryFile = "history.csv";
inline constexpr const char* kEvalFile = "eval.json";
inline constexpr const char* kConfigFile = "config.ini";
inline constexpr const char* kPointwiseFile = "pointwise.csv";

/// Build data, train, evaluate every split and write checkpoint, history,
/// eval report and the resolved config to config.output_dir.
TrainOutcome run_train(const RunConfig& config, std::ostream* log = nullptr);

/// Reload a checkpoint (its config must equal config.model), rebuild the
/// data and write eval.json plus, for simulated data, pointwise.csv of the
/// test split.
std::vector<EvalReport> run_evaluate(const RunConfig& config, const std::filesystem::path& checkpoint);

/// Pointwise table of one split ("train", "validation" or "test").
void run_plotdata(const RunConfig& config, const std::filesystem::path& checkpoint,
                  const std::string& split_name, const std::filesystem::path& out);

void run_simulate(const RunConfig& config, const std::filesystem::path& out);

/// Price CSV to derived-series CSV.
void run_ingest(const std::filesystem::path& in, const std::filesystem::path& out);

void write_eval_json(const std::filesystem::path& path, const std::vector<EvalReport>& reports);

}  // namespace tsformer
