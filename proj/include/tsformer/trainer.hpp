#pragma once

#include "tsformer/dataset.hpp"
#include "tsformer/model.hpp"
#include "tsformer/numcore.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

namespace tsformer {

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
  /// Stop after this many epochs without a validation-loss improvement.
  std::optional<std::size_t> early_stop_patience;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

/// Train metrics are running means over the epoch's batches in train mode;
/// validation metrics come from an infer-mode pass after the epoch.
struct History {
  std::vector<EpochRecord> epochs;

  void write_csv(std::ostream& out) const;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// H(P, Q) = -sum_j p_j ln(max(q_j, 1e-12)).
double cross_entropy(std::span<const double> p, std::span<const double> q);

/// One bias-corrected Adam update from p.gradient at step t >= 1.
void adam_step(ParamTensor& p, const TrainConfig& config, std::size_t t);
void adam_step(ParamStore& params, const TrainConfig& config, std::size_t t);

struct SplitMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Infer-mode mean loss and accuracy, evaluated in chronological chunks.
SplitMetrics measure(EncoderClassifier& model, const SequenceDataset& data,
                     std::size_t chunk = 256);

/// Infer-mode predictions, (data.size(), k).
Matrix predict_all(EncoderClassifier& model, const SequenceDataset& data, std::size_t chunk = 256);

using EpochCallback = std::function<void(const EpochRecord&, const EncoderClassifier&)>;

/// Minimize the batch-mean cross-entropy with Adam. Deterministic for fixed
/// model parameters, datasets and config.seed. Throws TrainingError when a
/// batch loss is not finite.
History train(EncoderClassifier& model, const SequenceDataset& train_set,
              const SequenceDataset& validation_set, const TrainConfig& config,
              const EpochCallback& on_epoch = {});

}  // namespace tsformer
