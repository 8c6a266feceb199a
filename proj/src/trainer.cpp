#include "tsformer/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace tsformer {

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be at least 1");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be at least 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("TrainConfig: learning_rate must be finite and non-negative");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw std::invalid_argument("TrainConfig: Adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw std::invalid_argument("TrainConfig: adam_epsilon must be > 0");
  if (early_stop_patience && *early_stop_patience < 1) {
    throw std::invalid_argument("TrainConfig: early-stop patience must be at least 1");
  }
}

void History::write_csv(std::ostream& out) const {
  out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
  for (const EpochRecord& r : epochs) {
    out << r.epoch << ',' << format_real(r.train_loss) << ',' << format_real(r.train_accuracy) << ','
        << format_real(r.val_loss) << ',' << format_real(r.val_accuracy) << '\n';
  }
}

double cross_entropy(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty()) {
    throw std::invalid_argument("cross_entropy: distributions must be non-empty and equally long");
  }
  double psum = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (!(p[j] >= 0.0) || !(q[j] >= 0.0) || !std::isfinite(q[j])) {
      throw std::invalid_argument("cross_entropy: entries must be non-negative and finite");
    }
    psum += p[j];
  }
  if (std::abs(psum - 1.0) > 1e-9) throw std::invalid_argument("cross_entropy: P does not sum to 1");
  double h = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (p[j] != 0.0) h -= p[j] * std::log(std::max(q[j], 1e-12));
  }
  return h;
}

void adam_step(ParamTensor& p, const TrainConfig& c, std::size_t t) {
  if (t < 1) throw std::invalid_argument("adam_step: step count starts at 1");
  const double b1 = c.adam_beta1;
  const double b2 = c.adam_beta2;
  p.adam_m = b1 * p.adam_m + (1.0 - b1) * p.gradient;
  p.adam_v = b2 * p.adam_v + (1.0 - b2) * p.gradient.cwiseAbs2();
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
  p.value.array() -= c.learning_rate * (p.adam_m.array() / c1) /
                     ((p.adam_v.array() / c2).sqrt() + c.adam_epsilon);
}

void adam_step(ParamStore& params, const TrainConfig& config, std::size_t t) {
  for (ParamTensor& p : params) adam_step(p, config, t);
}

namespace {

std::size_t argmax_row(const Matrix& m, Eigen::Index r) {
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < m.cols(); ++j) {
    if (m(r, j) > m(r, best)) best = j;
  }
  return static_cast<std::size_t>(best);
}

}  // namespace

Matrix predict_all(EncoderClassifier& model, const SequenceDataset& data, std::size_t chunk) {
  const auto k = static_cast<Eigen::Index>(model.config().classes);
  Matrix out(static_cast<Eigen::Index>(data.size()), k);
  std::vector<std::size_t> idx;
  for (std::size_t begin = 0; begin < data.size(); begin += chunk) {
    const std::size_t end = std::min(data.size(), begin + chunk);
    idx.resize(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    out.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(idx.size())) =
        model.predict(data.stack(idx), idx.size());
  }
  return out;
}

SplitMetrics measure(EncoderClassifier& model, const SequenceDataset& data, std::size_t chunk) {
  if (data.empty()) return {};
  const Matrix probs = predict_all(model, data, chunk);
  double loss = 0.0;
  std::size_t hits = 0;
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    const std::size_t target = data.target_bucket(static_cast<std::size_t>(r));
    loss -= std::log(std::max(probs(r, static_cast<Eigen::Index>(target)), 1e-12));
    if (argmax_row(probs, r) == target) ++hits;
  }
  const auto n = static_cast<double>(data.size());
  return {loss / n, static_cast<double>(hits) / n};
}

History train(EncoderClassifier& model, const SequenceDataset& train_set,
              const SequenceDataset& validation_set, const TrainConfig& config,
              const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  const ModelConfig& mc = model.config();
  if (train_set.length() != mc.length || train_set.dim() != mc.dim || train_set.classes() != mc.classes) {
    throw ShapeError("train: dataset windows (" + std::to_string(train_set.length()) + ", " +
                     std::to_string(train_set.dim()) + ") with " + std::to_string(train_set.classes()) +
                     " classes do not match the model config");
  }

  Rng dropout_rng(mix_seed(config.seed, 1));
  History history;
  std::size_t step = 0;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto plan = batches(train_set, config.batch_size, mix_seed(config.seed, 1000 + epoch));
    double loss_sum = 0.0;
    std::size_t hits = 0;
    std::size_t seen = 0;
    for (std::size_t bi = 0; bi < plan.size(); ++bi) {
      const auto& idx = plan[bi];
      Tape tape(Mode::train, &dropout_rng);
      const Tape::Var x = tape.input(train_set.stack(idx));
      const Tape::Var probs = model.record(tape, x, idx.size());
      const Tape::Var loss = tape.cross_entropy(probs, train_set.targets(idx));
      const double batch_loss = tape.value(loss)(0, 0);
      if (!std::isfinite(batch_loss)) {
        std::ostringstream os;
        os << "non-finite loss at epoch " << epoch + 1 << ", batch " << bi + 1 << "; parameter norms:";
        for (const ParamTensor& p : model.params()) os << ' ' << p.name << '=' << p.value.norm();
        throw TrainingError(os.str());
      }
      model.params().zero_grad();
      tape.backward(loss, Matrix::Ones(1, 1));
      adam_step(model.params(), config, ++step);

      const Matrix& pv = tape.value(probs);
      for (std::size_t r = 0; r < idx.size(); ++r) {
        if (argmax_row(pv, static_cast<Eigen::Index>(r)) == train_set.target_bucket(idx[r])) ++hits;
      }
      loss_sum += batch_loss * static_cast<double>(idx.size());
      seen += idx.size();
    }
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.train_loss = loss_sum / static_cast<double>(seen);
    rec.train_accuracy = static_cast<double>(hits) / static_cast<double>(seen);
    if (!validation_set.empty()) {
      const SplitMetrics vm = measure(model, validation_set);
      rec.val_loss = vm.loss;
      rec.val_accuracy = vm.accuracy;
    }
    history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec, model);

    if (config.early_stop_patience && !validation_set.empty()) {
      if (rec.val_loss < best_val) {
        best_val = rec.val_loss;
        since_best = 0;
      } else if (++since_best >= *config.early_stop_patience) {
        break;
      }
    }
  }
  return history;
}

}  // namespace tsformer
