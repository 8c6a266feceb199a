#include "tsformer/model.hpp"

#include <cmath>
#include <stdexcept>

namespace tsformer {

std::string_view to_string(NormPlacement p) { return p == NormPlacement::pre ? "pre" : "post"; }

NormPlacement parse_norm_placement(std::string_view s) {
  if (s == "pre") return NormPlacement::pre;
  if (s == "post") return NormPlacement::post;
  throw std::invalid_argument("unknown norm placement '" + std::string(s) + "' (expected pre or post)");
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v < 1) throw std::invalid_argument(std::string("ModelConfig: ") + name + " must be at least 1");
  };
  positive(length, "length");
  positive(dim, "dim");
  positive(num_heads, "num_heads");
  positive(head_size, "head_size");
  positive(num_blocks, "num_blocks");
  positive(ff_dim, "ff_dim");
  if (classes < 2) throw std::invalid_argument("ModelConfig: classes must be at least 2");
  for (std::size_t u : mlp_units) positive(u, "mlp_units entry");
  if (!(dropout >= 0.0 && dropout < 1.0) || !(mlp_dropout >= 0.0 && mlp_dropout < 1.0)) {
    throw std::invalid_argument("ModelConfig: dropout rates must lie in [0, 1)");
  }
  if (!(layernorm_epsilon > 0.0)) throw std::invalid_argument("ModelConfig: layernorm_epsilon must be > 0");
}

std::size_t ModelConfig::parameter_count() const {
  const std::size_t d = dim;
  const std::size_t width = num_heads * head_size;
  const std::size_t attention = 3 * (d * width + width) + (width * d + d);
  const std::size_t norms = 4 * d;
  const std::size_t ff = (d * ff_dim + ff_dim) + (ff_dim * d + d);
  std::size_t total = num_blocks * (attention + norms + ff);
  std::size_t fan_in = length;
  for (std::size_t u : mlp_units) {
    total += fan_in * u + u;
    fan_in = u;
  }
  total += fan_in * classes + classes;
  return total;
}

EncoderClassifier::EncoderClassifier(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
}

namespace {

Matrix glorot(Eigen::Index fan_in, Eigen::Index fan_out, Rng* rng) {
  Matrix w(fan_in, fan_out);
  if (rng == nullptr) {
    w.setZero();
    return w;
  }
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = (2.0 * rng->uniform() - 1.0) * limit;
  return w;
}

}  // namespace

void EncoderClassifier::build_parameters(Rng* rng) {
  const auto d = static_cast<Eigen::Index>(config_.dim);
  const auto width = static_cast<Eigen::Index>(config_.num_heads * config_.head_size);
  const auto ff = static_cast<Eigen::Index>(config_.ff_dim);
  auto zeros = [](Eigen::Index n) { return Matrix(Matrix::Zero(1, n)); };
  auto ones = [](Eigen::Index n) { return Matrix(Matrix::Ones(1, n)); };

  for (std::size_t b = 0; b < config_.num_blocks; ++b) {
    const std::string p = "block" + std::to_string(b) + ".";
    BlockIds ids{};
    ids.wq = params_.add(p + "attn.wq", glorot(d, width, rng));
    ids.bq = params_.add(p + "attn.bq", zeros(width));
    ids.wk = params_.add(p + "attn.wk", glorot(d, width, rng));
    ids.bk = params_.add(p + "attn.bk", zeros(width));
    ids.wv = params_.add(p + "attn.wv", glorot(d, width, rng));
    ids.bv = params_.add(p + "attn.bv", zeros(width));
    ids.wo = params_.add(p + "attn.wo", glorot(width, d, rng));
    ids.bo = params_.add(p + "attn.bo", zeros(d));
    ids.ln1_gamma = params_.add(p + "ln1.gamma", ones(d));
    ids.ln1_beta = params_.add(p + "ln1.beta", zeros(d));
    ids.ln2_gamma = params_.add(p + "ln2.gamma", ones(d));
    ids.ln2_beta = params_.add(p + "ln2.beta", zeros(d));
    ids.ff1_w = params_.add(p + "ff1.w", glorot(d, ff, rng));
    ids.ff1_b = params_.add(p + "ff1.b", zeros(ff));
    ids.ff2_w = params_.add(p + "ff2.w", glorot(ff, d, rng));
    ids.ff2_b = params_.add(p + "ff2.b", zeros(d));
    blocks_.push_back(ids);
  }
  auto fan_in = static_cast<Eigen::Index>(config_.length);
  for (std::size_t i = 0; i < config_.mlp_units.size(); ++i) {
    const auto units = static_cast<Eigen::Index>(config_.mlp_units[i]);
    const std::string p = "head.dense" + std::to_string(i) + ".";
    DenseIds ids{};
    ids.w = params_.add(p + "w", glorot(fan_in, units, rng));
    ids.b = params_.add(p + "b", zeros(units));
    mlp_.push_back(ids);
    fan_in = units;
  }
  const auto k = static_cast<Eigen::Index>(config_.classes);
  out_.w = params_.add("head.out.w", glorot(fan_in, k, rng));
  out_.b = params_.add("head.out.b", zeros(k));
}

EncoderClassifier EncoderClassifier::init(const ModelConfig& config, std::uint64_t seed) {
  EncoderClassifier model(config);
  Rng rng(seed);
  model.build_parameters(&rng);
  return model;
}

Tape::Var EncoderClassifier::record(Tape& tape, Tape::Var x, std::size_t batch) {
  const auto l = static_cast<Eigen::Index>(config_.length);
  const auto d = static_cast<Eigen::Index>(config_.dim);
  const Matrix& xv = tape.value(x);
  if (batch == 0 || xv.rows() != static_cast<Eigen::Index>(batch) * l || xv.cols() != d) {
    throw ShapeError("EncoderClassifier: input of shape (" + std::to_string(xv.rows()) + ", " +
                     std::to_string(xv.cols()) + ") does not match " + std::to_string(batch) +
                     " sequences of shape (" + std::to_string(l) + ", " + std::to_string(d) + ")");
  }
  auto P = [&](std::size_t id) { return tape.param(params_[id]); };
  const double eps = config_.layernorm_epsilon;

  Tape::Var h = x;
  for (const BlockIds& b : blocks_) {
    const bool pre = config_.norm_placement == NormPlacement::pre;
    const Tape::Var attn_in = pre ? tape.layer_norm(h, P(b.ln1_gamma), P(b.ln1_beta), eps) : h;
    Tape::Var a = tape.self_attention(attn_in, P(b.wq), P(b.bq), P(b.wk), P(b.bk), P(b.wv), P(b.bv),
                                      P(b.wo), P(b.bo), config_.num_heads, config_.length);
    a = tape.dropout(a, config_.dropout);
    const Tape::Var r1 = tape.add(a, h);
    const Tape::Var normed = tape.layer_norm(r1, P(b.ln2_gamma), P(b.ln2_beta), eps);
    Tape::Var f = tape.relu(tape.affine(normed, P(b.ff1_w), P(b.ff1_b)));
    f = tape.dropout(f, config_.dropout);
    f = tape.affine(f, P(b.ff2_w), P(b.ff2_b));
    h = tape.add(f, normed);
    if (!pre) h = tape.layer_norm(h, P(b.ln1_gamma), P(b.ln1_beta), eps);
  }
  Tape::Var pooled = tape.reshape(tape.row_mean(h), static_cast<Eigen::Index>(batch), l);
  for (const DenseIds& dense : mlp_) {
    pooled = tape.relu(tape.affine(pooled, P(dense.w), P(dense.b)));
    pooled = tape.dropout(pooled, config_.mlp_dropout);
  }
  return tape.softmax_rows(tape.affine(pooled, P(out_.w), P(out_.b)));
}

Distribution EncoderClassifier::forward(const Matrix& x, Mode mode, Rng* rng) {
  require_shape(x, static_cast<Eigen::Index>(config_.length), static_cast<Eigen::Index>(config_.dim),
                "EncoderClassifier::forward input");
  Tape tape(mode, rng);
  const Tape::Var in = tape.input(x);
  const Matrix& probs = tape.value(record(tape, in, 1));
  return Distribution(probs.data(), probs.data() + probs.size());
}

Matrix EncoderClassifier::predict(const Matrix& stacked, std::size_t batch) {
  Tape tape(Mode::infer);
  const Tape::Var in = tape.input(stacked);
  return tape.value(record(tape, in, batch));
}

MultiHeadWeights EncoderClassifier::attention_weights(std::size_t block) const {
  const BlockIds& b = blocks_.at(block);
  MultiHeadWeights w;
  w.heads = config_.num_heads;
  w.wq = params_[b.wq].value;
  w.bq = params_[b.bq].value;
  w.wk = params_[b.wk].value;
  w.bk = params_[b.bk].value;
  w.wv = params_[b.wv].value;
  w.bv = params_[b.bv].value;
  w.wo = params_[b.wo].value;
  w.bo = params_[b.bo].value;
  return w;
}

}  // namespace tsformer
