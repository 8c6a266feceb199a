#pragma once

#include "tsformer/layers.hpp"
#include "tsformer/numcore.hpp"
#include "tsformer/tape.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace tsformer {

enum class NormPlacement { pre, post };

std::string_view to_string(NormPlacement p);
NormPlacement parse_norm_placement(std::string_view s);

/// Encoder-classifier hyperparameters. Defaults are the base case:
/// l = 32, d = l / 2, 7 classes, 8 heads of size 64, 6 blocks,
/// ff_dim = 4 d, one dense layer of 10 units, dropout 0.25.
struct ModelConfig {
  std::size_t length = 32;
  std::size_t dim = 16;
  std::size_t classes = 7;
  std::size_t num_heads = 8;
  std::size_t head_size = 64;
  std::size_t num_blocks = 6;
  std::size_t ff_dim = 64;
  std::vector<std::size_t> mlp_units{10};
  double dropout = 0.25;
  double mlp_dropout = 0.25;
  double layernorm_epsilon = 1e-6;
  NormPlacement norm_placement = NormPlacement::pre;

  void validate() const;
  /// Closed-form count of learnable scalars.
  std::size_t parameter_count() const;

  bool operator==(const ModelConfig&) const = default;
};

/// Transformer encoder followed by a dense classification head.
///
/// Each block, pre-norm placement (default):
///   u = LN1(x); a = dropout(MHA(u)); r = a + x; v = LN2(r);
///   out = FF(v) + v, with dropout between the two feed-forward maps.
/// Post-norm placement:
///   a = dropout(MHA(x)); v = LN2(a + x); out = LN1(FF(v) + v).
/// Head: average each position's features to a length-l vector, then
/// dense+relu+dropout per mlp_units entry, then dense+softmax to k classes.
///
/// Attention logits are scaled by 1/sqrt(head_size).
class EncoderClassifier {
 public:
  static EncoderClassifier init(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// Record the forward pass for a stack of `batch` sequences,
  /// x of shape (batch * l, d). Returns the (batch, k) probabilities.
  Tape::Var record(Tape& tape, Tape::Var x, std::size_t batch);

  /// Probability vector for a single (l, d) sequence.
  Distribution forward(const Matrix& x, Mode mode, Rng* rng = nullptr);
  /// Infer-mode probabilities for stacked sequences, (batch, k).
  Matrix predict(const Matrix& stacked, std::size_t batch);

  /// Copy of one block's attention parameters.
  MultiHeadWeights attention_weights(std::size_t block) const;

  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  /// Load a checkpoint; throws CheckpointError on format problems.
  static EncoderClassifier load(std::istream& in);
  static EncoderClassifier load(const std::filesystem::path& path);
  /// Load and reject when the stored config differs from `expected`.
  static EncoderClassifier load(const std::filesystem::path& path, const ModelConfig& expected);

 private:
  explicit EncoderClassifier(ModelConfig config);
  void build_parameters(Rng* rng);

  struct BlockIds {
    std::size_t wq, bq, wk, bk, wv, bv, wo, bo;
    std::size_t ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;
    std::size_t ff1_w, ff1_b, ff2_w, ff2_b;
  };
  struct DenseIds {
    std::size_t w, b;
  };

  ModelConfig config_;
  ParamStore params_;
  std::vector<BlockIds> blocks_;
  std::vector<DenseIds> mlp_;
  DenseIds out_{};
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat "key=value" lines describing a ModelConfig.
std::string serialize_model_config(const ModelConfig& config);
ModelConfig parse_model_config(std::string_view text);

}  // namespace tsformer
