#pragma once

#include "tsformer/numcore.hpp"

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace tsformer {

/// Define-by-run reverse-mode recorder.
///
/// Every operation appends a node holding its value and the closure that
/// propagates an adjoint to its parents. The tape doubles as the activation
/// record: dropout masks, attention weights and normalization statistics are
/// stored on it, so a backward pass reuses exactly what the forward pass drew.
/// Nodes are created in topological order; backward walks them in reverse.
class Tape {
 public:
  struct Var {
    std::size_t id = 0;
  };

  explicit Tape(Mode mode = Mode::infer, Rng* rng = nullptr);

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Mode mode() const { return mode_; }

  Var input(Matrix value, std::string name = "input");
  /// Reference a learnable tensor; backward accumulates into its gradient.
  /// The tensor must outlive the tape and keep its shape.
  Var param(ParamTensor& p);

  Var matmul(Var a, Var b);
  Var transpose(Var a);
  /// x * w + bias, with bias a (1, cols) row broadcast over rows.
  Var affine(Var x, Var w, Var bias);
  Var add(Var a, Var b);
  Var scale(Var a, double factor);
  Var relu(Var a);
  Var softmax_rows(Var a);
  /// Inverted dropout: identity in infer mode, or when rate == 0.
  Var dropout(Var a, double rate);
  /// Per row: (x - mean) / (std + eps) with the biased (1/d) variance,
  /// followed by gamma * x + beta. gamma and beta are (1, cols).
  Var layer_norm(Var x, Var gamma, Var beta, double eps);
  /// Multi-head scaled dot-product self-attention over stacked sequences.
  ///
  /// q and k are (batch * seq_len, heads * key_dim), v is
  /// (batch * seq_len, heads * value_dim). Rows [b * seq_len, (b+1) * seq_len)
  /// form sequence b. Head h uses column block h of each input; its weights
  /// are softmax(q_h k_h^T / sqrt(key_dim)) row-wise. Output concatenates the
  /// per-head weights * v_h along columns.
  Var attention(Var q, Var k, Var v, std::size_t heads, std::size_t seq_len);
  /// Fused multi-head self-attention with input and output projections:
  /// q = x wq + bq, k = x wk + bk, v = x wv + bv, z = attention(q, k, v),
  /// out = z wo + bo. Works a few sequences at a time and recomputes the
  /// projections during backward, so the wide (rows, heads * key_dim)
  /// intermediates are never materialized for the whole batch.
  Var self_attention(Var x, Var wq, Var bq, Var wk, Var bk, Var wv, Var bv, Var wo, Var bo,
                     std::size_t heads, std::size_t seq_len);
  /// Mean over columns: (rows, cols) -> (rows, 1).
  Var row_mean(Var a);
  /// Row-major reinterpretation to a new shape with the same entry count.
  Var reshape(Var a, Eigen::Index rows, Eigen::Index cols);
  Var sum(Var a);
  /// Mean over rows of -sum_j target_j * ln(max(prob_j, floor)); (1, 1).
  Var cross_entropy(Var probs, const Matrix& targets, double floor = 1e-12);

  const Matrix& value(Var v) const;
  /// Adjoint after backward(); an empty matrix when the node is unreachable.
  const Matrix& adjoint(Var v) const;
  std::string_view op(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  /// Attention weights recorded by an attention node: one (seq_len, seq_len)
  /// matrix per (sequence, head), ordered sequence-major.
  const std::vector<Matrix>& attention_weights(Var v) const;

  /// Propagate `upstream` (shape of value(output)) back through the tape and
  /// accumulate into the gradient of every referenced ParamTensor.
  void backward(Var output, const Matrix& upstream);

 private:
  struct Node {
    std::string op;
    Matrix value;
    const Matrix* external = nullptr;
    ParamTensor* param = nullptr;
    Matrix adjoint;
    std::vector<Matrix> attention;
    std::function<void(Tape&, const Matrix&)> back;
  };

  Var push(Node node);
  Node& node(Var v);
  const Node& node(Var v) const;
  const Matrix& val(std::size_t id) const;
  void accumulate(std::size_t id, const Matrix& g);
  void accumulate(std::size_t id, Matrix&& g);
  [[noreturn]] void shape_error(std::string_view op, const std::string& detail) const;

  Mode mode_;
  Rng* rng_;
  std::vector<Node> nodes_;
};

}  // namespace tsformer
