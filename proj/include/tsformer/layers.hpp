#pragma once

// Reference (non-recording) versions of the encoder layers for a single
// (l, d) sequence. The model records the same computations on a Tape.

#include "tsformer/numcore.hpp"

#include <cstddef>

namespace tsformer {

struct AttentionHead {
  Matrix weights;  // (l, l), rows sum to one
  Matrix values;   // (l, d_v), weights * V
};

/// Single head: Q = X W_Q, K = X W_K, V = X W_V and
/// weights = row-softmax(Q K^T / sqrt(d_k)), with d_k = W_K.cols().
AttentionHead attention_head(const Matrix& x, const Matrix& wq, const Matrix& wk, const Matrix& wv);

struct MultiHeadWeights {
  std::size_t heads = 1;
  Matrix wq, bq;  // (d, heads * d_k), (1, heads * d_k)
  Matrix wk, bk;
  Matrix wv, bv;  // (d, heads * d_v), (1, heads * d_v)
  Matrix wo, bo;  // (heads * d_v, d), (1, d)
};

/// Concatenate the heads' outputs along columns and project with W_O.
Matrix multi_head(const Matrix& x, const MultiHeadWeights& w);

/// Per row: (x - mean) / (std + eps) with the 1/d variance, then gamma * . + beta.
Matrix layer_norm(const Matrix& x, const Matrix& gamma, const Matrix& beta, double eps);

/// relu(x F1 + b1) F2 + b2, the same map at every position.
Matrix feed_forward(const Matrix& x, const Matrix& f1, const Matrix& b1, const Matrix& f2,
                    const Matrix& b2);

}  // namespace tsformer
