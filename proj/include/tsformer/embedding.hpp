#pragma once

#include "tsformer/numcore.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace tsformer {

struct EmbeddingConfig {
  std::size_t d = 16;
  bool use_positional = false;

  void validate() const;
  bool operator==(const EmbeddingConfig&) const = default;
};

/// phi(y) = (y, y^2/2!, ..., y^d/d!), by the recurrence c_j = c_{j-1} * y / j.
std::vector<double> embed(double y, std::size_t d);
void embed_into(double y, std::span<double> out);

/// Sinusoidal positional encoding for window offsets t = 0..l-1:
///   P(t, 2j) = sin(t w_j), P(t, 2j+1) = cos(t w_j), w_j = 10000^(-2j/d).
///
/// Each row has squared norm d/2, and the Gram matrix P P^T is Toeplitz:
/// the inner product of two rows depends only on their offset.
struct PositionalMatrix {
  Matrix P;
  std::vector<double> frequencies;
};

PositionalMatrix positional_matrix(std::size_t l, std::size_t d);

/// Block-diagonal rotation T_k with 2x2 blocks
///   [[cos(k w_j), sin(k w_j)], [-sin(k w_j), cos(k w_j)]],
/// so that row t+k of P equals T_k applied to row t.
Matrix rotation_operator(long k, std::size_t d);

/// (l, d) sequence whose row t is phi(window[t]), plus P's row t when the
/// config enables positional encoding.
Matrix build_sequence(std::span<const double> window, const EmbeddingConfig& config,
                      const PositionalMatrix* positional);

}  // namespace tsformer
