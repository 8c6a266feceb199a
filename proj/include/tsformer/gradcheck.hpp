#pragma once

#include "tsformer/numcore.hpp"
#include "tsformer/tape.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tsformer {

/// A computation description: declared input shapes plus a builder that
/// records the computation on a tape. Parameters are referenced by the
/// builder through Tape::param.
struct Graph {
  using Builder = std::function<Tape::Var(Tape&, std::span<const Tape::Var>)>;

  std::string name;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> input_shapes;
  Builder build;
};

/// Output of a graph evaluation together with its activation record.
struct Evaluation {
  Matrix output;
  std::unique_ptr<Rng> rng;
  std::unique_ptr<Tape> cache;
  Tape::Var output_var;
};

/// Run `graph` on `inputs`. Train mode draws dropout masks from a generator
/// seeded with `seed`; the result is bit-reproducible for fixed inputs,
/// parameters, seed and mode.
Evaluation evaluate(const Graph& graph, std::span<const Matrix> inputs, Mode mode,
                    std::uint64_t seed = 0);

/// Accumulate reverse-mode gradients of <upstream, output> into every
/// parameter the graph referenced. Dropout masks of the cache are reused.
void gradient(Evaluation& evaluation, const Matrix& upstream);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
};

/// Compare reverse-mode gradients of a seeded random projection of the graph
/// output against central differences, entry by entry over `params`.
/// Error per entry is |analytic - numeric| / max(1, |numeric|).
GradCheckResult finite_diff_check(const Graph& graph, std::span<const Matrix> inputs,
                                  ParamStore& params, double epsilon, std::uint64_t seed);

}  // namespace tsformer
