#include "tsformer/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tsformer {

Evaluation evaluate(const Graph& graph, std::span<const Matrix> inputs, Mode mode,
                    std::uint64_t seed) {
  if (inputs.size() != graph.input_shapes.size()) {
    std::ostringstream os;
    os << graph.name << ": expected " << graph.input_shapes.size() << " inputs, got "
       << inputs.size();
    throw ShapeError(os.str());
  }
  Evaluation ev;
  ev.rng = std::make_unique<Rng>(seed);
  ev.cache = std::make_unique<Tape>(mode, ev.rng.get());
  std::vector<Tape::Var> vars;
  vars.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto [rows, cols] = graph.input_shapes[i];
    require_shape(inputs[i], rows, cols, graph.name + " input " + std::to_string(i));
    vars.push_back(ev.cache->input(inputs[i], "input" + std::to_string(i)));
  }
  ev.output_var = graph.build(*ev.cache, vars);
  ev.output = ev.cache->value(ev.output_var);
  return ev;
}

void gradient(Evaluation& evaluation, const Matrix& upstream) {
  if (!evaluation.cache) throw std::invalid_argument("gradient: evaluation has no cache");
  evaluation.cache->backward(evaluation.output_var, upstream);
}

namespace {

double projected(const Graph& graph, std::span<const Matrix> inputs, const Matrix& weights,
                 std::uint64_t seed) {
  const Evaluation ev = evaluate(graph, inputs, Mode::train, seed);
  return (ev.output.array() * weights.array()).sum();
}

}  // namespace

GradCheckResult finite_diff_check(const Graph& graph, std::span<const Matrix> inputs,
                                  ParamStore& params, double epsilon, std::uint64_t seed) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
    throw std::invalid_argument("finite_diff_check: epsilon must lie in [1e-7, 1e-3]");
  }
  Evaluation base = evaluate(graph, inputs, Mode::train, seed);
  Rng wrng(mix_seed(seed, 7));
  Matrix weights(base.output.rows(), base.output.cols());
  for (Eigen::Index i = 0; i < weights.size(); ++i) weights.data()[i] = wrng.normal();

  params.zero_grad();
  gradient(base, weights);

  GradCheckResult result;
  for (auto& p : params) {
    if (!p.gradient.allFinite()) {
      throw NumericError("finite_diff_check: non-finite analytic gradient for " + p.name);
    }
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      double& entry = p.value.data()[i];
      const double saved = entry;
      entry = saved + epsilon;
      const double plus = projected(graph, inputs, weights, seed);
      entry = saved - epsilon;
      const double minus = projected(graph, inputs, weights, seed);
      entry = saved;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        throw NumericError("finite_diff_check: non-finite evaluation perturbing " + p.name);
      }
      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double analytic = p.gradient.data()[i];
      const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_parameter = p.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

}  // namespace tsformer
