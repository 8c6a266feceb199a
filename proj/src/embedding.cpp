#include "tsformer/embedding.hpp"

#include <cmath>
#include <stdexcept>

namespace tsformer {

namespace {

void require_even(std::size_t d, const char* what) {
  if (d < 2 || d % 2 != 0) {
    throw std::invalid_argument(std::string(what) + ": dimension must be even and at least 2");
  }
}

double frequency(std::size_t j, std::size_t d) {
  return std::pow(10000.0, -2.0 * static_cast<double>(j) / static_cast<double>(d));
}

}  // namespace

void EmbeddingConfig::validate() const { require_even(d, "EmbeddingConfig"); }

void embed_into(double y, std::span<double> out) {
  double c = 1.0;
  for (std::size_t j = 0; j < out.size(); ++j) {
    c = c * y / static_cast<double>(j + 1);
    out[j] = c;
  }
}

std::vector<double> embed(double y, std::size_t d) {
  if (d < 1) throw std::invalid_argument("embed: d must be at least 1");
  if (!std::isfinite(y)) throw std::invalid_argument("embed: non-finite input");
  std::vector<double> out(d);
  embed_into(y, out);
  return out;
}

PositionalMatrix positional_matrix(std::size_t l, std::size_t d) {
  require_even(d, "positional_matrix");
  PositionalMatrix pm;
  pm.frequencies.resize(d / 2);
  for (std::size_t j = 0; j < d / 2; ++j) pm.frequencies[j] = frequency(j, d);
  pm.P.resize(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(d));
  for (std::size_t t = 0; t < l; ++t) {
    for (std::size_t j = 0; j < d / 2; ++j) {
      const double angle = static_cast<double>(t) * pm.frequencies[j];
      pm.P(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(2 * j)) = std::sin(angle);
      pm.P(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(2 * j + 1)) = std::cos(angle);
    }
  }
  return pm;
}

Matrix rotation_operator(long k, std::size_t d) {
  require_even(d, "rotation_operator");
  Matrix T = Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t j = 0; j < d / 2; ++j) {
    const double angle = static_cast<double>(k) * frequency(j, d);
    const auto i = static_cast<Eigen::Index>(2 * j);
    T(i, i) = std::cos(angle);
    T(i, i + 1) = std::sin(angle);
    T(i + 1, i) = -std::sin(angle);
    T(i + 1, i + 1) = std::cos(angle);
  }
  return T;
}

Matrix build_sequence(std::span<const double> window, const EmbeddingConfig& config,
                      const PositionalMatrix* positional) {
  const auto l = static_cast<Eigen::Index>(window.size());
  const auto d = static_cast<Eigen::Index>(config.d);
  Matrix X(l, d);
  for (Eigen::Index t = 0; t < l; ++t) {
    embed_into(window[static_cast<std::size_t>(t)],
               std::span<double>(X.row(t).data(), static_cast<std::size_t>(d)));
  }
  if (config.use_positional) {
    if (positional == nullptr) throw std::invalid_argument("build_sequence: positional matrix required");
    if (positional->P.rows() != l || positional->P.cols() != d) {
      throw ShapeError("build_sequence: window length or dimension does not match positional matrix");
    }
    X += positional->P;
  }
  return X;
}

}  // namespace tsformer
