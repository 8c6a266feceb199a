#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tsformer {

/// Dense real matrix, row-major storage.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A length-k probability vector (predicted, one-hot or oracle).
using Distribution = std::vector<double>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Mode { train, infer };

/// Seeded, reproducible generator.
///
/// Core engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. Uniforms take the top 53 bits of one draw. Normal variates use
/// the Box-Muller transform on (1 - u1, u2), returning the cosine branch
/// first and caching the sine branch for the next call.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  double normal();
  /// Uniform integer in [0, n), unbiased (rejection sampling).
  std::size_t below(std::size_t n);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// splitmix64 finalizer, used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// A learnable tensor with its gradient and Adam moment estimates.
struct ParamTensor {
  ParamTensor(std::string name, Matrix value);

  std::string name;
  Matrix value;
  Matrix gradient;
  Matrix adam_m;
  Matrix adam_v;
};

/// Ordered owner of every learnable tensor of a model.
class ParamStore {
 public:
  std::size_t add(std::string name, Matrix value);

  ParamTensor& operator[](std::size_t i) { return params_.at(i); }
  const ParamTensor& operator[](std::size_t i) const { return params_.at(i); }
  std::size_t size() const { return params_.size(); }
  std::size_t find(std::string_view name) const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();
  /// Total number of scalar entries across all tensors.
  std::size_t scalar_count() const;

 private:
  std::vector<ParamTensor> params_;
};

void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, std::string_view what);
bool all_finite(const Matrix& m);

/// Row-wise softmax with row-max subtraction.
Matrix softmax_rows(const Matrix& logits);

/// Shortest decimal text that parses back to exactly `x`.
std::string format_real(double x);

/// Keep large freed blocks in the heap instead of returning them to the
/// kernel; training allocates and frees the same activation sizes every
/// batch. No-op outside glibc.
void tune_allocator();

}  // namespace tsformer
