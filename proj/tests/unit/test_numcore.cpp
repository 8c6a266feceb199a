#include "tsformer/gradcheck.hpp"
#include "tsformer/numcore.hpp"
#include "tsformer/tape.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

using namespace tsformer;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

Matrix row(std::initializer_list<double> v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index j = 0;
  for (double x : v) m(0, j++) = x;
  return m;
}

}  // namespace

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(a.next(), b.next());
  }
  Rng c(42), d(42);
  for (int i = 0; i < 101; ++i) EXPECT_EQ(c.normal(), d.normal());
}

TEST(Rng, UniformInUnitInterval) {
  Rng rng(1);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.005);
}

TEST(Rng, NormalMoments) {
  Rng rng(3);
  const int n = 400000;
  double s = 0.0, s2 = 0.0, s4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.01);
  EXPECT_NEAR(s4 / n, 3.0, 0.05);
}

TEST(Rng, BelowCoversRangeEvenly) {
  Rng rng(5);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const std::size_t v = rng.below(7);
    ASSERT_LT(v, 7u);
    ++counts[v];
  }
  for (int c : counts) EXPECT_NEAR(c, n / 7, 400);
  EXPECT_THROW(rng.below(0), std::invalid_argument);
}

TEST(Rng, MixSeedSeparatesStreams) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 50; ++s) {
    for (std::uint64_t k = 0; k < 50; ++k) seen.insert(mix_seed(s, k));
  }
  EXPECT_EQ(seen.size(), 2500u);
}

TEST(ParamStore, RejectsDuplicatesAndCounts) {
  ParamStore ps;
  ps.add("a", Matrix::Ones(2, 3));
  ps.add("b", Matrix::Ones(4, 1));
  EXPECT_THROW(ps.add("a", Matrix::Ones(1, 1)), std::invalid_argument);
  EXPECT_EQ(ps.scalar_count(), 10u);
  EXPECT_EQ(ps.find("b"), 1u);
  EXPECT_THROW(ps.find("c"), std::out_of_range);
  const ParamTensor& a = ps[0];
  EXPECT_EQ(a.gradient.rows(), 2);
  EXPECT_EQ(a.adam_v.cols(), 3);
  EXPECT_EQ(a.adam_v.minCoeff(), 0.0);
}

TEST(Softmax, SymmetricRowIsUniform) {
  const Matrix p = softmax_rows(row({0.0, 0.0}));
  EXPECT_DOUBLE_EQ(p(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(p(0, 1), 0.5);
}

TEST(Softmax, RowsSumToOneAndSurviveLargeLogits) {
  Matrix logits = random_matrix(50, 7, 9, 30.0);
  logits(0, 0) = 1000.0;
  logits(1, 3) = -1000.0;
  const Matrix p = softmax_rows(logits);
  ASSERT_TRUE(all_finite(p));
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-12);
    EXPECT_GE(p.row(r).minCoeff(), 0.0);
  }
  EXPECT_NEAR(p(0, 0), 1.0, 1e-12);
}

TEST(FormatReal, RoundTrips) {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const double x = std::ldexp(rng.normal(), static_cast<int>(rng.below(80)) - 40);
    EXPECT_EQ(std::stod(format_real(x)), x);
  }
  EXPECT_EQ(format_real(0.25), "0.25");
}

TEST(RequireShape, NamesTheOperand) {
  try {
    require_shape(Matrix::Zero(2, 2), 3, 2, "weights");
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("weights"), std::string::npos);
  }
}

TEST(Tape, TrainModeNeedsRng) { EXPECT_THROW(Tape(Mode::train, nullptr), std::invalid_argument); }

TEST(Tape, IdentityGraph) {
  const Graph g{"identity", {{2, 2}}, [](Tape&, std::span<const Tape::Var> in) { return in[0]; }};
  Matrix x(2, 2);
  x << 1, 2, 3, 4;
  const Matrix inputs[] = {x};
  EXPECT_EQ(evaluate(g, inputs, Mode::infer).output, x);
}

TEST(Tape, InputShapeMismatchRejected) {
  const Graph g{"identity", {{2, 2}}, [](Tape&, std::span<const Tape::Var> in) { return in[0]; }};
  const Matrix inputs[] = {Matrix::Zero(3, 2)};
  EXPECT_THROW(evaluate(g, inputs, Mode::infer), ShapeError);
}

TEST(Tape, ShapeErrorNamesNode) {
  Tape t;
  const auto a = t.input(Matrix::Zero(2, 3));
  const auto b = t.input(Matrix::Zero(2, 3));
  try {
    t.matmul(a, b);
    FAIL();
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("matmul"), std::string::npos);
    EXPECT_NE(msg.find("node 2"), std::string::npos);
  }
}

TEST(Tape, GradientOfSquaredNorm) {
  ParamStore ps;
  Matrix x(2, 1);
  x << 1, 2;
  ps.add("x", x);
  Tape t;
  const auto v = t.param(ps[0]);
  const auto y = t.matmul(t.transpose(v), v);
  EXPECT_DOUBLE_EQ(t.value(y)(0, 0), 5.0);
  t.backward(y, Matrix::Ones(1, 1));
  EXPECT_DOUBLE_EQ(ps[0].gradient(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(ps[0].gradient(1, 0), 4.0);
}

TEST(Tape, CrossEntropyAtItsMinimumHasZeroLogitGradient) {
  ParamStore ps;
  ps.add("logits", random_matrix(3, 5, 2));
  const Matrix target = softmax_rows(ps[0].value);
  Tape t;
  const auto loss = t.cross_entropy(t.softmax_rows(t.param(ps[0])), target);
  t.backward(loss, Matrix::Ones(1, 1));
  EXPECT_LT(ps[0].gradient.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Tape, BackwardRejectsWrongUpstreamShape) {
  Tape t;
  const auto a = t.input(Matrix::Ones(2, 2));
  EXPECT_THROW(t.backward(t.relu(a), Matrix::Ones(1, 2)), ShapeError);
}

TEST(Tape, DropoutIdentityInInferAndAtRateZero) {
  const Matrix x = random_matrix(6, 5, 4);
  Tape infer;
  EXPECT_EQ(infer.value(infer.dropout(infer.input(x), 0.5)), x);
  Rng rng(1);
  Tape train(Mode::train, &rng);
  EXPECT_EQ(train.value(train.dropout(train.input(x), 0.0)), x);
}

TEST(Tape, DropoutScalesKeptUnitsAndReusesMask) {
  ParamStore ps;
  ps.add("x", Matrix::Ones(40, 50));
  Rng rng(8);
  Tape t(Mode::train, &rng);
  const auto y = t.dropout(t.param(ps[0]), 0.25);
  const Matrix& out = t.value(y);
  std::size_t kept = 0;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double v = out.data()[i];
    ASSERT_TRUE(v == 0.0 || std::abs(v - 1.0 / 0.75) < 1e-15);
    if (v != 0.0) ++kept;
  }
  EXPECT_NEAR(static_cast<double>(kept) / 2000.0, 0.75, 0.04);
  t.backward(y, Matrix::Ones(40, 50));
  EXPECT_EQ(ps[0].gradient, out);
}

TEST(Evaluate, BitReproducible) {
  ParamStore ps;
  ps.add("w", random_matrix(4, 6, 1));
  ps.add("b", random_matrix(1, 6, 2));
  const Graph g{"dense", {{5, 4}}, [&](Tape& t, std::span<const Tape::Var> in) {
                  return t.dropout(t.relu(t.affine(in[0], t.param(ps[0]), t.param(ps[1]))), 0.3);
                }};
  const Matrix inputs[] = {random_matrix(5, 4, 3)};
  EXPECT_EQ(evaluate(g, inputs, Mode::train, 9).output, evaluate(g, inputs, Mode::train, 9).output);
  EXPECT_EQ(evaluate(g, inputs, Mode::infer).output, evaluate(g, inputs, Mode::infer).output);
}

TEST(GradCheck, LinearGraphIsExact) {
  ParamStore ps;
  ps.add("w", random_matrix(3, 2, 1));
  const Graph g{"linear", {{4, 3}}, [&](Tape& t, std::span<const Tape::Var> in) {
                  return t.matmul(in[0], t.param(ps[0]));
                }};
  const Matrix inputs[] = {random_matrix(4, 3, 2)};
  EXPECT_LT(finite_diff_check(g, inputs, ps, 1e-5, 3).max_relative_error, 1e-10);
}

TEST(GradCheck, SingleAttentionHead) {
  ParamStore ps;
  ps.add("wq", random_matrix(4, 4, 1, 0.5));
  ps.add("wk", random_matrix(4, 4, 2, 0.5));
  ps.add("wv", random_matrix(4, 4, 3, 0.5));
  const Graph g{"head", {{4, 4}}, [&](Tape& t, std::span<const Tape::Var> in) {
                  const auto q = t.matmul(in[0], t.param(ps[0]));
                  const auto k = t.matmul(in[0], t.param(ps[1]));
                  const auto v = t.matmul(in[0], t.param(ps[2]));
                  return t.attention(q, k, v, 1, 4);
                }};
  const Matrix inputs[] = {random_matrix(4, 4, 4)};
  EXPECT_LT(finite_diff_check(g, inputs, ps, 1e-5, 5).max_relative_error, 1e-5);
}

TEST(GradCheck, EveryNodeType) {
  ParamStore ps;
  ps.add("w1", random_matrix(3, 6, 1, 0.7));
  ps.add("b1", random_matrix(1, 6, 2, 0.1));
  ps.add("gamma", Matrix::Ones(1, 6) + random_matrix(1, 6, 3, 0.1));
  ps.add("beta", random_matrix(1, 6, 4, 0.1));
  ps.add("wq", random_matrix(6, 4, 5, 0.5));
  ps.add("bq", random_matrix(1, 4, 6, 0.1));
  ps.add("wk", random_matrix(6, 4, 7, 0.5));
  ps.add("bk", random_matrix(1, 4, 8, 0.1));
  ps.add("wv", random_matrix(6, 6, 9, 0.5));
  ps.add("bv", random_matrix(1, 6, 10, 0.1));
  ps.add("wo", random_matrix(6, 6, 11, 0.5));
  ps.add("bo", random_matrix(1, 6, 12, 0.1));
  ps.add("m", random_matrix(6, 6, 13, 0.5));
  ps.add("head", random_matrix(4, 3, 14, 0.5));
  Matrix targets = Matrix::Zero(2, 3);
  targets(0, 1) = 1.0;
  targets(1, 2) = 1.0;
  const Graph g{"all", {{8, 3}}, [&](Tape& t, std::span<const Tape::Var> in) {
                  auto P = [&](const char* n) { return t.param(ps[ps.find(n)]); };
                  auto h = t.relu(t.affine(in[0], P("w1"), P("b1")));
                  h = t.dropout(h, 0.2);
                  h = t.layer_norm(h, P("gamma"), P("beta"), 1e-6);
                  const auto a = t.self_attention(h, P("wq"), P("bq"), P("wk"), P("bk"), P("wv"), P("bv"),
                                                  P("wo"), P("bo"), 2, 4);
                  h = t.add(a, t.scale(h, 0.5));
                  const auto q = t.matmul(h, P("m"));
                  const auto sep = t.attention(q, h, t.transpose(t.transpose(h)), 3, 4);
                  const auto pooled = t.reshape(t.row_mean(sep), 2, 4);
                  const auto probs = t.softmax_rows(t.matmul(pooled, P("head")));
                  return t.add(t.cross_entropy(probs, targets), t.scale(t.sum(probs), 0.1));
                }};
  const Matrix inputs[] = {random_matrix(8, 3, 20)};
  const GradCheckResult r = finite_diff_check(g, inputs, ps, 1e-5, 21);
  EXPECT_LT(r.max_relative_error, 1e-6) << r.worst_parameter;
}

TEST(GradCheck, FusedAttentionMatchesComposedOps) {
  ParamStore ps;
  ps.add("wq", random_matrix(4, 6, 1));
  ps.add("bq", random_matrix(1, 6, 2));
  ps.add("wk", random_matrix(4, 6, 3));
  ps.add("bk", random_matrix(1, 6, 4));
  ps.add("wv", random_matrix(4, 6, 5));
  ps.add("bv", random_matrix(1, 6, 6));
  ps.add("wo", random_matrix(6, 4, 7));
  ps.add("bo", random_matrix(1, 4, 8));
  const Matrix x = random_matrix(15, 4, 9);
  Tape t;
  auto P = [&](std::size_t i) { return t.param(ps[i]); };
  const auto in = t.input(x);
  const auto fused = t.self_attention(in, P(0), P(1), P(2), P(3), P(4), P(5), P(6), P(7), 3, 3);
  const auto z = t.attention(t.affine(in, P(0), P(1)), t.affine(in, P(2), P(3)), t.affine(in, P(4), P(5)), 3, 3);
  const auto composed = t.affine(z, P(6), P(7));
  EXPECT_LT((t.value(fused) - t.value(composed)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(t.attention_weights(fused).size(), 15u);
}

TEST(GradCheck, EpsilonRangeEnforced) {
  ParamStore ps;
  ps.add("w", Matrix::Ones(1, 1));
  const Graph g{"w", {}, [&](Tape& t, std::span<const Tape::Var>) { return t.param(ps[0]); }};
  EXPECT_THROW(finite_diff_check(g, {}, ps, 1e-2, 0), std::invalid_argument);
  EXPECT_THROW(finite_diff_check(g, {}, ps, 1e-9, 0), std::invalid_argument);
}

TEST(GradCheck, NonFiniteReportedWithParameterName) {
  ParamStore ps;
  ps.add("bad_weight", Matrix::Constant(1, 2, std::numeric_limits<double>::quiet_NaN()));
  const Graph g{"nan", {{1, 1}}, [&](Tape& t, std::span<const Tape::Var> in) {
                  return t.matmul(in[0], t.param(ps[0]));
                }};
  const Matrix inputs[] = {Matrix::Ones(1, 1)};
  try {
    finite_diff_check(g, inputs, ps, 1e-5, 0);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("bad_weight"), std::string::npos);
  }
}
