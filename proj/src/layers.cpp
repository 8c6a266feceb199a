#include "tsformer/layers.hpp"

#include <cmath>
#include <string>

namespace tsformer {

namespace {

void check_cols(const Matrix& a, const Matrix& b, const char* what) {
  if (a.cols() != b.rows()) {
    throw ShapeError(std::string(what) + ": inner dimensions " + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.rows()));
  }
}

}  // namespace

AttentionHead attention_head(const Matrix& x, const Matrix& wq, const Matrix& wk, const Matrix& wv) {
  check_cols(x, wq, "attention_head W_Q");
  check_cols(x, wk, "attention_head W_K");
  check_cols(x, wv, "attention_head W_V");
  if (wq.cols() != wk.cols()) throw ShapeError("attention_head: W_Q and W_K widths differ");
  const Matrix q = x * wq;
  const Matrix k = x * wk;
  const Matrix v = x * wv;
  AttentionHead out;
  out.weights = softmax_rows((q * k.transpose()) / std::sqrt(static_cast<double>(wk.cols())));
  out.values = out.weights * v;
  return out;
}

Matrix multi_head(const Matrix& x, const MultiHeadWeights& w) {
  const auto h = static_cast<Eigen::Index>(w.heads);
  if (h == 0 || w.wq.cols() % h != 0 || w.wv.cols() % h != 0) {
    throw ShapeError("multi_head: projection widths must be multiples of the head count");
  }
  check_cols(x, w.wq, "multi_head W_Q");
  check_cols(x, w.wk, "multi_head W_K");
  check_cols(x, w.wv, "multi_head W_V");
  const Eigen::Index dk = w.wq.cols() / h;
  const Eigen::Index dv = w.wv.cols() / h;
  Matrix q = x * w.wq;
  q.rowwise() += w.bq.row(0);
  Matrix k = x * w.wk;
  k.rowwise() += w.bk.row(0);
  Matrix v = x * w.wv;
  v.rowwise() += w.bv.row(0);
  Matrix z(x.rows(), w.wv.cols());
  for (Eigen::Index hh = 0; hh < h; ++hh) {
    const Matrix qh = q.middleCols(hh * dk, dk);
    const Matrix kh = k.middleCols(hh * dk, dk);
    const Matrix a = softmax_rows((qh * kh.transpose()) / std::sqrt(static_cast<double>(dk)));
    z.middleCols(hh * dv, dv) = a * v.middleCols(hh * dv, dv);
  }
  check_cols(z, w.wo, "multi_head W_O");
  Matrix out = z * w.wo;
  out.rowwise() += w.bo.row(0);
  return out;
}

Matrix layer_norm(const Matrix& x, const Matrix& gamma, const Matrix& beta, double eps) {
  require_shape(gamma, 1, x.cols(), "layer_norm gamma");
  require_shape(beta, 1, x.cols(), "layer_norm beta");
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const Eigen::RowVectorXd centered = x.row(r).array() - mean;
    const double sigma = std::sqrt(centered.squaredNorm() / static_cast<double>(x.cols()));
    out.row(r) = (centered.array() / (sigma + eps)) * gamma.row(0).array() + beta.row(0).array();
  }
  return out;
}

Matrix feed_forward(const Matrix& x, const Matrix& f1, const Matrix& b1, const Matrix& f2,
                    const Matrix& b2) {
  check_cols(x, f1, "feed_forward F1");
  require_shape(b1, 1, f1.cols(), "feed_forward b1");
  check_cols(f1, f2, "feed_forward F2");
  require_shape(b2, 1, f2.cols(), "feed_forward b2");
  Matrix hidden = x * f1;
  hidden.rowwise() += b1.row(0);
  hidden = hidden.cwiseMax(0.0);
  Matrix out = hidden * f2;
  out.rowwise() += b2.row(0);
  return out;
}

}  // namespace tsformer
