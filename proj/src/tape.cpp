#include "tsformer/tape.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tsformer {

namespace {

std::string shape_str(const Matrix& m) {
  std::ostringstream os;
  os << "(" << m.rows() << ", " << m.cols() << ")";
  return os.str();
}

using ConstBlock = Eigen::Block<const Matrix, Eigen::Dynamic, Eigen::Dynamic>;

}  // namespace

Tape::Tape(Mode mode, Rng* rng) : mode_(mode), rng_(rng) {
  if (mode_ == Mode::train && rng_ == nullptr) {
    throw std::invalid_argument("Tape: train mode requires an rng for dropout masks");
  }
  nodes_.reserve(256);
}

Tape::Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Tape::Node& Tape::node(Var v) {
  if (v.id >= nodes_.size()) throw std::out_of_range("Tape: unknown variable");
  return nodes_[v.id];
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id >= nodes_.size()) throw std::out_of_range("Tape: unknown variable");
  return nodes_[v.id];
}

const Matrix& Tape::val(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.external != nullptr ? *n.external : n.value;
}

const Matrix& Tape::value(Var v) const {
  node(v);
  return val(v.id);
}

const Matrix& Tape::adjoint(Var v) const { return node(v).adjoint; }

std::string_view Tape::op(Var v) const { return node(v).op; }

const std::vector<Matrix>& Tape::attention_weights(Var v) const {
  const Node& n = node(v);
  if (n.op != "attention" && n.op != "self_attention") {
    throw std::invalid_argument("Tape: node is not an attention node");
  }
  return n.attention;
}

void Tape::shape_error(std::string_view op, const std::string& detail) const {
  std::ostringstream os;
  os << "node " << nodes_.size() << " (" << op << "): " << detail;
  throw ShapeError(os.str());
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
  Node& n = nodes_[id];
  if (n.adjoint.size() == 0) {
    n.adjoint = g;
  } else {
    n.adjoint += g;
  }
}

void Tape::accumulate(std::size_t id, Matrix&& g) {
  Node& n = nodes_[id];
  if (n.adjoint.size() == 0) {
    n.adjoint = std::move(g);
  } else {
    n.adjoint += g;
  }
}

Tape::Var Tape::input(Matrix value, std::string name) {
  Node n;
  n.op = std::move(name);
  n.value = std::move(value);
  return push(std::move(n));
}

Tape::Var Tape::param(ParamTensor& p) {
  Node n;
  n.op = "param:" + p.name;
  n.external = &p.value;
  n.param = &p;
  return push(std::move(n));
}

Tape::Var Tape::matmul(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.cols() != B.rows()) shape_error("matmul", shape_str(A) + " x " + shape_str(B));
  Node n;
  n.op = "matmul";
  n.value.noalias() = A * B;
  const std::size_t ia = a.id, ib = b.id;
  n.back = [ia, ib](Tape& t, const Matrix& g) {
    Matrix ga;
    ga.noalias() = g * t.val(ib).transpose();
    Matrix gb;
    gb.noalias() = t.val(ia).transpose() * g;
    t.accumulate(ia, std::move(ga));
    t.accumulate(ib, std::move(gb));
  };
  return push(std::move(n));
}

Tape::Var Tape::transpose(Var a) {
  Node n;
  n.op = "transpose";
  n.value = value(a).transpose();
  const std::size_t ia = a.id;
  n.back = [ia](Tape& t, const Matrix& g) { t.accumulate(ia, Matrix(g.transpose())); };
  return push(std::move(n));
}

Tape::Var Tape::affine(Var x, Var w, Var bias) {
  const Matrix& X = value(x);
  const Matrix& W = value(w);
  const Matrix& Bv = value(bias);
  if (X.cols() != W.rows()) shape_error("affine", shape_str(X) + " x " + shape_str(W));
  if (Bv.rows() != 1 || Bv.cols() != W.cols()) {
    shape_error("affine", "bias " + shape_str(Bv) + " for weight " + shape_str(W));
  }
  Node n;
  n.op = "affine";
  n.value.noalias() = X * W;
  n.value.rowwise() += Bv.row(0);
  const std::size_t ix = x.id, iw = w.id, ib = bias.id;
  n.back = [ix, iw, ib](Tape& t, const Matrix& g) {
    Matrix gx;
    gx.noalias() = g * t.val(iw).transpose();
    Matrix gw;
    gw.noalias() = t.val(ix).transpose() * g;
    Matrix gb = g.colwise().sum();
    t.accumulate(ix, std::move(gx));
    t.accumulate(iw, std::move(gw));
    t.accumulate(ib, std::move(gb));
  };
  return push(std::move(n));
}

Tape::Var Tape::add(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.rows() != B.rows() || A.cols() != B.cols()) {
    shape_error("add", shape_str(A) + " + " + shape_str(B));
  }
  Node n;
  n.op = "add";
  n.value = A + B;
  const std::size_t ia = a.id, ib = b.id;
  n.back = [ia, ib](Tape& t, const Matrix& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  };
  return push(std::move(n));
}

Tape::Var Tape::scale(Var a, double factor) {
  Node n;
  n.op = "scale";
  n.value = value(a) * factor;
  const std::size_t ia = a.id;
  n.back = [ia, factor](Tape& t, const Matrix& g) { t.accumulate(ia, Matrix(g * factor)); };
  return push(std::move(n));
}

Tape::Var Tape::relu(Var a) {
  Node n;
  n.op = "relu";
  n.value = value(a).cwiseMax(0.0);
  const std::size_t ia = a.id;
  const std::size_t self = nodes_.size();
  n.back = [ia, self](Tape& t, const Matrix& g) {
    const Matrix& y = t.val(self);
    Matrix gx = (y.array() > 0.0).select(g, 0.0);
    t.accumulate(ia, std::move(gx));
  };
  return push(std::move(n));
}

Tape::Var Tape::softmax_rows(Var a) {
  Node n;
  n.op = "softmax";
  n.value = tsformer::softmax_rows(value(a));
  const std::size_t ia = a.id;
  const std::size_t self = nodes_.size();
  n.back = [ia, self](Tape& t, const Matrix& g) {
    const Matrix& y = t.val(self);
    Eigen::VectorXd dots = (g.array() * y.array()).rowwise().sum();
    Matrix gx = y.array() * (g.array().colwise() - dots.array());
    t.accumulate(ia, std::move(gx));
  };
  return push(std::move(n));
}

Tape::Var Tape::dropout(Var a, double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw std::invalid_argument("dropout: rate must lie in [0, 1)");
  }
  const Matrix& A = value(a);
  const std::size_t ia = a.id;
  if (mode_ == Mode::infer || rate == 0.0) {
    Node n;
    n.op = "dropout";
    n.value = A;
    n.back = [ia](Tape& t, const Matrix& g) { t.accumulate(ia, g); };
    return push(std::move(n));
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  Matrix mask(A.rows(), A.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = rng_->uniform() >= rate ? keep_scale : 0.0;
  }
  Node n;
  n.op = "dropout";
  n.value = A.cwiseProduct(mask);
  n.back = [ia, mask = std::move(mask)](Tape& t, const Matrix& g) {
    t.accumulate(ia, Matrix(g.cwiseProduct(mask)));
  };
  return push(std::move(n));
}

Tape::Var Tape::layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Matrix& X = value(x);
  const Matrix& G = value(gamma);
  const Matrix& Bt = value(beta);
  if (G.rows() != 1 || G.cols() != X.cols() || Bt.rows() != 1 || Bt.cols() != X.cols()) {
    shape_error("layer_norm", "gamma " + shape_str(G) + ", beta " + shape_str(Bt) +
                                  " for input " + shape_str(X));
  }
  const Eigen::Index rows = X.rows();
  const double d = static_cast<double>(X.cols());
  Matrix normalized(rows, X.cols());
  Eigen::VectorXd sigma(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double mean = X.row(r).mean();
    auto centered = (X.row(r).array() - mean);
    const double s = std::sqrt(centered.square().sum() / d);
    sigma(r) = s;
    normalized.row(r) = (centered / (s + eps)).matrix();
  }
  Node n;
  n.op = "layer_norm";
  n.value = normalized.array().rowwise() * G.row(0).array();
  n.value.rowwise() += Bt.row(0);
  const std::size_t ix = x.id, ig = gamma.id, ib = beta.id;
  n.back = [ix, ig, ib, eps, normalized = std::move(normalized), sigma = std::move(sigma)](
               Tape& t, const Matrix& g) {
    const Matrix& Gm = t.val(ig);
    const double dd = static_cast<double>(normalized.cols());
    Matrix gg = (g.array() * normalized.array()).colwise().sum();
    Matrix gb = g.colwise().sum();
    Matrix gx(g.rows(), g.cols());
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      const double s = sigma(r) + eps;
      Eigen::RowVectorXd dn = (g.row(r).array() * Gm.row(0).array()).matrix();
      Eigen::RowVectorXd direct = dn / s;
      Eigen::RowVectorXd row = direct.array() - direct.mean();
      if (sigma(r) > 0.0) {
        // centered = normalized * s
        const double d_scale = -(dn.array() * normalized.row(r).array()).sum() / s;
        row += (d_scale / (dd * sigma(r))) * (normalized.row(r) * s);
      }
      gx.row(r) = row;
    }
    t.accumulate(ix, std::move(gx));
    t.accumulate(ig, std::move(gg));
    t.accumulate(ib, std::move(gb));
  };
  return push(std::move(n));
}

Tape::Var Tape::attention(Var q, Var k, Var v, std::size_t heads, std::size_t seq_len) {
  const Matrix& Q = value(q);
  const Matrix& K = value(k);
  const Matrix& V = value(v);
  if (heads == 0 || seq_len == 0) shape_error("attention", "heads and seq_len must be positive");
  const auto h = static_cast<Eigen::Index>(heads);
  const auto l = static_cast<Eigen::Index>(seq_len);
  if (Q.rows() != K.rows() || Q.rows() != V.rows() || Q.cols() != K.cols()) {
    shape_error("attention", "q " + shape_str(Q) + ", k " + shape_str(K) + ", v " + shape_str(V));
  }
  if (Q.rows() % l != 0 || Q.cols() % h != 0 || V.cols() % h != 0) {
    shape_error("attention", "rows must be a multiple of seq_len and columns of heads");
  }
  const Eigen::Index batch = Q.rows() / l;
  const Eigen::Index dk = Q.cols() / h;
  const Eigen::Index dv = V.cols() / h;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));

  Node n;
  n.op = "attention";
  n.value.resize(Q.rows(), V.cols());
  n.attention.reserve(static_cast<std::size_t>(batch * h));
  Matrix scores(l, l);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index hh = 0; hh < h; ++hh) {
      auto qb = Q.block(b * l, hh * dk, l, dk);
      auto kb = K.block(b * l, hh * dk, l, dk);
      auto vb = V.block(b * l, hh * dv, l, dv);
      scores.noalias() = qb * kb.transpose();
      scores *= inv_sqrt;
      Matrix weights = tsformer::softmax_rows(scores);
      n.value.block(b * l, hh * dv, l, dv).noalias() = weights * vb;
      n.attention.push_back(std::move(weights));
    }
  }
  const std::size_t iq = q.id, ik = k.id, iv = v.id;
  const std::size_t self = nodes_.size();
  n.back = [iq, ik, iv, self, batch, h, l, dk, dv, inv_sqrt](Tape& t, const Matrix& g) {
    const Matrix& Qm = t.val(iq);
    const Matrix& Km = t.val(ik);
    const Matrix& Vm = t.val(iv);
    const auto& weights = t.nodes_[self].attention;
    Matrix gq = Matrix::Zero(Qm.rows(), Qm.cols());
    Matrix gk = Matrix::Zero(Km.rows(), Km.cols());
    Matrix gv = Matrix::Zero(Vm.rows(), Vm.cols());
    Matrix dA(l, l);
    Matrix dS(l, l);
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (Eigen::Index hh = 0; hh < h; ++hh) {
        const Matrix& A = weights[static_cast<std::size_t>(b * h + hh)];
        auto gz = g.block(b * l, hh * dv, l, dv);
        auto vb = Vm.block(b * l, hh * dv, l, dv);
        auto qb = Qm.block(b * l, hh * dk, l, dk);
        auto kb = Km.block(b * l, hh * dk, l, dk);
        dA.noalias() = gz * vb.transpose();
        gv.block(b * l, hh * dv, l, dv).noalias() = A.transpose() * gz;
        Eigen::VectorXd dots = (dA.array() * A.array()).rowwise().sum();
        dS = A.array() * (dA.array().colwise() - dots.array());
        dS *= inv_sqrt;
        gq.block(b * l, hh * dk, l, dk).noalias() = dS * kb;
        gk.block(b * l, hh * dk, l, dk).noalias() = dS.transpose() * qb;
      }
    }
    t.accumulate(iq, std::move(gq));
    t.accumulate(ik, std::move(gk));
    t.accumulate(iv, std::move(gv));
  };
  return push(std::move(n));
}

namespace {

// Sequences per working group in the fused attention node; keeps the
// projected activations of one group resident in cache.
constexpr Eigen::Index kAttentionGroup = 1;

struct AttentionShape {
  Eigen::Index batch, h, l, dk, dv;
  double inv_sqrt;
};

}  // namespace

Tape::Var Tape::self_attention(Var x, Var wq, Var bq, Var wk, Var bk, Var wv, Var bv, Var wo, Var bo,
                               std::size_t heads, std::size_t seq_len) {
  const Matrix& X = value(x);
  const Matrix& Wq = value(wq);
  const Matrix& Wk = value(wk);
  const Matrix& Wv = value(wv);
  const Matrix& Wo = value(wo);
  if (heads == 0 || seq_len == 0) shape_error("self_attention", "heads and seq_len must be positive");
  const auto h = static_cast<Eigen::Index>(heads);
  const auto l = static_cast<Eigen::Index>(seq_len);
  const Eigen::Index d = X.cols();
  if (X.rows() % l != 0) shape_error("self_attention", "rows must be a multiple of seq_len");
  if (Wq.rows() != d || Wk.rows() != d || Wv.rows() != d || Wq.cols() != Wk.cols() ||
      Wq.cols() % h != 0 || Wv.cols() % h != 0 || Wo.rows() != Wv.cols()) {
    shape_error("self_attention", "projection shapes wq " + shape_str(Wq) + ", wk " + shape_str(Wk) +
                                      ", wv " + shape_str(Wv) + ", wo " + shape_str(Wo) + " for x " +
                                      shape_str(X));
  }
  const Var biases[4] = {bq, bk, bv, bo};
  const Eigen::Index bias_cols[4] = {Wq.cols(), Wk.cols(), Wv.cols(), Wo.cols()};
  for (int i = 0; i < 4; ++i) {
    const Matrix& B = value(biases[i]);
    if (B.rows() != 1 || B.cols() != bias_cols[i]) shape_error("self_attention", "bias " + shape_str(B));
  }
  const AttentionShape s{X.rows() / l, h, l, Wq.cols() / h, Wv.cols() / h,
                         1.0 / std::sqrt(static_cast<double>(Wq.cols() / h))};

  Node n;
  n.op = "self_attention";
  n.value.resize(X.rows(), Wo.cols());
  n.attention.reserve(static_cast<std::size_t>(s.batch * h));
  const Matrix& Bq = value(bq);
  const Matrix& Bk = value(bk);
  const Matrix& Bv = value(bv);
  const Matrix& Bo = value(bo);
  Matrix Q, K, V, Z, scores(l, l);
  for (Eigen::Index g0 = 0; g0 < s.batch; g0 += kAttentionGroup) {
    const Eigen::Index gn = std::min(kAttentionGroup, s.batch - g0);
    const auto Xg = X.middleRows(g0 * l, gn * l);
    Q.noalias() = Xg * Wq;
    Q.rowwise() += Bq.row(0);
    K.noalias() = Xg * Wk;
    K.rowwise() += Bk.row(0);
    V.noalias() = Xg * Wv;
    V.rowwise() += Bv.row(0);
    Z.resize(gn * l, Wv.cols());
    for (Eigen::Index b = 0; b < gn; ++b) {
      for (Eigen::Index hh = 0; hh < h; ++hh) {
        scores.noalias() = Q.block(b * l, hh * s.dk, l, s.dk) * K.block(b * l, hh * s.dk, l, s.dk).transpose();
        scores *= s.inv_sqrt;
        Matrix weights = tsformer::softmax_rows(scores);
        Z.block(b * l, hh * s.dv, l, s.dv).noalias() = weights * V.block(b * l, hh * s.dv, l, s.dv);
        n.attention.push_back(std::move(weights));
      }
    }
    auto out = n.value.middleRows(g0 * l, gn * l);
    out.noalias() = Z * Wo;
    out.rowwise() += Bo.row(0);
  }

  const std::size_t ids[9] = {x.id, wq.id, bq.id, wk.id, bk.id, wv.id, bv.id, wo.id, bo.id};
  const std::size_t self = nodes_.size();
  n.back = [ids, self, s](Tape& t, const Matrix& G) {
    const Matrix& Xm = t.val(ids[0]);
    const Matrix& Wq = t.val(ids[1]);
    const Matrix& Bq = t.val(ids[2]);
    const Matrix& Wk = t.val(ids[3]);
    const Matrix& Bk = t.val(ids[4]);
    const Matrix& Wv = t.val(ids[5]);
    const Matrix& Bv = t.val(ids[6]);
    const Matrix& Wo = t.val(ids[7]);
    const auto& weights = t.nodes_[self].attention;
    const Eigen::Index l = s.l;

    Matrix gX(Xm.rows(), Xm.cols());
    Matrix gWq = Matrix::Zero(Wq.rows(), Wq.cols()), gWk = Matrix::Zero(Wk.rows(), Wk.cols());
    Matrix gWv = Matrix::Zero(Wv.rows(), Wv.cols()), gWo = Matrix::Zero(Wo.rows(), Wo.cols());
    Matrix gBq = Matrix::Zero(1, Wq.cols()), gBk = Matrix::Zero(1, Wk.cols());
    Matrix gBv = Matrix::Zero(1, Wv.cols()), gBo = Matrix::Zero(1, Wo.cols());
    Matrix Q, K, V, Z, gZ, gQ, gK, gV, dA(l, l), dS(l, l);
    for (Eigen::Index g0 = 0; g0 < s.batch; g0 += kAttentionGroup) {
      const Eigen::Index gn = std::min(kAttentionGroup, s.batch - g0);
      const auto Xg = Xm.middleRows(g0 * l, gn * l);
      const auto Gg = G.middleRows(g0 * l, gn * l);
      Q.noalias() = Xg * Wq;
      Q.rowwise() += Bq.row(0);
      K.noalias() = Xg * Wk;
      K.rowwise() += Bk.row(0);
      V.noalias() = Xg * Wv;
      V.rowwise() += Bv.row(0);
      Z.resize(gn * l, Wv.cols());
      for (Eigen::Index b = 0; b < gn; ++b) {
        for (Eigen::Index hh = 0; hh < s.h; ++hh) {
          const Matrix& A = weights[static_cast<std::size_t>((g0 + b) * s.h + hh)];
          Z.block(b * l, hh * s.dv, l, s.dv).noalias() = A * V.block(b * l, hh * s.dv, l, s.dv);
        }
      }
      gWo.noalias() += Z.transpose() * Gg;
      gBo += Gg.colwise().sum();
      gZ.noalias() = Gg * Wo.transpose();

      gQ.resize(Q.rows(), Q.cols());
      gK.resize(K.rows(), K.cols());
      gV.resize(V.rows(), V.cols());
      for (Eigen::Index b = 0; b < gn; ++b) {
        for (Eigen::Index hh = 0; hh < s.h; ++hh) {
          const Matrix& A = weights[static_cast<std::size_t>((g0 + b) * s.h + hh)];
          const auto gz = gZ.block(b * l, hh * s.dv, l, s.dv);
          const auto vb = V.block(b * l, hh * s.dv, l, s.dv);
          const auto qb = Q.block(b * l, hh * s.dk, l, s.dk);
          const auto kb = K.block(b * l, hh * s.dk, l, s.dk);
          dA.noalias() = gz * vb.transpose();
          gV.block(b * l, hh * s.dv, l, s.dv).noalias() = A.transpose() * gz;
          const Eigen::VectorXd dots = (dA.array() * A.array()).rowwise().sum();
          dS = A.array() * (dA.array().colwise() - dots.array());
          dS *= s.inv_sqrt;
          gQ.block(b * l, hh * s.dk, l, s.dk).noalias() = dS * kb;
          gK.block(b * l, hh * s.dk, l, s.dk).noalias() = dS.transpose() * qb;
        }
      }
      gWq.noalias() += Xg.transpose() * gQ;
      gWk.noalias() += Xg.transpose() * gK;
      gWv.noalias() += Xg.transpose() * gV;
      gBq += gQ.colwise().sum();
      gBk += gK.colwise().sum();
      gBv += gV.colwise().sum();
      auto gx = gX.middleRows(g0 * l, gn * l);
      gx.noalias() = gQ * Wq.transpose();
      gx.noalias() += gK * Wk.transpose();
      gx.noalias() += gV * Wv.transpose();
    }
    t.accumulate(ids[0], std::move(gX));
    t.accumulate(ids[1], std::move(gWq));
    t.accumulate(ids[2], std::move(gBq));
    t.accumulate(ids[3], std::move(gWk));
    t.accumulate(ids[4], std::move(gBk));
    t.accumulate(ids[5], std::move(gWv));
    t.accumulate(ids[6], std::move(gBv));
    t.accumulate(ids[7], std::move(gWo));
    t.accumulate(ids[8], std::move(gBo));
  };
  return push(std::move(n));
}

Tape::Var Tape::row_mean(Var a) {
  const Matrix& A = value(a);
  if (A.cols() == 0) shape_error("row_mean", "input has no columns");
  Node n;
  n.op = "row_mean";
  n.value = A.rowwise().mean();
  const std::size_t ia = a.id;
  const Eigen::Index cols = A.cols();
  n.back = [ia, cols](Tape& t, const Matrix& g) {
    Matrix gx = g.col(0).replicate(1, cols) / static_cast<double>(cols);
    t.accumulate(ia, std::move(gx));
  };
  return push(std::move(n));
}

Tape::Var Tape::reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  const Matrix& A = value(a);
  if (rows * cols != A.size()) {
    std::ostringstream os;
    os << shape_str(A) << " -> (" << rows << ", " << cols << ")";
    shape_error("reshape", os.str());
  }
  Node n;
  n.op = "reshape";
  n.value = Eigen::Map<const Matrix>(A.data(), rows, cols);
  const std::size_t ia = a.id;
  const Eigen::Index r0 = A.rows(), c0 = A.cols();
  n.back = [ia, r0, c0](Tape& t, const Matrix& g) {
    t.accumulate(ia, Matrix(Eigen::Map<const Matrix>(g.data(), r0, c0)));
  };
  return push(std::move(n));
}

Tape::Var Tape::sum(Var a) {
  const Matrix& A = value(a);
  Node n;
  n.op = "sum";
  n.value = Matrix::Constant(1, 1, A.sum());
  const std::size_t ia = a.id;
  const Eigen::Index r0 = A.rows(), c0 = A.cols();
  n.back = [ia, r0, c0](Tape& t, const Matrix& g) {
    t.accumulate(ia, Matrix(Matrix::Constant(r0, c0, g(0, 0))));
  };
  return push(std::move(n));
}

Tape::Var Tape::cross_entropy(Var probs, const Matrix& targets, double floor) {
  const Matrix& P = value(probs);
  if (P.rows() != targets.rows() || P.cols() != targets.cols() || P.rows() == 0) {
    shape_error("cross_entropy", "probs " + shape_str(P) + ", targets " + shape_str(targets));
  }
  const double inv_n = 1.0 / static_cast<double>(P.rows());
  double total = 0.0;
  for (Eigen::Index i = 0; i < P.size(); ++i) {
    const double t = targets.data()[i];
    if (t != 0.0) total -= t * std::log(std::max(P.data()[i], floor));
  }
  Node n;
  n.op = "cross_entropy";
  n.value = Matrix::Constant(1, 1, total * inv_n);
  const std::size_t ip = probs.id;
  n.back = [ip, targets, floor, inv_n](Tape& t, const Matrix& g) {
    const Matrix& Pm = t.val(ip);
    Matrix gp = Matrix::Zero(Pm.rows(), Pm.cols());
    for (Eigen::Index i = 0; i < Pm.size(); ++i) {
      const double q = Pm.data()[i];
      if (q > floor) gp.data()[i] = -targets.data()[i] / q * inv_n * g(0, 0);
    }
    t.accumulate(ip, std::move(gp));
  };
  return push(std::move(n));
}

void Tape::backward(Var output, const Matrix& upstream) {
  const Matrix& out = value(output);
  if (upstream.rows() != out.rows() || upstream.cols() != out.cols()) {
    throw ShapeError("backward: upstream " + shape_str(upstream) + " does not match output " +
                     shape_str(out));
  }
  for (auto& n : nodes_) n.adjoint.resize(0, 0);
  nodes_[output.id].adjoint = upstream;
  for (std::size_t i = output.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.adjoint.size() == 0) continue;
    if (n.param != nullptr) {
      n.param->gradient += n.adjoint;
    } else if (n.back) {
      // parents always have smaller ids, so n.adjoint is not touched here
      n.back(*this, n.adjoint);
    }
  }
}

}  // namespace tsformer
