#include "rf/nn/graph.hpp"

#include <algorithm>
#include <cmath>

namespace rf::nn {
namespace {

using Array = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_broadcast(const Matrix& a, const Matrix& b, const char* op) {
  const bool same = a.rows() == b.rows() && a.cols() == b.cols();
  const bool bcast = a.cols() == b.cols() && (a.rows() == 1 || b.rows() == 1);
  if (!same && !bcast) throw Error(Errc::ShapeMismatch, std::string(op) + ": incompatible shapes");
}

// Expand a 1-row operand to `rows` rows.
Matrix expand(const Matrix& m, Eigen::Index rows) {
  if (m.rows() == rows) return m;
  return m.replicate(rows, 1);
}

// Gradient of a broadcast operand: fold the rows back if it was expanded.
template <class Expr>
void accumulate_reduced(Graph& g, Var v, const Expr& grad) {
  if (!g.needs_grad(v)) return;
  if (v.rows() == grad.rows()) {
    g.accumulate(v, grad);
  } else {
    g.accumulate(v, Matrix(grad.colwise().sum()));
  }
}


}  // namespace

Var Graph::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::input(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = record_;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::param(Parameter& p) {
  Node n;
  n.param = &p;
  n.needs_grad = record_;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::make(Matrix value, std::initializer_list<Var> parents, Backward fn) {
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (Var p : parents) n.needs_grad = n.needs_grad || nodes_[p.id()].needs_grad;
    if (n.needs_grad) n.backward = std::move(fn);
  }
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Graph::backward(Var loss) {
  if (!record_ || swept_ || nodes_.empty())
    throw Error(Errc::NoRecordedGraph, "no recorded forward pass to differentiate");
  const Matrix& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1) throw Error(Errc::ShapeMismatch, "loss must be 1x1");
  swept_ = true;
  if (!nodes_[loss.id()].needs_grad) return;
  nodes_[loss.id()].grad = Matrix::Ones(1, 1);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0) continue;
    if (n.backward) {
      n.backward(*this, n.grad);
      n.backward = nullptr;
      n.grad.resize(0, 0);  // intermediate gradients are not kept
    } else if (n.param) {
      if (n.param->grad.size() == 0)
        n.param->grad = n.grad;
      else
        n.param->grad += n.grad;
    }
  }
}

namespace {

namespace ei = Eigen::internal;
using Packet = ei::packet_traits<double>::type;
constexpr Eigen::Index kPacket = ei::packet_traits<double>::size;

// Each output element is a plain k-ordered fma chain, so a row's result does
// not depend on how many other rows share the call. Eigen's GEMM/GEMV choose
// kernels by shape and can differ in the last bit.
template <int R, int NP>
void row_tile(const double* x, Eigen::Index ldx, const double* w, Eigen::Index ldw, Eigen::Index k, double* out,
              Eigen::Index ldo) {
  Packet acc[R][NP];
  for (int r = 0; r < R; ++r)
    for (int p = 0; p < NP; ++p) acc[r][p] = ei::pset1<Packet>(0.0);
  for (Eigen::Index kk = 0; kk < k; ++kk) {
    Packet wv[NP];
    for (int p = 0; p < NP; ++p) wv[p] = ei::ploadu<Packet>(w + kk * ldw + p * kPacket);
    for (int r = 0; r < R; ++r) {
      const Packet a = ei::pset1<Packet>(x[r * ldx + kk]);
      for (int p = 0; p < NP; ++p) acc[r][p] = ei::pmadd(a, wv[p], acc[r][p]);
    }
  }
  for (int r = 0; r < R; ++r)
    for (int p = 0; p < NP; ++p) ei::pstoreu(out + r * ldo + p * kPacket, acc[r][p]);
}

template <int R>
void row_block(const double* x, Eigen::Index k, const double* w, Eigen::Index n, double* out) {
  Eigen::Index j = 0;
  for (; j + 3 * kPacket <= n; j += 3 * kPacket) row_tile<R, 3>(x, k, w + j, n, k, out + j, n);
  for (; j + kPacket <= n; j += kPacket) row_tile<R, 1>(x, k, w + j, n, k, out + j, n);
  for (; j < n; ++j)
    for (int r = 0; r < R; ++r) {
      double s = 0.0;
      for (Eigen::Index kk = 0; kk < k; ++kk) s = std::fma(x[r * k + kk], w[kk * n + j], s);
      out[r * n + j] = s;
    }
}

Matrix row_invariant_product(const Matrix& x, const Matrix& w) {
  const Eigen::Index m = x.rows(), k = x.cols(), n = w.cols();
  Matrix out(m, n);
  Eigen::Index i = 0;
  for (; i + 6 <= m; i += 6) row_block<6>(x.data() + i * k, k, w.data(), n, out.data() + i * n);
  for (; i < m; ++i) row_block<1>(x.data() + i * k, k, w.data(), n, out.data() + i * n);
  return out;
}

// Training uses Eigen's faster GEMM; inference needs batch-size invariance.
Matrix product(const Graph& g, const Matrix& x, const Matrix& w) {
  if (!g.recording()) return row_invariant_product(x, w);
  Matrix out(x.rows(), w.cols());
  out.noalias() = x * w;
  return out;
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = a.graph();
  if (a.cols() != b.rows()) throw Error(Errc::ShapeMismatch, "matmul: inner dimensions differ");
  Matrix out = product(g, a.value(), b.value());
  return g.make(std::move(out), {a, b}, [a, b](Graph& g, const Matrix& og) {
    if (g.needs_grad(a)) g.accumulate(a, og * b.value().transpose());
    if (g.needs_grad(b)) g.accumulate(b, a.value().transpose() * og);
  });
}

Var linear(Var x, Var w, Var b) {
  Graph& g = x.graph();
  if (x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols())
    throw Error(Errc::ShapeMismatch, "linear: shape mismatch");
  Matrix out = product(g, x.value(), w.value());
  out.rowwise() += b.value().row(0);
  return g.make(std::move(out), {x, w, b}, [x, w, b](Graph& g, const Matrix& og) {
    if (g.needs_grad(x)) g.accumulate(x, og * w.value().transpose());
    if (g.needs_grad(w)) g.accumulate(w, x.value().transpose() * og);
    if (g.needs_grad(b)) g.accumulate(b, Matrix(og.colwise().sum()));
  });
}

namespace {

// a (op) b where either side may be a single row broadcast over the other.
template <class Op>
Matrix broadcast(const Matrix& a, const Matrix& b, Op op) {
  if (a.rows() == b.rows()) return op(a.array(), b.array()).matrix();
  Matrix out(std::max(a.rows(), b.rows()), a.cols());
  if (b.rows() == 1) {
    for (Eigen::Index r = 0; r < out.rows(); ++r) out.row(r) = op(a.row(r).array(), b.row(0).array()).matrix();
  } else {
    for (Eigen::Index r = 0; r < out.rows(); ++r) out.row(r) = op(a.row(0).array(), b.row(r).array()).matrix();
  }
  return out;
}

}  // namespace

Var add(Var a, Var b) {
  check_broadcast(a.value(), b.value(), "add");
  Matrix out = broadcast(a.value(), b.value(), [](const auto& x, const auto& y) { return x + y; });
  return a.graph().make(std::move(out), {a, b}, [a, b](Graph& g, const Matrix& og) {
    accumulate_reduced(g, a, og);
    accumulate_reduced(g, b, og);
  });
}

Var sub(Var a, Var b) {
  check_broadcast(a.value(), b.value(), "sub");
  Matrix out = broadcast(a.value(), b.value(), [](const auto& x, const auto& y) { return x - y; });
  return a.graph().make(std::move(out), {a, b}, [a, b](Graph& g, const Matrix& og) {
    accumulate_reduced(g, a, og);
    if (g.needs_grad(b)) accumulate_reduced(g, b, Matrix(-og));
  });
}

Var mul(Var a, Var b) {
  check_broadcast(a.value(), b.value(), "mul");
  const auto times = [](const auto& x, const auto& y) { return x * y; };
  Matrix out = broadcast(a.value(), b.value(), times);
  return a.graph().make(std::move(out), {a, b}, [a, b, times](Graph& g, const Matrix& og) {
    if (g.needs_grad(a)) accumulate_reduced(g, a, broadcast(og, b.value(), times));
    if (g.needs_grad(b)) accumulate_reduced(g, b, broadcast(og, a.value(), times));
  });
}

Var scale(Var a, double s) {
  Matrix out = a.value() * s;
  return a.graph().make(std::move(out), {a},
                        [a, s](Graph& g, const Matrix& og) { g.accumulate(a, og * s); });
}

Var add_scalar(Var a, double s) {
  Matrix out = a.value().array() + s;
  return a.graph().make(std::move(out), {a}, [a](Graph& g, const Matrix& og) { g.accumulate(a, og); });
}

namespace {
// 1 / (1 + e^-x) with a vectorized exp; saturates cleanly to 0 or 1. The
// tail goes through a padded packet so every element takes the same path.
Matrix logistic(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  const double* in = x.data();
  double* o = out.data();
  const Eigen::Index n = x.size();
  const Packet one = ei::pset1<Packet>(1.0);
  auto f = [&](Packet v) { return ei::pdiv(one, ei::padd(one, ei::pexp(ei::pnegate(v)))); };
  Eigen::Index i = 0;
  for (; i + kPacket <= n; i += kPacket) ei::pstoreu(o + i, f(ei::ploadu<Packet>(in + i)));
  if (i < n) {
    alignas(64) double buf[kPacket] = {};
    std::copy(in + i, in + n, buf);
    ei::pstore(buf, f(ei::pload<Packet>(buf)));
    std::copy(buf, buf + (n - i), o + i);
  }
  return out;
}
}  // namespace

Var silu(Var a) {
  Matrix sig = logistic(a.value());
  Matrix out = a.value().cwiseProduct(sig);
  return a.graph().make(std::move(out), {a}, [a, sig = std::move(sig)](Graph& g, const Matrix& og) {
    const auto s = sig.array();
    g.accumulate(a, Matrix(og.array() * s * (1.0 + a.value().array() * (1.0 - s))));
  });
}

Var sigmoid(Var a) {
  Matrix out = logistic(a.value());
  return a.graph().make(out, {a}, [a, s = out](Graph& g, const Matrix& og) {
    g.accumulate(a, Matrix(og.array() * s.array() * (1.0 - s.array())));
  });
}

Var tanh(Var a) {
  Matrix out = a.value().array().tanh();
  return a.graph().make(out, {a}, [a, t = out](Graph& g, const Matrix& og) {
    g.accumulate(a, Matrix(og.array() * (1.0 - t.array().square())));
  });
}

Var softplus(Var a) {
  const Matrix& x = a.value();
  Matrix out = x.unaryExpr([](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); });
  return a.graph().make(std::move(out), {a}, [a](Graph& g, const Matrix& og) {
    g.accumulate(a, Matrix(og.array() * logistic(a.value()).array()));
  });
}

Var clamp_gc(Var a, double lo, double hi) {
  Matrix out = a.value().cwiseMax(lo).cwiseMin(hi);
  return a.graph().make(std::move(out), {a}, [a](Graph& g, const Matrix& og) { g.accumulate(a, og); });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  const Matrix& v = x.value();
  const Eigen::Index n = v.cols();
  if (gain.cols() != n || bias.cols() != n || gain.rows() != 1 || bias.rows() != 1)
    throw Error(Errc::ShapeMismatch, "layer_norm: gain/bias width mismatch");
  Eigen::VectorXd inv_std(v.rows());
  Matrix xhat(v.rows(), n);
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    const double mu = v.row(r).mean();
    const double var = (v.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (v.row(r).array() - mu) * inv_std(r);
  }
  Matrix out = xhat.array().rowwise() * gain.value().row(0).array();
  out.rowwise() += bias.value().row(0);
  return x.graph().make(
      std::move(out), {x, gain, bias},
      [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph& g, const Matrix& og) {
        if (g.needs_grad(gain)) g.accumulate(gain, Matrix(og.cwiseProduct(xhat).colwise().sum()));
        if (g.needs_grad(bias)) g.accumulate(bias, Matrix(og.colwise().sum()));
        if (g.needs_grad(x)) {
          Matrix dxhat = og.array().rowwise() * gain.value().row(0).array();
          Matrix dx(dxhat.rows(), dxhat.cols());
          for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
            const double m1 = dxhat.row(r).mean();
            const double m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
            dx.row(r) = inv_std(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
          }
          g.accumulate(x, dx);
        }
      });
}

Var norm_hist(Var a) {
  const Matrix& x = a.value();
  Eigen::VectorXd totals = x.rowwise().sum();
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    if (totals(r) > 0.0)
      out.row(r) = x.row(r) / totals(r);
    else
      out.row(r).setConstant(1.0 / static_cast<double>(x.cols()));  // degenerate row: uniform
  }
  return a.graph().make(out, {a}, [a, y = out, totals](Graph& g, const Matrix& og) {
    Matrix dx(og.rows(), og.cols());
    for (Eigen::Index r = 0; r < og.rows(); ++r) {
      if (!(totals(r) > 0.0)) {
        dx.row(r).setZero();
        continue;
      }
      const double dot = og.row(r).dot(y.row(r));
      dx.row(r) = (og.row(r).array() - dot) / totals(r);
    }
    g.accumulate(a, dx);
  });
}

Var concat_cols(Var a, Var b) {
  const Eigen::Index rows = std::max(a.rows(), b.rows());
  if ((a.rows() != rows && a.rows() != 1) || (b.rows() != rows && b.rows() != 1))
    throw Error(Errc::ShapeMismatch, "concat_cols: row counts differ");
  Matrix out(rows, a.cols() + b.cols());
  out.leftCols(a.cols()) = expand(a.value(), rows);
  out.rightCols(b.cols()) = expand(b.value(), rows);
  return a.graph().make(std::move(out), {a, b}, [a, b](Graph& g, const Matrix& og) {
    accumulate_reduced(g, a, Matrix(og.leftCols(a.cols())));
    accumulate_reduced(g, b, Matrix(og.rightCols(b.cols())));
  });
}

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.graph().make(std::move(out), {a}, [a](Graph& g, const Matrix& og) {
    g.accumulate(a, Matrix::Constant(a.rows(), a.cols(), og(0, 0)));
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  Matrix out(1, 1);
  out(0, 0) = a.value().sum() / n;
  return a.graph().make(std::move(out), {a}, [a, n](Graph& g, const Matrix& og) {
    g.accumulate(a, Matrix::Constant(a.rows(), a.cols(), og(0, 0) / n));
  });
}

}  // namespace rf::nn
