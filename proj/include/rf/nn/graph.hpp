#pragma once

#include <Eigen/Dense>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

#include "rf/error.hpp"

namespace rf::nn {

/// Row-major so that each row is one sample (voxel) and each column a feature.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Trainable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Graph;

/// Handle to a node recorded on a Graph. Cheap to copy; valid while the
/// graph lives.
class Var {
 public:
  Var() = default;

  bool valid() const { return graph_ != nullptr; }
  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  const Matrix& value() const;
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }

 private:
  friend class Graph;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Tape for one forward pass. Nodes are appended in evaluation order and
/// `backward` walks them in reverse. With recording off the graph only
/// evaluates values (inference).
class Graph {
 public:
  using Backward = std::function<void(Graph&, const Matrix& out_grad)>;

  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return record_; }

  /// Leaf that never receives a gradient.
  Var constant(Matrix value);
  /// Differentiable leaf; its gradient is readable after backward.
  Var input(Matrix value);
  /// Leaf bound to a parameter; backward adds into p.grad.
  Var param(Parameter& p);

  /// Records an op output. `fn` runs during backward only if some parent
  /// needs a gradient.
  Var make(Matrix value, std::initializer_list<Var> parents, Backward fn);

  bool needs_grad(Var v) const { return nodes_[v.id()].needs_grad; }

  template <class Expr>
  void accumulate(Var v, const Expr& g) {
    Node& n = nodes_[v.id()];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0)
      n.grad = g;
    else
      n.grad += g;
  }

  /// Reverse sweep from a 1x1 loss. A graph can be swept once.
  void backward(Var loss);

  const Matrix& value(Var v) const {
    const Node& n = nodes_[v.id()];
    return n.param ? n.param->value : n.value;
  }
  const Matrix& grad(Var v) const { return nodes_[v.id()].grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };

  std::vector<Node> nodes_;
  bool record_;
  bool swept_ = false;
};

inline const Matrix& Var::value() const { return graph_->value(*this); }
inline const Matrix& Var::grad() const { return graph_->grad(*this); }

// ---------------------------------------------------------------------------
// Differentiable ops. Binary elementwise ops broadcast a 1-row operand over
// the rows of the other.

Var matmul(Var a, Var b);
/// x W + b, with b a 1-row bias.
Var linear(Var x, Var w, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);

Var silu(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var softplus(Var a);
/// Forward clamps into [lo, hi]; backward passes the gradient through
/// unchanged, i.e. x + (clamp(x) - x) with the bracket detached.
Var clamp_gc(Var a, double lo, double hi);
/// Row-wise layer normalization with learnable gain and bias (1-row each).
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
/// Row-wise x / sum(x).
Var norm_hist(Var a);
Var concat_cols(Var a, Var b);

Var sum(Var a);
Var mean(Var a);

}  // namespace rf::nn
