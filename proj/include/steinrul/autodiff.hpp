#pragma once

// Minimal reverse-mode automatic differentiation over dense tensors.
//
// A Graph is a tape of nodes recorded in construction order, which is also a
// topological order. Building a node validates shapes immediately; values
// are computed lazily by forward(root), so leaves can be reassigned and the
// same graph re-evaluated (the finite-difference tests rely on this).
// backward(root) then fills the adjoint of every node up to root.
//
// A Graph is single-writer. Separate graphs share nothing and may be used
// from different threads.

#include <cstddef>
#include <string>
#include <vector>

#include "steinrul/tensor.hpp"

namespace steinrul {

enum class OpTag {
  kLeaf,
  kMatMul,
  kBiasAdd,
  kSigmoid,
  kConv2d,
  kAvgPoolRows,
  kReshape,
  kSlice,
  kAdd,
  kSub,
  kMul,
  kScale,
  kSum,
  kMean,
  kSquare,
  kLog,
  kExp,
  kSoftplus,
  kHuber,
  kGaussianLogDensity,
};

const char* op_name(OpTag op);

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the Graph lives.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Shape& shape() const;
  const Tensor& value() const;
  const Tensor& adjoint() const;
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  /// Differentiable input (a parameter).
  Var leaf(Tensor value);
  /// Input that never receives an adjoint (data, targets, masks, noise).
  Var constant(Tensor value);

  /// Replace a leaf's value; the shape must not change. Invalidates forward state.
  void set_value(Var leaf, Tensor value);

  /// Evaluate every node up to and including root. Throws NumericError when a
  /// node produces NaN/Inf.
  const Tensor& forward(Var root);

  /// Populate adjoints of root (which must be a scalar) with respect to every
  /// node recorded before it. Requires a prior forward(root).
  void backward(Var root);

  const Tensor& value(Var v) const;
  const Tensor& adjoint(Var v) const;
  const Shape& shape(Var v) const { return node(v).shape; }
  OpTag op(Var v) const { return node(v).op; }
  bool requires_grad(Var v) const { return node(v).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Operators. Shape errors are raised here, naming the operator and shapes.
  Var matmul(Var a, Var b);
  Var bias_add(Var x, Var bias);
  Var sigmoid(Var x);
  Var conv2d(Var x, Var weight, Var bias);
  Var avg_pool_rows(Var x, std::size_t window);
  Var reshape(Var x, Shape shape);
  Var slice(Var x, std::size_t offset, Shape shape);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var x, double factor);
  Var sum(Var x);
  Var mean(Var x);
  Var square(Var x);
  Var log(Var x);
  Var exp(Var x);
  Var softplus(Var x);
  Var huber(Var prediction, Var target, double delta);
  Var gaussian_log_density(Var x, Var mean, Var stddev);

 private:
  struct Node {
    OpTag op = OpTag::kLeaf;
    std::vector<std::size_t> inputs;
    Shape shape;
    Tensor value;
    Tensor adjoint;
    bool requires_grad = false;
    double scalar = 0.0;        // scale factor / huber delta
    std::size_t index = 0;      // slice offset / pool window
  };

  const Node& node(Var v) const;
  Node& node(Var v);
  Var push(OpTag op, std::vector<std::size_t> inputs, Shape shape, double scalar = 0.0,
           std::size_t index = 0);
  void check_owner(Var v) const;
  void eval_node(std::size_t id);
  void backprop_node(std::size_t id);

  std::vector<Node> nodes_;
  // Number of leading nodes whose values are current; 0 forces re-evaluation.
  std::size_t evaluated_ = 0;
};

// Free-function spelling so model code reads as expressions.
inline Var matmul(Var a, Var b) { return a.graph->matmul(a, b); }
inline Var bias_add(Var x, Var b) { return x.graph->bias_add(x, b); }
inline Var sigmoid(Var x) { return x.graph->sigmoid(x); }
inline Var conv2d(Var x, Var w, Var b) { return x.graph->conv2d(x, w, b); }
inline Var avg_pool_rows(Var x, std::size_t window) { return x.graph->avg_pool_rows(x, window); }
inline Var reshape(Var x, Shape s) { return x.graph->reshape(x, std::move(s)); }
inline Var slice(Var x, std::size_t offset, Shape s) {
  return x.graph->slice(x, offset, std::move(s));
}
inline Var sum(Var x) { return x.graph->sum(x); }
inline Var mean(Var x) { return x.graph->mean(x); }
inline Var square(Var x) { return x.graph->square(x); }
inline Var log(Var x) { return x.graph->log(x); }
inline Var exp(Var x) { return x.graph->exp(x); }
inline Var softplus(Var x) { return x.graph->softplus(x); }
inline Var scale(Var x, double c) { return x.graph->scale(x, c); }
inline Var huber(Var p, Var t, double delta) { return p.graph->huber(p, t, delta); }
inline Var gaussian_log_density(Var x, Var mu, Var sigma) {
  return x.graph->gaussian_log_density(x, mu, sigma);
}
inline Var operator+(Var a, Var b) { return a.graph->add(a, b); }
inline Var operator-(Var a, Var b) { return a.graph->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.graph->mul(a, b); }
inline Var operator*(double c, Var x) { return x.graph->scale(x, c); }

/// Numerically stable scalar helpers shared with the trainers.
double sigmoid(double x);
double softplus(double x);

}  // namespace steinrul
