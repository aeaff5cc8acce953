#include "steinrul/autodiff.hpp"

#include <cmath>
#include <numbers>

#include "steinrul/error.hpp"
#include "steinrul/kernels.hpp"

namespace steinrul {

const char* op_name(OpTag op) {
  switch (op) {
    case OpTag::kLeaf: return "leaf";
    case OpTag::kMatMul: return "matmul";
    case OpTag::kBiasAdd: return "bias_add";
    case OpTag::kSigmoid: return "sigmoid";
    case OpTag::kConv2d: return "conv2d";
    case OpTag::kAvgPoolRows: return "avg_pool_rows";
    case OpTag::kReshape: return "reshape";
    case OpTag::kSlice: return "slice";
    case OpTag::kAdd: return "add";
    case OpTag::kSub: return "sub";
    case OpTag::kMul: return "mul";
    case OpTag::kScale: return "scale";
    case OpTag::kSum: return "sum";
    case OpTag::kMean: return "mean";
    case OpTag::kSquare: return "square";
    case OpTag::kLog: return "log";
    case OpTag::kExp: return "exp";
    case OpTag::kSoftplus: return "softplus";
    case OpTag::kHuber: return "huber";
    case OpTag::kGaussianLogDensity: return "gaussian_log_density";
  }
  return "?";
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

const Shape& Var::shape() const { return graph->shape(*this); }
const Tensor& Var::value() const { return graph->value(*this); }
const Tensor& Var::adjoint() const { return graph->adjoint(*this); }

namespace {

[[noreturn]] void shape_mismatch(OpTag op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op_name(op)) + ": incompatible shapes " + shape_string(a) +
                   " and " + shape_string(b));
}

[[noreturn]] void bad_rank(OpTag op, const Shape& a, std::size_t want) {
  throw ShapeError(std::string(op_name(op)) + ": expected rank " + std::to_string(want) +
                   ", got " + shape_string(a));
}

}  // namespace

const Graph::Node& Graph::node(Var v) const {
  check_owner(v);
  return nodes_[v.id];
}

Graph::Node& Graph::node(Var v) {
  check_owner(v);
  return nodes_[v.id];
}

void Graph::check_owner(Var v) const {
  if (v.graph != this || v.id >= nodes_.size()) {
    throw UsageError("variable does not belong to this graph");
  }
}

Var Graph::leaf(Tensor value) {
  Node n;
  n.shape = value.shape();
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Graph::constant(Tensor value) {
  Var v = leaf(std::move(value));
  nodes_[v.id].requires_grad = false;
  return v;
}

void Graph::set_value(Var v, Tensor value) {
  Node& n = node(v);
  if (n.op != OpTag::kLeaf) throw UsageError("set_value on non-leaf node");
  if (value.shape() != n.shape) shape_mismatch(OpTag::kLeaf, n.shape, value.shape());
  n.value = std::move(value);
  evaluated_ = 0;
}

Var Graph::push(OpTag op, std::vector<std::size_t> inputs, Shape shape, double scalar,
                std::size_t index) {
  Node n;
  n.op = op;
  n.shape = std::move(shape);
  n.scalar = scalar;
  n.index = index;
  for (auto i : inputs) n.requires_grad = n.requires_grad || nodes_[i].requires_grad;
  n.inputs = std::move(inputs);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

const Tensor& Graph::value(Var v) const {
  const Node& n = node(v);
  if (n.op != OpTag::kLeaf && v.id >= evaluated_) {
    throw UsageError(std::string("value of ") + op_name(n.op) + " node read before forward");
  }
  return n.value;
}

const Tensor& Graph::adjoint(Var v) const {
  const Node& n = node(v);
  if (n.adjoint.size() == 0) throw UsageError("adjoint read before backward");
  return n.adjoint;
}

// ---------------------------------------------------------------------------
// Node construction (shape inference)

Var Graph::matmul(Var a, Var b) {
  const Shape& sa = node(a).shape;
  const Shape& sb = node(b).shape;
  if (sa.size() != 2) bad_rank(OpTag::kMatMul, sa, 2);
  if (sb.size() != 2) bad_rank(OpTag::kMatMul, sb, 2);
  if (sa[1] != sb[0]) shape_mismatch(OpTag::kMatMul, sa, sb);
  return push(OpTag::kMatMul, {a.id, b.id}, {sa[0], sb[1]});
}

Var Graph::bias_add(Var x, Var bias) {
  const Shape& sx = node(x).shape;
  const Shape& sb = node(bias).shape;
  if (sx.size() != 2) bad_rank(OpTag::kBiasAdd, sx, 2);
  if (sb.size() != 1 || sb[0] != sx[1]) shape_mismatch(OpTag::kBiasAdd, sx, sb);
  return push(OpTag::kBiasAdd, {x.id, bias.id}, sx);
}

Var Graph::sigmoid(Var x) { return push(OpTag::kSigmoid, {x.id}, node(x).shape); }

Var Graph::conv2d(Var x, Var weight, Var bias) {
  const Shape& sx = node(x).shape;
  const Shape& sw = node(weight).shape;
  const Shape& sb = node(bias).shape;
  if (sx.size() != 4) bad_rank(OpTag::kConv2d, sx, 4);
  if (sw.size() != 4) bad_rank(OpTag::kConv2d, sw, 4);
  if (sw[1] != sx[1] || sw[2] > sx[2] || sw[3] > sx[3]) shape_mismatch(OpTag::kConv2d, sx, sw);
  if (sb.size() != 1 || sb[0] != sw[0]) shape_mismatch(OpTag::kConv2d, sw, sb);
  return push(OpTag::kConv2d, {x.id, weight.id, bias.id},
              {sx[0], sw[0], sx[2] - sw[2] + 1, sx[3] - sw[3] + 1});
}

Var Graph::avg_pool_rows(Var x, std::size_t window) {
  const Shape& sx = node(x).shape;
  if (sx.size() != 4) bad_rank(OpTag::kAvgPoolRows, sx, 4);
  if (window == 0 || sx[2] / window == 0) {
    throw ShapeError("avg_pool_rows: window " + std::to_string(window) + " too large for " +
                     shape_string(sx));
  }
  return push(OpTag::kAvgPoolRows, {x.id}, {sx[0], sx[1], sx[2] / window, sx[3]}, 0.0, window);
}

Var Graph::reshape(Var x, Shape shape) {
  const Shape& sx = node(x).shape;
  if (shape_size(shape) != shape_size(sx)) shape_mismatch(OpTag::kReshape, sx, shape);
  return push(OpTag::kReshape, {x.id}, std::move(shape));
}

Var Graph::slice(Var x, std::size_t offset, Shape shape) {
  const Shape& sx = node(x).shape;
  if (offset + shape_size(shape) > shape_size(sx)) shape_mismatch(OpTag::kSlice, sx, shape);
  return push(OpTag::kSlice, {x.id}, std::move(shape), 0.0, offset);
}

Var Graph::add(Var a, Var b) {
  if (node(a).shape != node(b).shape) shape_mismatch(OpTag::kAdd, node(a).shape, node(b).shape);
  return push(OpTag::kAdd, {a.id, b.id}, node(a).shape);
}

Var Graph::sub(Var a, Var b) {
  if (node(a).shape != node(b).shape) shape_mismatch(OpTag::kSub, node(a).shape, node(b).shape);
  return push(OpTag::kSub, {a.id, b.id}, node(a).shape);
}

Var Graph::mul(Var a, Var b) {
  if (node(a).shape != node(b).shape) shape_mismatch(OpTag::kMul, node(a).shape, node(b).shape);
  return push(OpTag::kMul, {a.id, b.id}, node(a).shape);
}

Var Graph::scale(Var x, double factor) {
  return push(OpTag::kScale, {x.id}, node(x).shape, factor);
}

Var Graph::sum(Var x) { return push(OpTag::kSum, {x.id}, {1}); }
Var Graph::mean(Var x) { return push(OpTag::kMean, {x.id}, {1}); }
Var Graph::square(Var x) { return push(OpTag::kSquare, {x.id}, node(x).shape); }
Var Graph::log(Var x) { return push(OpTag::kLog, {x.id}, node(x).shape); }
Var Graph::exp(Var x) { return push(OpTag::kExp, {x.id}, node(x).shape); }
Var Graph::softplus(Var x) { return push(OpTag::kSoftplus, {x.id}, node(x).shape); }

Var Graph::huber(Var prediction, Var target, double delta) {
  if (!(delta > 0.0)) throw ConfigError("huber: delta must be positive");
  const Shape& sp = node(prediction).shape;
  const Shape& st = node(target).shape;
  if (sp != st) shape_mismatch(OpTag::kHuber, sp, st);
  return push(OpTag::kHuber, {prediction.id, target.id}, {1}, delta);
}

Var Graph::gaussian_log_density(Var x, Var mean, Var stddev) {
  const Shape& sx = node(x).shape;
  if (node(mean).shape != sx) shape_mismatch(OpTag::kGaussianLogDensity, sx, node(mean).shape);
  if (node(stddev).shape != sx) shape_mismatch(OpTag::kGaussianLogDensity, sx, node(stddev).shape);
  return push(OpTag::kGaussianLogDensity, {x.id, mean.id, stddev.id}, {1});
}

// ---------------------------------------------------------------------------
// Evaluation

const Tensor& Graph::forward(Var root) {
  check_owner(root);
  for (std::size_t id = evaluated_; id <= root.id; ++id) {
    if (nodes_[id].op == OpTag::kLeaf) {
      if (!nodes_[id].value.all_finite()) throw NumericError("non-finite value in leaf input");
      continue;
    }
    eval_node(id);
    if (!nodes_[id].value.all_finite()) {
      throw NumericError(std::string("numeric overflow: ") + op_name(nodes_[id].op) +
                         " produced a non-finite value");
    }
  }
  evaluated_ = std::max(evaluated_, root.id + 1);
  return nodes_[root.id].value;
}

void Graph::eval_node(std::size_t id) {
  Node& n = nodes_[id];
  auto in = [&](std::size_t k) -> const Tensor& { return nodes_[n.inputs[k]].value; };
  Tensor out(n.shape);
  double* y = out.data();
  const std::size_t count = out.size();

  switch (n.op) {
    case OpTag::kLeaf:
      return;
    case OpTag::kMatMul: {
      const Tensor& a = in(0);
      kernels::matmul(a.values(), in(1).values(), out.values(), a.dim(0), a.dim(1), n.shape[1]);
      break;
    }
    case OpTag::kBiasAdd: {
      const Tensor& x = in(0);
      const Tensor& b = in(1);
      const std::size_t cols = n.shape[1];
      for (std::size_t i = 0; i < count; ++i) y[i] = x[i] + b[i % cols];
      break;
    }
    case OpTag::kSigmoid: {
      const Tensor& x = in(0);
      for (std::size_t i = 0; i < count; ++i) y[i] = steinrul::sigmoid(x[i]);
      break;
    }
    case OpTag::kConv2d: {
      const Tensor& x = in(0);
      const Tensor& w = in(1);
      kernels::ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2), w.dim(3)};
      kernels::conv2d(x.values(), w.values(), in(2).values(), out.values(), g);
      break;
    }
    case OpTag::kAvgPoolRows: {
      const Tensor& x = in(0);
      const std::size_t k = n.index;
      const std::size_t planes = n.shape[0] * n.shape[1];
      const std::size_t oh = n.shape[2], w = n.shape[3], h = x.dim(2);
      for (std::size_t p = 0; p < planes; ++p) {
        for (std::size_t r = 0; r < oh; ++r) {
          for (std::size_t c = 0; c < w; ++c) {
            double acc = 0.0;
            for (std::size_t t = 0; t < k; ++t) acc += x[(p * h + r * k + t) * w + c];
            y[(p * oh + r) * w + c] = acc / static_cast<double>(k);
          }
        }
      }
      break;
    }
    case OpTag::kReshape: {
      const Tensor& x = in(0);
      std::copy(x.data(), x.data() + count, y);
      break;
    }
    case OpTag::kSlice: {
      const Tensor& x = in(0);
      std::copy(x.data() + n.index, x.data() + n.index + count, y);
      break;
    }
    case OpTag::kAdd: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      for (std::size_t i = 0; i < count; ++i) y[i] = a[i] + b[i];
      break;
    }
    case OpTag::kSub: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      for (std::size_t i = 0; i < count; ++i) y[i] = a[i] - b[i];
      break;
    }
    case OpTag::kMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      for (std::size_t i = 0; i < count; ++i) y[i] = a[i] * b[i];
      break;
    }
    case OpTag::kScale: {
      const Tensor& x = in(0);
      for (std::size_t i = 0; i < count; ++i) y[i] = n.scalar * x[i];
      break;
    }
    case OpTag::kSum:
    case OpTag::kMean: {
      const Tensor& x = in(0);
      double acc = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) acc += x[i];
      y[0] = n.op == OpTag::kSum ? acc : acc / static_cast<double>(x.size());
      break;
    }
    case OpTag::kSquare: {
      const Tensor& x = in(0);
      for (std::size_t i = 0; i < count; ++i) y[i] = x[i] * x[i];
      break;
    }
    case OpTag::kLog: {
      const Tensor& x = in(0);
      for (std::size_t i = 0; i < count; ++i) y[i] = std::log(x[i]);
      break;
    }
    case OpTag::kExp: {
      const Tensor& x = in(0);
      for (std::size_t i = 0; i < count; ++i) y[i] = std::exp(x[i]);
      break;
    }
    case OpTag::kSoftplus: {
      const Tensor& x = in(0);
      for (std::size_t i = 0; i < count; ++i) y[i] = steinrul::softplus(x[i]);
      break;
    }
    case OpTag::kHuber: {
      const Tensor& p = in(0);
      const Tensor& t = in(1);
      const double delta = n.scalar;
      double acc = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double r = std::abs(p[i] - t[i]);
        acc += r <= delta ? 0.5 * r * r : delta * (r - 0.5 * delta);
      }
      y[0] = acc;
      break;
    }
    case OpTag::kGaussianLogDensity: {
      const Tensor& x = in(0);
      const Tensor& mu = in(1);
      const Tensor& sd = in(2);
      const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
      double acc = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double z = (x[i] - mu[i]) / sd[i];
        acc += -half_log_2pi - std::log(sd[i]) - 0.5 * z * z;
      }
      y[0] = acc;
      break;
    }
  }
  n.value = std::move(out);
}

void Graph::backward(Var root) {
  check_owner(root);
  if (root.id >= evaluated_) throw UsageError("backward called before forward");
  Node& r = nodes_[root.id];
  if (shape_size(r.shape) != 1) {
    throw UsageError("backward requires a scalar root, got " + shape_string(r.shape));
  }
  for (std::size_t id = 0; id <= root.id; ++id) {
    Node& n = nodes_[id];
    if (n.adjoint.shape() != n.shape) {
      n.adjoint = Tensor(n.shape);
    } else {
      n.adjoint.fill(0.0);
    }
  }
  r.adjoint[0] = 1.0;
  for (std::size_t id = root.id + 1; id-- > 0;) {
    if (nodes_[id].op != OpTag::kLeaf && nodes_[id].requires_grad) backprop_node(id);
  }
}

void Graph::backprop_node(std::size_t id) {
  Node& n = nodes_[id];
  const Tensor& dy = n.adjoint;
  const std::size_t count = dy.size();
  auto in_node = [&](std::size_t k) -> Node& { return nodes_[n.inputs[k]]; };
  auto wants = [&](std::size_t k) { return in_node(k).requires_grad; };

  switch (n.op) {
    case OpTag::kLeaf:
      return;
    case OpTag::kMatMul: {
      Node& a = in_node(0);
      Node& b = in_node(1);
      const std::size_t m = a.shape[0], k = a.shape[1], cols = b.shape[1];
      if (a.requires_grad) kernels::matmul_grad_a(dy.values(), b.value.values(), a.adjoint.values(), m, k, cols);
      if (b.requires_grad) kernels::matmul_grad_b(a.value.values(), dy.values(), b.adjoint.values(), m, k, cols);
      break;
    }
    case OpTag::kBiasAdd: {
      const std::size_t cols = n.shape[1];
      if (wants(0)) {
        double* dx = in_node(0).adjoint.data();
        for (std::size_t i = 0; i < count; ++i) dx[i] += dy[i];
      }
      if (wants(1)) {
        double* db = in_node(1).adjoint.data();
        for (std::size_t i = 0; i < count; ++i) db[i % cols] += dy[i];
      }
      break;
    }
    case OpTag::kSigmoid: {
      double* dx = in_node(0).adjoint.data();
      for (std::size_t i = 0; i < count; ++i) {
        const double s = n.value[i];
        dx[i] += dy[i] * s * (1.0 - s);
      }
      break;
    }
    case OpTag::kConv2d: {
      Node& x = in_node(0);
      Node& w = in_node(1);
      Node& b = in_node(2);
      kernels::ConvGeometry g{x.shape[0], x.shape[1], x.shape[2], x.shape[3],
                              w.shape[0], w.shape[2], w.shape[3]};
      kernels::conv2d_backward(x.value.values(), w.value.values(), dy.values(),
                               x.requires_grad ? x.adjoint.values() : std::span<double>{},
                               w.requires_grad ? w.adjoint.values() : std::span<double>{},
                               b.requires_grad ? b.adjoint.values() : std::span<double>{}, g);
      break;
    }
    case OpTag::kAvgPoolRows: {
      Node& x = in_node(0);
      const std::size_t k = n.index;
      const std::size_t planes = n.shape[0] * n.shape[1];
      const std::size_t oh = n.shape[2], w = n.shape[3], h = x.shape[2];
      const double inv = 1.0 / static_cast<double>(k);
      for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t r = 0; r < oh; ++r)
          for (std::size_t c = 0; c < w; ++c)
            for (std::size_t t = 0; t < k; ++t)
              x.adjoint[(p * h + r * k + t) * w + c] += dy[(p * oh + r) * w + c] * inv;
      break;
    }
    case OpTag::kReshape: {
      double* dx = in_node(0).adjoint.data();
      for (std::size_t i = 0; i < count; ++i) dx[i] += dy[i];
      break;
    }
    case OpTag::kSlice: {
      double* dx = in_node(0).adjoint.data() + n.index;
      for (std::size_t i = 0; i < count; ++i) dx[i] += dy[i];
      break;
    }
    case OpTag::kAdd:
    case OpTag::kSub: {
      const double sign = n.op == OpTag::kAdd ? 1.0 : -1.0;
      if (wants(0)) {
        double* da = in_node(0).adjoint.data();
        for (std::size_t i = 0; i < count; ++i) da[i] += dy[i];
      }
      if (wants(1)) {
        double* db = in_node(1).adjoint.data();
        for (std::size_t i = 0; i < count; ++i) db[i] += sign * dy[i];
      }
      break;
    }
    case OpTag::kMul: {
      Node& a = in_node(0);
      Node& b = in_node(1);
      if (a.requires_grad)
        for (std::size_t i = 0; i < count; ++i) a.adjoint[i] += dy[i] * b.value[i];
      if (b.requires_grad)
        for (std::size_t i = 0; i < count; ++i) b.adjoint[i] += dy[i] * a.value[i];
      break;
    }
    case OpTag::kScale: {
      double* dx = in_node(0).adjoint.data();
      for (std::size_t i = 0; i < count; ++i) dx[i] += n.scalar * dy[i];
      break;
    }
    case OpTag::kSum:
    case OpTag::kMean: {
      Node& x = in_node(0);
      const double g = n.op == OpTag::kSum ? dy[0] : dy[0] / static_cast<double>(x.value.size());
      for (std::size_t i = 0; i < x.adjoint.size(); ++i) x.adjoint[i] += g;
      break;
    }
    case OpTag::kSquare: {
      Node& x = in_node(0);
      for (std::size_t i = 0; i < count; ++i) x.adjoint[i] += 2.0 * x.value[i] * dy[i];
      break;
    }
    case OpTag::kLog: {
      Node& x = in_node(0);
      for (std::size_t i = 0; i < count; ++i) x.adjoint[i] += dy[i] / x.value[i];
      break;
    }
    case OpTag::kExp: {
      Node& x = in_node(0);
      for (std::size_t i = 0; i < count; ++i) x.adjoint[i] += dy[i] * n.value[i];
      break;
    }
    case OpTag::kSoftplus: {
      Node& x = in_node(0);
      for (std::size_t i = 0; i < count; ++i) x.adjoint[i] += dy[i] * steinrul::sigmoid(x.value[i]);
      break;
    }
    case OpTag::kHuber: {
      Node& p = in_node(0);
      Node& t = in_node(1);
      const double delta = n.scalar;
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double r = p.value[i] - t.value[i];
        const double g = dy[0] * (std::abs(r) <= delta ? r : (r > 0 ? delta : -delta));
        if (p.requires_grad) p.adjoint[i] += g;
        if (t.requires_grad) t.adjoint[i] -= g;
      }
      break;
    }
    case OpTag::kGaussianLogDensity: {
      Node& x = in_node(0);
      Node& mu = in_node(1);
      Node& sd = in_node(2);
      const double g = dy[0];
      for (std::size_t i = 0; i < x.value.size(); ++i) {
        const double s = sd.value[i];
        const double diff = x.value[i] - mu.value[i];
        const double dlx = -diff / (s * s);
        if (x.requires_grad) x.adjoint[i] += g * dlx;
        if (mu.requires_grad) mu.adjoint[i] -= g * dlx;
        if (sd.requires_grad) sd.adjoint[i] += g * (-1.0 / s + diff * diff / (s * s * s));
      }
      break;
    }
  }
}

}  // namespace steinrul
