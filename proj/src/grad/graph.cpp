#include "wavattack/grad/graph.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>

#include "wavattack/error.hpp"

namespace wavattack::grad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

double sigmoid_of(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Copies x[ci, t + k - pad] into col[ci*K + k, t], zero outside [0, L).
void im2col(const double* x, std::size_t cin, std::size_t len, std::size_t kernel, double* col) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>((kernel - 1) / 2);
  const auto L = static_cast<std::ptrdiff_t>(len);
  for (std::size_t ci = 0; ci < cin; ++ci) {
    const double* src = x + ci * len;
    for (std::size_t k = 0; k < kernel; ++k) {
      double* dst = col + (ci * kernel + k) * len;
      const std::ptrdiff_t offset = static_cast<std::ptrdiff_t>(k) - pad;
      const std::ptrdiff_t begin = std::max<std::ptrdiff_t>(0, -offset);
      const std::ptrdiff_t end = std::min<std::ptrdiff_t>(L, L - offset);
      if (begin >= end) {
        std::fill(dst, dst + len, 0.0);
        continue;
      }
      std::fill(dst, dst + begin, 0.0);
      std::memcpy(dst + begin, src + begin + offset, static_cast<std::size_t>(end - begin) * sizeof(double));
      std::fill(dst + end, dst + len, 0.0);
    }
  }
}

// Adds col[ci*K + k, t] back into dx[ci, t + k - pad].
void col2im_add(const double* col, std::size_t cin, std::size_t len, std::size_t kernel, double* dx) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>((kernel - 1) / 2);
  const auto L = static_cast<std::ptrdiff_t>(len);
  for (std::size_t ci = 0; ci < cin; ++ci) {
    double* dst = dx + ci * len;
    for (std::size_t k = 0; k < kernel; ++k) {
      const double* src = col + (ci * kernel + k) * len;
      const std::ptrdiff_t offset = static_cast<std::ptrdiff_t>(k) - pad;
      const std::ptrdiff_t begin = std::max<std::ptrdiff_t>(0, -offset);
      const std::ptrdiff_t end = std::min<std::ptrdiff_t>(L, L - offset);
      for (std::ptrdiff_t t = begin; t < end; ++t) dst[t + offset] += src[t];
    }
  }
}

}  // namespace

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Input: return "input";
    case OpKind::Parameter: return "parameter";
    case OpKind::Constant: return "constant";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Scale: return "scale";
    case OpKind::Square: return "square";
    case OpKind::Tanh: return "tanh";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Relu: return "relu";
    case OpKind::Sum: return "sum";
    case OpKind::Dot: return "dot";
    case OpKind::Reshape: return "reshape";
    case OpKind::Row: return "row";
    case OpKind::MatVec: return "matvec";
    case OpKind::Linear: return "linear";
    case OpKind::Conv1d: return "conv1d";
    case OpKind::MaxPool1d: return "max_pool1d";
    case OpKind::FramesToSequence: return "frames_to_sequence";
    case OpKind::Lstm: return "lstm";
    case OpKind::SoftmaxCrossEntropy: return "softmax_cross_entropy";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Builders

const Graph::Node& Graph::at(NodeId id) const {
  if (id >= nodes_.size()) throw ShapeError("unknown node id " + std::to_string(id));
  return nodes_[id];
}

std::string Graph::describe(NodeId id) const {
  const Node& n = nodes_[id];
  std::string out = std::string(op_name(n.kind)) + " node " + std::to_string(id);
  if (!n.name.empty()) out += " '" + n.name + "'";
  return out;
}

NodeId Graph::push(OpKind kind, std::vector<NodeId> inputs, Shape shape) {
  for (NodeId in : inputs) at(in);
  nodes_.push_back(Node{kind, std::move(inputs), Tensor(std::move(shape)), {}, 0.0, 0, {}, {}});
  forward_done_ = false;
  return nodes_.size() - 1;
}

NodeId Graph::leaf(OpKind kind, std::string name, Shape shape) {
  if (name.empty()) throw ShapeError(std::string(op_name(kind)) + " leaf needs a name");
  if (leaf_names_.contains(name)) throw ShapeError("duplicate leaf name '" + name + "'");
  const NodeId id = push(kind, {}, std::move(shape));
  nodes_[id].name = name;
  leaf_names_.emplace(std::move(name), id);
  return id;
}

NodeId Graph::input(std::string name, Shape shape) { return leaf(OpKind::Input, std::move(name), std::move(shape)); }

NodeId Graph::parameter(std::string name, Shape shape) {
  return leaf(OpKind::Parameter, std::move(name), std::move(shape));
}

NodeId Graph::constant(Tensor value) {
  Shape shape = value.shape();
  const NodeId id = push(OpKind::Constant, {}, std::move(shape));
  std::copy(value.values().begin(), value.values().end(), nodes_[id].tensor.values().begin());
  return id;
}

void Graph::require_same_shape(NodeId a, NodeId b, std::string_view op) const {
  if (at(a).tensor.shape() != at(b).tensor.shape()) {
    throw ShapeError(std::string(op) + " node " + std::to_string(nodes_.size()) + ": operand shapes " +
                     to_string(at(a).tensor.shape()) + " and " + to_string(at(b).tensor.shape()) + " differ");
  }
}

NodeId Graph::add(NodeId a, NodeId b) {
  require_same_shape(a, b, "add");
  return push(OpKind::Add, {a, b}, at(a).tensor.shape());
}

NodeId Graph::sub(NodeId a, NodeId b) {
  require_same_shape(a, b, "sub");
  return push(OpKind::Sub, {a, b}, at(a).tensor.shape());
}

NodeId Graph::mul(NodeId a, NodeId b) {
  require_same_shape(a, b, "mul");
  return push(OpKind::Mul, {a, b}, at(a).tensor.shape());
}

NodeId Graph::scale(NodeId a, double factor) {
  const NodeId id = push(OpKind::Scale, {a}, at(a).tensor.shape());
  nodes_[id].factor = factor;
  return id;
}

NodeId Graph::square(NodeId a) { return push(OpKind::Square, {a}, at(a).tensor.shape()); }
NodeId Graph::tanh(NodeId a) { return push(OpKind::Tanh, {a}, at(a).tensor.shape()); }
NodeId Graph::sigmoid(NodeId a) { return push(OpKind::Sigmoid, {a}, at(a).tensor.shape()); }
NodeId Graph::relu(NodeId a) { return push(OpKind::Relu, {a}, at(a).tensor.shape()); }
NodeId Graph::sum(NodeId a) { return push(OpKind::Sum, {a}, {1}); }

NodeId Graph::dot(NodeId a, NodeId b) {
  require_same_shape(a, b, "dot");
  return push(OpKind::Dot, {a, b}, {1});
}

NodeId Graph::reshape(NodeId a, Shape shape) {
  if (element_count(shape) != at(a).tensor.size()) {
    throw ShapeError("reshape node " + std::to_string(nodes_.size()) + ": cannot view " +
                     to_string(at(a).tensor.shape()) + " as " + to_string(shape));
  }
  return push(OpKind::Reshape, {a}, std::move(shape));
}

NodeId Graph::row(NodeId a, std::size_t index) {
  const Shape& s = at(a).tensor.shape();
  if (s.size() != 2 || index >= s[0]) {
    throw ShapeError("row node " + std::to_string(nodes_.size()) + ": cannot take row " + std::to_string(index) +
                     " of " + to_string(s));
  }
  const NodeId id = push(OpKind::Row, {a}, {s[1]});
  nodes_[id].index = index;
  return id;
}

NodeId Graph::matvec(NodeId weight, NodeId x) {
  const Shape& w = at(weight).tensor.shape();
  const Shape& v = at(x).tensor.shape();
  if (w.size() != 2 || v.size() != 1 || w[1] != v[0]) {
    throw ShapeError("matvec node " + std::to_string(nodes_.size()) + ": weight " + to_string(w) +
                     " incompatible with vector " + to_string(v));
  }
  return push(OpKind::MatVec, {weight, x}, {w[0]});
}

NodeId Graph::linear(NodeId x, NodeId weight, NodeId bias) {
  const Shape& v = at(x).tensor.shape();
  const Shape& w = at(weight).tensor.shape();
  const Shape& b = at(bias).tensor.shape();
  if (v.size() != 1 || w.size() != 2 || w[1] != v[0] || b != Shape{w[0]}) {
    throw ShapeError("linear node " + std::to_string(nodes_.size()) + ": input " + to_string(v) + ", weight " +
                     to_string(w) + ", bias " + to_string(b) + " are inconsistent");
  }
  return push(OpKind::Linear, {x, weight, bias}, {w[0]});
}

NodeId Graph::conv1d(NodeId x, NodeId weight, NodeId bias) {
  const Shape& v = at(x).tensor.shape();
  const Shape& w = at(weight).tensor.shape();
  const Shape& b = at(bias).tensor.shape();
  if (v.size() != 3 || w.size() != 3 || w[1] != v[1] || b != Shape{w[0]} || w[2] == 0) {
    throw ShapeError("conv1d node " + std::to_string(nodes_.size()) + ": input " + to_string(v) + ", weight " +
                     to_string(w) + ", bias " + to_string(b) + " are inconsistent");
  }
  return push(OpKind::Conv1d, {x, weight, bias}, {v[0], w[0], v[2]});
}

NodeId Graph::max_pool1d(NodeId x, std::size_t factor) {
  const Shape& v = at(x).tensor.shape();
  if (v.size() != 3 || factor == 0 || v[2] / factor == 0) {
    throw ShapeError("max_pool1d node " + std::to_string(nodes_.size()) + ": cannot pool " + to_string(v) +
                     " by " + std::to_string(factor));
  }
  const NodeId id = push(OpKind::MaxPool1d, {x}, {v[0], v[1], v[2] / factor});
  nodes_[id].index = factor;
  return id;
}

NodeId Graph::frames_to_sequence(NodeId x) {
  const Shape& v = at(x).tensor.shape();
  if (v.size() != 3) {
    throw ShapeError("frames_to_sequence node " + std::to_string(nodes_.size()) + ": expected [F, C, L], got " +
                     to_string(v));
  }
  return push(OpKind::FramesToSequence, {x}, {1, v[1], v[0] * v[2]});
}

NodeId Graph::lstm(NodeId seq, NodeId w_ih, NodeId w_hh, NodeId bias) {
  const Shape& s = at(seq).tensor.shape();
  const Shape& wi = at(w_ih).tensor.shape();
  const Shape& wh = at(w_hh).tensor.shape();
  const Shape& b = at(bias).tensor.shape();
  const bool ok = s.size() == 2 && s[0] >= 1 && wi.size() == 2 && wh.size() == 2 && wi[0] % 4 == 0 &&
                  wi[0] > 0 && wi[1] == s[1] && wh[0] == wi[0] && wh[1] == wi[0] / 4 && b == Shape{wi[0]};
  if (!ok) {
    throw ShapeError("lstm node " + std::to_string(nodes_.size()) + ": sequence " + to_string(s) + ", w_ih " +
                     to_string(wi) + ", w_hh " + to_string(wh) + ", bias " + to_string(b) + " are inconsistent");
  }
  return push(OpKind::Lstm, {seq, w_ih, w_hh, bias}, {wi[0] / 4});
}

NodeId Graph::softmax_cross_entropy(NodeId logits, NodeId target) {
  const Shape& z = at(logits).tensor.shape();
  if (z.size() != 1 || z[0] == 0) {
    throw ShapeError("softmax_cross_entropy node " + std::to_string(nodes_.size()) + ": logits must be [k], got " +
                     to_string(z));
  }
  require_same_shape(logits, target, "softmax_cross_entropy");
  return push(OpKind::SoftmaxCrossEntropy, {logits, target}, {1});
}

void Graph::set_loss(NodeId node) {
  if (at(node).tensor.shape() != Shape{1}) {
    throw ShapeError("loss must have shape [1]; " + describe(node) + " has " + to_string(at(node).tensor.shape()));
  }
  loss_ = node;
  has_loss_ = true;
}

NodeId Graph::loss() const {
  if (!has_loss_) throw StateError("graph has no loss node");
  return loss_;
}

const Tensor& Graph::value(NodeId node) const { return at(node).tensor; }
const Shape& Graph::shape(NodeId node) const { return at(node).tensor.shape(); }
OpKind Graph::kind(NodeId node) const { return at(node).kind; }
std::span<const NodeId> Graph::inputs(NodeId node) const { return at(node).inputs; }
const std::string& Graph::name(NodeId node) const { return at(node).name; }

// ---------------------------------------------------------------------------
// Forward

const Tensor& Graph::forward(const Bindings& bindings) {
  if (nodes_.empty()) throw StateError("forward on an empty graph");
  forward_done_ = false;
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    Node& node = nodes_[id];
    if (node.kind == OpKind::Input || node.kind == OpKind::Parameter) {
      auto it = bindings.find(node.name);
      if (it == bindings.end()) throw StateError("unbound " + describe(id));
      const Tensor& bound = it->second.get();
      if (bound.shape() != node.tensor.shape()) {
        throw ShapeError(describe(id) + " expects shape " + to_string(node.tensor.shape()) + ", bound " +
                         to_string(bound.shape()));
      }
      std::copy(bound.values().begin(), bound.values().end(), node.tensor.values().begin());
    } else {
      forward_node(id);
    }
    for (double v : node.tensor.values()) {
      if (!std::isfinite(v)) throw OverflowError("non-finite value in " + describe(id));
    }
  }
  forward_done_ = true;
  return has_loss_ ? nodes_[loss_].tensor : nodes_.back().tensor;
}

void Graph::forward_node(NodeId id) {
  Node& node = nodes_[id];
  auto out = node.tensor.values();
  auto in = [&](std::size_t i) { return std::span<const double>(nodes_[node.inputs[i]].tensor.values()); };
  const std::size_t n = out.size();

  switch (node.kind) {
    case OpKind::Input:
    case OpKind::Parameter:
    case OpKind::Constant:
      break;
    case OpKind::Add: {
      auto a = in(0), b = in(1);
      for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
      break;
    }
    case OpKind::Sub: {
      auto a = in(0), b = in(1);
      for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
      break;
    }
    case OpKind::Mul: {
      auto a = in(0), b = in(1);
      for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
      break;
    }
    case OpKind::Scale: {
      auto a = in(0);
      for (std::size_t i = 0; i < n; ++i) out[i] = node.factor * a[i];
      break;
    }
    case OpKind::Square: {
      auto a = in(0);
      for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * a[i];
      break;
    }
    case OpKind::Tanh: {
      auto a = in(0);
      for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(a[i]);
      break;
    }
    case OpKind::Sigmoid: {
      auto a = in(0);
      for (std::size_t i = 0; i < n; ++i) out[i] = sigmoid_of(a[i]);
      break;
    }
    case OpKind::Relu: {
      auto a = in(0);
      for (std::size_t i = 0; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
      break;
    }
    case OpKind::Sum: {
      double acc = 0.0;
      for (double v : in(0)) acc += v;
      out[0] = acc;
      break;
    }
    case OpKind::Dot: {
      auto a = in(0), b = in(1);
      double acc = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
      out[0] = acc;
      break;
    }
    case OpKind::Reshape: {
      auto a = in(0);
      std::copy(a.begin(), a.end(), out.begin());
      break;
    }
    case OpKind::Row: {
      auto a = in(0);
      std::copy_n(a.begin() + static_cast<std::ptrdiff_t>(node.index * n), n, out.begin());
      break;
    }
    case OpKind::MatVec: {
      const Shape& ws = nodes_[node.inputs[0]].tensor.shape();
      ConstMatMap w(in(0).data(), static_cast<Eigen::Index>(ws[0]), static_cast<Eigen::Index>(ws[1]));
      ConstVecMap x(in(1).data(), static_cast<Eigen::Index>(ws[1]));
      VecMap(out.data(), static_cast<Eigen::Index>(n)).noalias() = w * x;
      break;
    }
    case OpKind::Linear: {
      const Shape& ws = nodes_[node.inputs[1]].tensor.shape();
      ConstVecMap x(in(0).data(), static_cast<Eigen::Index>(ws[1]));
      ConstMatMap w(in(1).data(), static_cast<Eigen::Index>(ws[0]), static_cast<Eigen::Index>(ws[1]));
      ConstVecMap b(in(2).data(), static_cast<Eigen::Index>(ws[0]));
      VecMap y(out.data(), static_cast<Eigen::Index>(n));
      y.noalias() = w * x;
      y += b;
      break;
    }
    case OpKind::Conv1d: {
      const Shape& xs = nodes_[node.inputs[0]].tensor.shape();
      const Shape& ws = nodes_[node.inputs[1]].tensor.shape();
      const std::size_t batch = xs[0], cin = xs[1], len = xs[2], cout = ws[0], kernel = ws[2];
      scratch_.resize(cin * kernel * len);
      ConstMatMap w(in(1).data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(cin * kernel));
      ConstMatMap col(scratch_.data(), static_cast<Eigen::Index>(cin * kernel), static_cast<Eigen::Index>(len));
      auto bias = in(2);
      for (std::size_t b = 0; b < batch; ++b) {
        im2col(in(0).data() + b * cin * len, cin, len, kernel, scratch_.data());
        MatMap y(out.data() + b * cout * len, static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(len));
        y.noalias() = w * col;
        for (std::size_t c = 0; c < cout; ++c) y.row(static_cast<Eigen::Index>(c)).array() += bias[c];
      }
      break;
    }
    case OpKind::MaxPool1d: {
      const Shape& xs = nodes_[node.inputs[0]].tensor.shape();
      const std::size_t factor = node.index, len = xs[2], out_len = len / factor, rows = xs[0] * xs[1];
      auto a = in(0);
      node.argmax.resize(n);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < out_len; ++j) {
          std::size_t best = r * len + j * factor;
          for (std::size_t k = 1; k < factor; ++k) {
            const std::size_t idx = r * len + j * factor + k;
            if (a[idx] > a[best]) best = idx;
          }
          out[r * out_len + j] = a[best];
          node.argmax[r * out_len + j] = best;
        }
      }
      break;
    }
    case OpKind::FramesToSequence: {
      const Shape& xs = nodes_[node.inputs[0]].tensor.shape();
      const std::size_t frames = xs[0], channels = xs[1], len = xs[2];
      auto a = in(0);
      for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t c = 0; c < channels; ++c) {
          std::copy_n(a.begin() + static_cast<std::ptrdiff_t>((f * channels + c) * len), len,
                      out.begin() + static_cast<std::ptrdiff_t>(c * frames * len + f * len));
        }
      }
      break;
    }
    case OpKind::Lstm: {
      const Shape& ss = nodes_[node.inputs[0]].tensor.shape();
      const std::size_t steps = ss[0], dim = ss[1], hidden = n, gates = 4 * hidden;
      ConstMatMap w_ih(in(1).data(), static_cast<Eigen::Index>(gates), static_cast<Eigen::Index>(dim));
      ConstMatMap w_hh(in(2).data(), static_cast<Eigen::Index>(gates), static_cast<Eigen::Index>(hidden));
      ConstVecMap bias(in(3).data(), static_cast<Eigen::Index>(gates));
      // cache layout: gates [T, 4H] (activated), c [T, H], tanh(c) [T, H], h [T, H]
      node.cache.assign(steps * (gates + 3 * hidden), 0.0);
      double* g_all = node.cache.data();
      double* c_all = g_all + steps * gates;
      double* tc_all = c_all + steps * hidden;
      double* h_all = tc_all + steps * hidden;
      Eigen::VectorXd zero = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(hidden));
      for (std::size_t t = 0; t < steps; ++t) {
        ConstVecMap x(in(0).data() + t * dim, static_cast<Eigen::Index>(dim));
        const double* h_prev = t == 0 ? zero.data() : h_all + (t - 1) * hidden;
        const double* c_prev = t == 0 ? zero.data() : c_all + (t - 1) * hidden;
        VecMap z(g_all + t * gates, static_cast<Eigen::Index>(gates));
        z.noalias() = w_ih * x;
        z.noalias() += w_hh * ConstVecMap(h_prev, static_cast<Eigen::Index>(hidden));
        z += bias;
        double* gt = g_all + t * gates;
        for (std::size_t j = 0; j < hidden; ++j) {
          const double ig = sigmoid_of(gt[j]);
          const double fg = sigmoid_of(gt[hidden + j]);
          const double gg = std::tanh(gt[2 * hidden + j]);
          const double og = sigmoid_of(gt[3 * hidden + j]);
          gt[j] = ig;
          gt[hidden + j] = fg;
          gt[2 * hidden + j] = gg;
          gt[3 * hidden + j] = og;
          const double c = fg * c_prev[j] + ig * gg;
          const double tc = std::tanh(c);
          c_all[t * hidden + j] = c;
          tc_all[t * hidden + j] = tc;
          h_all[t * hidden + j] = og * tc;
        }
      }
      std::copy_n(h_all + (steps - 1) * hidden, hidden, out.begin());
      break;
    }
    case OpKind::SoftmaxCrossEntropy: {
      auto z = in(0), t = in(1);
      std::size_t top = 0;
      for (std::size_t i = 1; i < z.size(); ++i) {
        if (z[i] > z[top]) top = i;
      }
      const double peak = z[top];
      // log1p keeps the loss of a confident, correct prediction from
      // rounding to exactly zero.
      double rest = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) {
        if (i != top) rest += std::exp(z[i] - peak);
      }
      const double log_norm = std::log1p(rest);
      const double lse = peak + log_norm;
      node.cache.resize(z.size());
      double loss = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) {
        const double log_p = (z[i] - peak) - log_norm;
        node.cache[i] = std::exp(log_p);
        loss -= t[i] * log_p;
      }
      node.factor = lse;
      out[0] = loss;
      break;
    }
  }
}

// ---------------------------------------------------------------------------
// Backward

Gradients Graph::backward() {
  if (!forward_done_) throw StateError("backward called before forward");
  const NodeId root = loss();
  for (Node& node : nodes_) node.tensor.zero_grad();
  nodes_[root].tensor.grad()[0] = 1.0;
  for (NodeId id = root + 1; id-- > 0;) backward_node(id);

  Gradients grads;
  for (const auto& [name, id] : leaf_names_) {
    const Tensor& t = nodes_[id].tensor;
    grads.emplace(name, Tensor(t.shape(), std::vector<double>(t.grad().begin(), t.grad().end())));
  }
  return grads;
}

void Graph::backward_node(NodeId id) {
  Node& node = nodes_[id];
  auto dy = std::span<const double>(node.tensor.grad());
  auto y = std::span<const double>(node.tensor.values());
  auto in = [&](std::size_t i) { return std::span<const double>(nodes_[node.inputs[i]].tensor.values()); };
  auto din = [&](std::size_t i) { return nodes_[node.inputs[i]].tensor.grad(); };
  const std::size_t n = dy.size();

  switch (node.kind) {
    case OpKind::Input:
    case OpKind::Parameter:
    case OpKind::Constant:
      break;
    case OpKind::Add: {
      auto da = din(0);
      for (std::size_t i = 0; i < n; ++i) da[i] += dy[i];
      auto db = din(1);
      for (std::size_t i = 0; i < n; ++i) db[i] += dy[i];
      break;
    }
    case OpKind::Sub: {
      auto da = din(0);
      for (std::size_t i = 0; i < n; ++i) da[i] += dy[i];
      auto db = din(1);
      for (std::size_t i = 0; i < n; ++i) db[i] -= dy[i];
      break;
    }
    case OpKind::Mul: {
      auto a = in(0), b = in(1);
      auto da = din(0);
      for (std::size_t i = 0; i < n; ++i) da[i] += dy[i] * b[i];
      auto db = din(1);
      for (std::size_t i = 0; i < n; ++i) db[i] += dy[i] * a[i];
      break;
    }
    case OpKind::Scale: {
      auto da = din(0);
      for (std::size_t i = 0; i < n; ++i) da[i] += node.factor * dy[i];
      break;
    }
    case OpKind::Square: {
      auto a = in(0);
      auto da = din(0);
      for (std::size_t i = 0; i < n; ++i) da[i] += 2.0 * a[i] * dy[i];
      break;
    }
    case OpKind::Tanh: {
      auto da = din(0);
      for (std::size_t i = 0; i < n; ++i) da[i] += dy[i] * (1.0 - y[i] * y[i]);
      break;
    }
    case OpKind::Sigmoid: {
      auto da = din(0);
      for (std::size_t i = 0; i < n; ++i) da[i] += dy[i] * y[i] * (1.0 - y[i]);
      break;
    }
    case OpKind::Relu: {
      auto a = in(0);
      auto da = din(0);
      for (std::size_t i = 0; i < n; ++i) {
        if (a[i] > 0.0) da[i] += dy[i];
      }
      break;
    }
    case OpKind::Sum: {
      auto da = din(0);
      for (double& v : da) v += dy[0];
      break;
    }
    case OpKind::Dot: {
      auto a = in(0), b = in(1);
      auto da = din(0);
      for (std::size_t i = 0; i < a.size(); ++i) da[i] += dy[0] * b[i];
      auto db = din(1);
      for (std::size_t i = 0; i < a.size(); ++i) db[i] += dy[0] * a[i];
      break;
    }
    case OpKind::Reshape: {
      auto da = din(0);
      for (std::size_t i = 0; i < n; ++i) da[i] += dy[i];
      break;
    }
    case OpKind::Row: {
      auto da = din(0);
      for (std::size_t i = 0; i < n; ++i) da[node.index * n + i] += dy[i];
      break;
    }
    case OpKind::MatVec: {
      const Shape& ws = nodes_[node.inputs[0]].tensor.shape();
      const auto rows = static_cast<Eigen::Index>(ws[0]), cols = static_cast<Eigen::Index>(ws[1]);
      ConstVecMap g(dy.data(), rows);
      MatMap(din(0).data(), rows, cols).noalias() += g * ConstVecMap(in(1).data(), cols).transpose();
      VecMap(din(1).data(), cols).noalias() += ConstMatMap(in(0).data(), rows, cols).transpose() * g;
      break;
    }
    case OpKind::Linear: {
      const Shape& ws = nodes_[node.inputs[1]].tensor.shape();
      const auto rows = static_cast<Eigen::Index>(ws[0]), cols = static_cast<Eigen::Index>(ws[1]);
      ConstVecMap g(dy.data(), rows);
      VecMap(din(0).data(), cols).noalias() += ConstMatMap(in(1).data(), rows, cols).transpose() * g;
      MatMap(din(1).data(), rows, cols).noalias() += g * ConstVecMap(in(0).data(), cols).transpose();
      VecMap(din(2).data(), rows) += g;
      break;
    }
    case OpKind::Conv1d: {
      const Shape& xs = nodes_[node.inputs[0]].tensor.shape();
      const Shape& ws = nodes_[node.inputs[1]].tensor.shape();
      const std::size_t batch = xs[0], cin = xs[1], len = xs[2], cout = ws[0], kernel = ws[2];
      const std::size_t col_size = cin * kernel * len;
      scratch_.resize(2 * col_size);
      double* col_buf = scratch_.data();
      double* dcol_buf = scratch_.data() + col_size;
      const auto ck = static_cast<Eigen::Index>(cin * kernel);
      const auto L = static_cast<Eigen::Index>(len);
      const auto co = static_cast<Eigen::Index>(cout);
      ConstMatMap w(in(1).data(), co, ck);
      MatMap dw(din(1).data(), co, ck);
      auto dbias = din(2);
      ConstMatMap col(col_buf, ck, L);
      MatMap dcol(dcol_buf, ck, L);
      for (std::size_t b = 0; b < batch; ++b) {
        ConstMatMap g(dy.data() + b * cout * len, co, L);
        im2col(in(0).data() + b * cin * len, cin, len, kernel, col_buf);
        dw.noalias() += g * col.transpose();
        for (std::size_t c = 0; c < cout; ++c) {
          const double* row = dy.data() + (b * cout + c) * len;
          double acc = 0.0;
          for (std::size_t t = 0; t < len; ++t) acc += row[t];
          dbias[c] += acc;
        }
        dcol.noalias() = w.transpose() * g;
        col2im_add(dcol_buf, cin, len, kernel, din(0).data() + b * cin * len);
      }
      break;
    }
    case OpKind::MaxPool1d: {
      auto da = din(0);
      for (std::size_t i = 0; i < n; ++i) da[node.argmax[i]] += dy[i];
      break;
    }
    case OpKind::FramesToSequence: {
      const Shape& xs = nodes_[node.inputs[0]].tensor.shape();
      const std::size_t frames = xs[0], channels = xs[1], len = xs[2];
      auto da = din(0);
      for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t c = 0; c < channels; ++c) {
          const double* src = dy.data() + c * frames * len + f * len;
          double* dst = da.data() + (f * channels + c) * len;
          for (std::size_t l = 0; l < len; ++l) dst[l] += src[l];
        }
      }
      break;
    }
    case OpKind::Lstm: {
      const Shape& ss = nodes_[node.inputs[0]].tensor.shape();
      const std::size_t steps = ss[0], dim = ss[1], hidden = n, gates = 4 * hidden;
      const auto G = static_cast<Eigen::Index>(gates), D = static_cast<Eigen::Index>(dim),
                 H = static_cast<Eigen::Index>(hidden);
      ConstMatMap w_ih(in(1).data(), G, D);
      ConstMatMap w_hh(in(2).data(), G, H);
      MatMap dw_ih(din(1).data(), G, D);
      MatMap dw_hh(din(2).data(), G, H);
      VecMap dbias(din(3).data(), G);
      const double* g_all = node.cache.data();
      const double* c_all = g_all + steps * gates;
      const double* tc_all = c_all + steps * hidden;
      const double* h_all = tc_all + steps * hidden;

      Eigen::VectorXd dh = ConstVecMap(dy.data(), H);
      Eigen::VectorXd dc = Eigen::VectorXd::Zero(H);
      Eigen::VectorXd dz(G);
      for (std::size_t t = steps; t-- > 0;) {
        const double* gt = g_all + t * gates;
        for (std::size_t j = 0; j < hidden; ++j) {
          const auto jj = static_cast<Eigen::Index>(j);
          const double ig = gt[j], fg = gt[hidden + j], gg = gt[2 * hidden + j], og = gt[3 * hidden + j];
          const double tc = tc_all[t * hidden + j];
          const double c_prev = t == 0 ? 0.0 : c_all[(t - 1) * hidden + j];
          const double d_o = dh[jj] * tc;
          const double dct = dc[jj] + dh[jj] * og * (1.0 - tc * tc);
          dz[jj] = dct * gg * ig * (1.0 - ig);
          dz[H + jj] = dct * c_prev * fg * (1.0 - fg);
          dz[2 * H + jj] = dct * ig * (1.0 - gg * gg);
          dz[3 * H + jj] = d_o * og * (1.0 - og);
          dc[jj] = dct * fg;
        }
        ConstVecMap x(in(0).data() + t * dim, D);
        dw_ih.noalias() += dz * x.transpose();
        VecMap(din(0).data() + t * dim, D).noalias() += w_ih.transpose() * dz;
        dbias += dz;
        if (t > 0) {
          dw_hh.noalias() += dz * ConstVecMap(h_all + (t - 1) * hidden, H).transpose();
          dh.noalias() = w_hh.transpose() * dz;
        }
      }
      break;
    }
    case OpKind::SoftmaxCrossEntropy: {
      auto z = in(0), t = in(1);
      double mass = 0.0;
      for (double v : t) mass += v;
      auto dz = din(0);
      auto dt = din(1);
      for (std::size_t i = 0; i < z.size(); ++i) {
        dz[i] += dy[0] * (node.cache[i] * mass - t[i]);
        dt[i] += dy[0] * -(z[i] - node.factor);
      }
      break;
    }
  }
}

}  // namespace wavattack::grad
