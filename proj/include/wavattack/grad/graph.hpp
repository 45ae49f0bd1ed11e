#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "wavattack/grad/tensor.hpp"

namespace wavattack::grad {

using NodeId = std::size_t;

enum class OpKind {
  Input,
  Parameter,
  Constant,
  Add,
  Sub,
  Mul,
  Scale,
  Square,
  Tanh,
  Sigmoid,
  Relu,
  Sum,
  Dot,
  Reshape,
  Row,
  MatVec,
  Linear,
  Conv1d,
  MaxPool1d,
  FramesToSequence,
  Lstm,
  SoftmaxCrossEntropy,
};

std::string_view op_name(OpKind kind);

// Named leaf values for one forward pass. The referenced tensors must stay
// alive for the duration of the forward() call.
using Bindings = std::unordered_map<std::string, std::reference_wrapper<const Tensor>>;

// Gradient of the loss with respect to every named leaf (inputs and
// parameters), keyed by leaf name.
using Gradients = std::map<std::string, Tensor>;

// Define-then-run computation graph with reverse-mode differentiation.
//
// Nodes are appended in topological order by the builder methods, which also
// infer static shapes and reject inconsistent operands. A Graph owns its
// activation and gradient buffers, so one instance is single-writer; build
// one per thread to evaluate the same parameters concurrently.
//
// All reductions use a fixed order, so a given graph and bindings yield
// bit-identical results on one platform.
class Graph {
 public:
  // Leaves.
  NodeId input(std::string name, Shape shape);
  NodeId parameter(std::string name, Shape shape);
  NodeId constant(Tensor value);

  // Elementwise, equal shapes.
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double factor);
  NodeId square(NodeId a);
  NodeId tanh(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId relu(NodeId a);

  // Reductions to shape [1].
  NodeId sum(NodeId a);
  NodeId dot(NodeId a, NodeId b);

  NodeId reshape(NodeId a, Shape shape);
  // a: [T, D] -> [D], the row at `index`.
  NodeId row(NodeId a, std::size_t index);
  // weight: [M, N], x: [N] -> [M].
  NodeId matvec(NodeId weight, NodeId x);
  // x: [N], weight: [M, N], bias: [M] -> [M].
  NodeId linear(NodeId x, NodeId weight, NodeId bias);
  // x: [B, Cin, L], weight: [Cout, Cin, K], bias: [Cout] -> [B, Cout, L].
  // Stride 1; each of the B rows is zero padded independently so the output
  // keeps length L ((K-1)/2 zeros on the left, the rest on the right).
  NodeId conv1d(NodeId x, NodeId weight, NodeId bias);
  // x: [B, C, L] -> [B, C, L / factor]; trailing remainder is dropped.
  // Ties route the gradient to the first maximal element.
  NodeId max_pool1d(NodeId x, std::size_t factor);
  // x: [F, C, L] -> [1, C, F*L]: frame outputs concatenated along time.
  NodeId frames_to_sequence(NodeId x);
  // seq: [T, D], w_ih: [4H, D], w_hh: [4H, H], bias: [4H] -> final hidden [H].
  // Gate order i, f, g, o; zero initial state.
  NodeId lstm(NodeId seq, NodeId w_ih, NodeId w_hh, NodeId bias);
  // logits: [k], target: [k] distribution -> [1] = -sum t_i log softmax(z)_i.
  NodeId softmax_cross_entropy(NodeId logits, NodeId target);

  // Marks the scalar output that backward() differentiates.
  void set_loss(NodeId node);
  NodeId loss() const;
  bool has_loss() const noexcept { return has_loss_; }

  // Evaluates every node. Returns the loss tensor when one is set, otherwise
  // the last node.
  const Tensor& forward(const Bindings& bindings);

  // Fills gradient slots of every node with d(loss)/d(node) and returns the
  // gradients of all named leaves.
  Gradients backward();

  // Node value (and, after backward, its gradient slot).
  const Tensor& value(NodeId node) const;
  const Shape& shape(NodeId node) const;
  OpKind kind(NodeId node) const;
  std::span<const NodeId> inputs(NodeId node) const;
  const std::string& name(NodeId node) const;
  std::size_t size() const noexcept { return nodes_.size(); }
  bool forward_done() const noexcept { return forward_done_; }

 private:
  struct Node {
    OpKind kind;
    std::vector<NodeId> inputs;
    Tensor tensor;
    std::string name;
    double factor = 0.0;
    std::size_t index = 0;
    std::vector<double> cache;
    std::vector<std::size_t> argmax;
  };

  NodeId push(OpKind kind, std::vector<NodeId> inputs, Shape shape);
  NodeId leaf(OpKind kind, std::string name, Shape shape);
  const Node& at(NodeId id) const;
  std::string describe(NodeId id) const;
  void require_same_shape(NodeId a, NodeId b, std::string_view op) const;

  void forward_node(NodeId id);
  void backward_node(NodeId id);

  std::vector<Node> nodes_;
  std::unordered_map<std::string, NodeId> leaf_names_;
  NodeId loss_ = 0;
  bool has_loss_ = false;
  bool forward_done_ = false;
  std::vector<double> scratch_;
};

}  // namespace wavattack::grad
