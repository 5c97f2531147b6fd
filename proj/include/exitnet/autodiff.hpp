#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "exitnet/tensor.hpp"

namespace exitnet {

// A trainable tensor with its accumulated gradient. Gradients add up across
// backward passes until zero_grad() is called.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad.fill(0.0); }
};

class Graph;

// Handle to a node inside a Graph. Cheap to copy; only valid while the graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

// Tape of operations in creation order. Creation order is a topological order,
// so backward simply walks the tape in reverse.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  // Leaf bound to a parameter; backward adds into param.grad.
  Var param(Parameter& p);

  // Seeds d(root)/d(root) = 1 and propagates through every node reachable
  // from root. Node adjoints are recomputed from scratch; parameter gradients
  // accumulate. Throws if root is not a single-element tensor.
  void backward(Var root);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
  std::size_t size() const { return nodes_.size(); }

  // Multiply-adds performed by matmul nodes recorded so far.
  std::uint64_t flops() const { return flops_; }

  // Internal: used by the op functions below.
  using Backprop = std::function<void(Graph&, std::size_t self)>;
  Var record(Tensor value, std::vector<std::size_t> inputs, Backprop backprop);
  Tensor& mutable_grad(std::size_t id) { return nodes_[id].grad; }
  void add_flops(std::uint64_t n) { flops_ += n; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    Backprop backprop;
    Parameter* param = nullptr;
  };

  std::vector<Node> nodes_;
  std::uint64_t flops_ = 0;
};

// Differentiable ops. Binary elementwise ops broadcast the second operand over
// the leading (batch) dimension or from a scalar.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var relu(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var softmax_rows(Var a);
// N×C -> N
Var logsumexp_rows(Var a);
// N×C -> N
Var sum_rows(Var a);
// out[i] = a[i, index[i]]
Var gather_cols(Var a, std::span<const std::size_t> index);
// Per-row negative log-likelihood of labels under softmax(logits): N×C -> N.
Var cross_entropy_rows(Var logits, std::span<const int> labels);
Var sum(Var a);
Var mean(Var a);
Var scale(Var a, double s);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

}  // namespace exitnet
