#pragma once

#include <deque>
#include <functional>
#include <vector>

#include "dgcn/tensor.hpp"

namespace dgcn {

class Tape;

// Lightweight handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Tensor& value() const;
};

// One recorded operation: its forward result plus the vector-Jacobian rule
// that scatters the adjoint of the result into the adjoints of the inputs.
struct Node {
  Tensor value;
  std::vector<double> adj;                     // d(loss)/d(value), lazily sized
  std::function<void(Tape&, const Node&)> backward;  // empty for leaves
  Tensor* bound = nullptr;                     // external parameter fed by this leaf
  bool requires_grad = false;
};

// Record of a single forward pass. Nodes are appended in evaluation order,
// which is a topological order of the DAG, so one reverse sweep visits each
// node exactly once.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf bound to an external parameter; backward() accumulates into its grad.
  Var param(Tensor& t);
  // Constant leaf; no gradient flows into it.
  Var input(Tensor value);
  // Record an op node. requires_grad is inferred from the inputs.
  Var emit(Tensor value, const std::vector<Var>& inputs,
           std::function<void(Tape&, const Node&)> backward);

  const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Tensor& value(Var v) const { return value(v.id); }
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

  // Adjoint buffer of a node, allocated zero-filled on first use.
  std::vector<double>& adj(int id);

  // Reverse sweep from a scalar loss; adds leaf adjoints into bound tensors.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  std::deque<Node> nodes_;
};

}  // namespace dgcn
