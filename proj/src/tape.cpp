#include "dgcn/tape.hpp"

namespace dgcn {

const Tensor& Var::value() const { return tape->value(id); }

Var Tape::param(Tensor& t) {
  Node n;
  n.value = t;  // copy of current values; grads flow back through `bound`
  n.bound = &t;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::input(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::emit(Tensor value, const std::vector<Var>& inputs,
               std::function<void(Tape&, const Node&)> backward) {
  Node n;
  n.value = std::move(value);
  for (const Var& in : inputs) {
    require(in.valid() && in.tape == this, "op input from a different tape");
    if (nodes_[static_cast<std::size_t>(in.id)].requires_grad) n.requires_grad = true;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

std::vector<double>& Tape::adj(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.adj.size() != n.value.data.size()) n.adj.assign(n.value.data.size(), 0.0);
  return n.adj;
}

void Tape::backward(Var loss) {
  require(loss.valid() && loss.tape == this, "backward needs a node of this tape");
  require(loss.value().numel() == 1, "backward needs a scalar loss, got shape " +
                                         loss.value().shape_str());
  if (!nodes_[static_cast<std::size_t>(loss.id)].requires_grad) return;
  adj(loss.id)[0] += 1.0;
  for (int id = loss.id; id >= 0; --id) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || n.adj.empty()) continue;
    if (n.backward) n.backward(*this, n);
    if (n.bound != nullptr) n.bound->accumulate_grad(n.adj);
  }
}

}  // namespace dgcn
