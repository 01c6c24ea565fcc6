#include "moelab/autodiff/tape.hpp"

#include <algorithm>

#include "moelab/errors.hpp"

namespace moelab::ad {

Tape& Var::tape() const {
  if (!tape_) throw ContractError("use of an unbound Var");
  return *tape_;
}

const Tensor& Var::value() const { return tape().value(id_); }

bool Var::requires_grad() const { return tape().requires_grad(id_); }

Var Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::watch(Tensor& leaf) {
  Node node;
  node.value = leaf;
  node.value.clear_grad();
  node.leaf = &leaf;
  node.requires_grad = leaf.requires_grad();
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn fn) {
  if (!all_finite(value.data())) throw NumericError("op produced a non-finite value");
  Node node;
  node.value = std::move(value);
  for (auto in : inputs) {
    if (in >= nodes_.size()) throw ContractError("op input is not on this tape");
    node.requires_grad = node.requires_grad || nodes_[in].requires_grad;
  }
  node.inputs = std::move(inputs);
  if (node.requires_grad) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

std::span<double> Tape::grad(std::size_t id) {
  auto& node = nodes_[id];
  if (node.grad.empty()) node.grad.assign(node.value.size(), 0.0);
  return node.grad;
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw ContractError("loss belongs to another tape");
  if (value(loss.id()).size() != 1) {
    throw ContractError("backward() needs a scalar loss, got " + to_string(value(loss.id()).shape()));
  }
  for (auto& node : nodes_) node.grad.clear();
  visits_ = 0;
  if (!nodes_[loss.id()].requires_grad) return;
  grad(loss.id())[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (!node.requires_grad || node.grad.empty()) continue;
    ++visits_;
    if (node.backward) node.backward(*this, i);
  }
  for (auto& node : nodes_) {
    if (!node.leaf || !node.requires_grad || node.grad.empty()) continue;
    auto dst = node.leaf->mutable_grad();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += node.grad[j];
  }
}

void Tape::clear() {
  nodes_.clear();
  visits_ = 0;
}

bool Tape::topologically_ordered() const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    for (auto in : nodes_[i].inputs) {
      if (in >= i) return false;
    }
  }
  return true;
}

}  // namespace moelab::ad
