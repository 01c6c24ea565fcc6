#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "moelab/autodiff/tensor.hpp"

namespace moelab::ad {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
// owning tape is alive and not cleared.
class Var {
 public:
  Var() = default;

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape& tape() const;
  std::size_t id() const noexcept { return id_; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Wengert list of recorded operations. Nodes are appended in evaluation order,
// so the list is topologically sorted by construction and backward() is a
// single reverse sweep.
//
// Each training job owns its own tape; nothing here is shared or locked.
class Tape {
 public:
  // Called during the reverse sweep with the node's id; reads tape.grad(id)
  // and accumulates into the inputs' grads.
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Binds a leaf tensor. When the leaf requires grad, backward() adds
  // d(loss)/d(leaf) into leaf.grad (accumulating across calls).
  Var watch(Tensor& leaf);
  // Records an op output. It requires grad iff any input does; `fn` is
  // dropped otherwise.
  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn fn);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::span<double> grad(std::size_t id);
  bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty(); }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }

  void backward(Var loss);
  std::size_t last_backward_visits() const noexcept { return visits_; }

  std::size_t size() const noexcept { return nodes_.size(); }
  void clear();
  bool topologically_ordered() const;

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    std::vector<double> grad;
    BackwardFn backward;
    Tensor* leaf = nullptr;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
  std::size_t visits_ = 0;
};

}  // namespace moelab::ad
