#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lila/numerics/tensor.hpp"

namespace lila::num {

template <class T>
class Tape;

/// Handle to a node on a Tape.
template <class T>
struct Var {
  Tape<T>* tape = nullptr;
  int id = -1;

  const Tensor<T>& value() const { return tape->value(*this); }
  const Shape& shape() const { return value().shape(); }
  bool valid() const { return tape != nullptr && id >= 0; }
};

/// Records primitive ops in creation order so that reverse iteration is a
/// valid topological order for the backward pass.
///
/// A tape supports exactly one backward pass; a second call throws. Build a
/// new tape (re-run the forward) to differentiate again.
template <class T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> leaf(Tensor<T> value, bool requires_grad = true) {
    return push(std::move(value), {}, requires_grad, nullptr);
  }

  Var<T> constant(Tensor<T> value) { return leaf(std::move(value), false); }

  /// Appends a node. `fn` is dropped when no input needs a gradient.
  Var<T> push(Tensor<T> value, std::vector<int> inputs, BackwardFn fn) {
    bool rg = false;
    for (int i : inputs) rg = rg || nodes_[i].requires_grad;
    return push(std::move(value), std::move(inputs), rg, rg ? std::move(fn) : nullptr);
  }

  const Tensor<T>& value(Var<T> v) const { return nodes_.at(v.id).value; }
  const Tensor<T>& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient of the last backward target w.r.t. `v`; zeros if unreached.
  Tensor<T> grad(Var<T> v) const {
    const auto& n = nodes_.at(v.id);
    if (n.grad.empty()) return Tensor<T>(n.value.shape());
    return n.grad;
  }

  /// Accumulation slot used by backward closures; allocated on first use.
  Tensor<T>& grad_slot(int id) {
    auto& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor<T>(n.value.shape());
    return n.grad;
  }
  bool has_grad(int id) const { return !nodes_[id].grad.empty(); }

  void backward(Var<T> loss) {
    if (loss.tape != this) throw std::invalid_argument("backward: loss belongs to another tape");
    if (backward_done_) throw std::logic_error("backward: tape already consumed; re-run the forward pass");
    const auto& lv = nodes_.at(loss.id).value;
    if (lv.size() != 1 || lv.rank() > 1)
      throw std::invalid_argument("backward: loss must be scalar, got shape " + shape_str(lv.shape()));
    backward_done_ = true;
    grad_slot(loss.id).fill(T(1));
    for (int id = loss.id; id >= 0; --id) {
      auto& n = nodes_[id];
      if (!n.backward || n.grad.empty()) continue;
      n.backward(*this, id);
    }
  }

  bool consumed() const { return backward_done_; }

  const std::vector<int>& inputs(int id) const { return nodes_[id].inputs; }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    std::vector<int> inputs;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var<T> push(Tensor<T> value, std::vector<int> inputs, bool rg, BackwardFn fn) {
    if (backward_done_) throw std::logic_error("tape: cannot record after backward");
    nodes_.push_back(Node{std::move(value), {}, std::move(inputs), rg, std::move(fn)});
    return Var<T>{this, static_cast<int>(nodes_.size()) - 1};
  }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace lila::num
