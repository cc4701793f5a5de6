#pragma once

#include <functional>
#include <vector>

#include "msga/tensor.hpp"

namespace msga {

// Records differentiable operations in execution order so that a single
// reverse sweep can propagate gradients. Nodes are appended by the ops in
// ops.hpp only when their output requires a gradient, so inputs of a node
// always precede it.
//
// A tape is owned by one thread. Independent tapes may run concurrently as
// long as they do not share tensors that require gradients.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  Tape() = default;
  // A disabled tape records nothing; ops behave as pure forward functions.
  explicit Tape(bool enabled) : enabled_(enabled) {}

  bool enabled() const { return enabled_; }
  std::size_t size() const { return nodes_.size(); }

  // `output` is the node's result; `fn` reads output.grad() and accumulates
  // into the gradients of the inputs it captured.
  void record(const Tensor& output, BackwardFn fn);

  // Reverse sweep from a scalar loss. Gradients of leaf tensors (parameters,
  // inputs) accumulate; intermediate gradients are reset on every call so
  // that repeated sweeps add exactly one more copy to the leaves.
  void backward(const Tensor& loss);

  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor output;
    BackwardFn fn;
  };
  std::vector<Node> nodes_;
  bool enabled_ = true;
};

}  // namespace msga
