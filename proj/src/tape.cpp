#include "msga/tape.hpp"

#include "msga/error.hpp"

namespace msga {

void Tape::record(const Tensor& output, BackwardFn fn) {
  if (!enabled_ || !output.requires_grad()) return;
  nodes_.push_back(Node{output, std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined()) throw UsageError("backward on an undefined tensor");
  if (loss.numel() != 1) throw UsageError("backward needs a scalar loss, got shape " + shape_str(loss.shape()));
  if (!loss.requires_grad()) throw UsageError("loss does not depend on any tensor that requires a gradient");

  bool produced_here = false;
  for (auto& node : nodes_) {
    node.output.drop_grad();
    if (node.output.same_storage(loss)) produced_here = true;
  }
  if (!produced_here) throw UsageError("loss was not produced through this tape");

  Tensor seed = loss;
  seed.grad()[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (!it->output.has_grad()) continue;  // nothing flowed into this node
    it->fn();
  }
}

}  // namespace msga
