#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "softcam/tensor.hpp"

namespace softcam {

using NodeId = int;

enum class ReluMode { standard, guided };

class Tape;

/// Gradients produced by one backward sweep, keyed by node id.
class GradTable {
public:
  const Tensor& grad(NodeId id) const;

private:
  friend class Tape;
  std::vector<std::unique_ptr<Tensor>> grads_;
  std::vector<std::vector<int>> shapes_;
  mutable std::vector<std::unique_ptr<Tensor>> zero_cache_;
};

/// Reverse-mode differentiation record. Single-writer: one forward/backward
/// pass owns a tape exclusively. relu_mode switches every recorded ReLU
/// between standard and guided backward semantics.
class Tape {
public:
  using BackwardFn =
      std::function<void(const Tape&, const Tensor& grad_out, const std::vector<Tensor*>& grad_in)>;

  ReluMode relu_mode = ReluMode::standard;

  /// Records an input/parameter node with no backward rule.
  NodeId leaf(Tensor value);

  /// Records an operation node. Inputs must already be on the tape.
  NodeId push(Tensor value, std::vector<NodeId> inputs, BackwardFn backward);

  const Tensor& value(NodeId id) const;
  int num_nodes() const { return static_cast<int>(nodes_.size()); }

  /// Reverse sweep from a scalar output node; each node is visited once.
  GradTable backward(NodeId output) const;

private:
  struct Node {
    Tensor value;
    std::vector<NodeId> inputs;
    BackwardFn backward;
  };
  void check_id(NodeId id) const;
  std::vector<Node> nodes_;
};

}  // namespace softcam
