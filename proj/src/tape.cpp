#include "softcam/tape.hpp"

#include <stdexcept>
#include <string>

namespace softcam {

const Tensor& GradTable::grad(NodeId id) const {
  if (id < 0 || id >= static_cast<NodeId>(grads_.size()))
    throw std::out_of_range("GradTable: node " + std::to_string(id) + " not on tape");
  if (grads_[id]) return *grads_[id];
  // node was never reached by the sweep: gradient is zero
  if (!zero_cache_[id]) zero_cache_[id] = std::make_unique<Tensor>(shapes_[id]);
  return *zero_cache_[id];
}

void Tape::check_id(NodeId id) const {
  if (id < 0 || id >= static_cast<NodeId>(nodes_.size()))
    throw std::out_of_range("Tape: node " + std::to_string(id) + " not on tape");
}

NodeId Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, nullptr});
  return static_cast<NodeId>(nodes_.size()) - 1;
}

NodeId Tape::push(Tensor value, std::vector<NodeId> inputs, BackwardFn backward) {
  for (NodeId in : inputs) check_id(in);  // enforces topological order
  nodes_.push_back(Node{std::move(value), std::move(inputs), std::move(backward)});
  return static_cast<NodeId>(nodes_.size()) - 1;
}

const Tensor& Tape::value(NodeId id) const {
  check_id(id);
  return nodes_[id].value;
}

GradTable Tape::backward(NodeId output) const {
  check_id(output);
  if (nodes_[output].value.size() != 1)
    throw std::invalid_argument("Tape::backward: output node must be scalar, got shape " +
                                nodes_[output].value.shape_str());
  GradTable table;
  table.grads_.resize(nodes_.size());
  table.shapes_.reserve(nodes_.size());
  for (const Node& n : nodes_) table.shapes_.push_back(n.value.shape());
  table.zero_cache_.resize(nodes_.size());

  table.grads_[output] = std::make_unique<Tensor>(Tensor::full(nodes_[output].value.shape(), 1.0f));

  for (NodeId i = output; i >= 0; --i) {
    if (!table.grads_[i] || !nodes_[i].backward) continue;
    std::vector<Tensor*> grad_in;
    grad_in.reserve(nodes_[i].inputs.size());
    for (NodeId in : nodes_[i].inputs) {
      if (!table.grads_[in])
        table.grads_[in] = std::make_unique<Tensor>(nodes_[in].value.shape());
      grad_in.push_back(table.grads_[in].get());
    }
    nodes_[i].backward(*this, *table.grads_[i], grad_in);
  }
  return table;
}

}  // namespace softcam
