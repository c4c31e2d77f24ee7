#include "keyformer/core/autograd.hpp"

#include <unordered_set>

#include "keyformer/core/error.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace core {

Tensor& Node::grad_buffer() {
  if (grad.empty() && data().size() != 0) grad = Tensor::zeros(data().shape());
  return grad;
}

Tensor Var::grad() const {
  if (!node_->grad.empty()) return node_->grad;
  return Tensor::zeros(node_->data().shape());
}

Var leaf(Tensor value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return Var(std::move(node));
}

Var reference(const Tensor& value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->external = &value;
  node->requires_grad = requires_grad;
  return Var(std::move(node));
}

void backward(const Var& loss) {
  if (!loss) throw ContractError("backward on an empty Var");
  if (loss.value().size() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " +
                        to_string(loss.value().shape()));
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order without recursion.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next_parent] = stack.back();
    if (next_parent < node->parents.size()) {
      Node* parent = node->parents[next_parent++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }

  loss.node()->grad_buffer()[0] += Real(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_rule && !node->grad.empty()) node->backward_rule(*node);
  }
}

Var ParameterTape::operator()(const Tensor& parameter) {
  auto [it, inserted] = bound_.try_emplace(&parameter);
  if (inserted) it->second = reference(parameter, track_);
  return it->second;
}

Tensor ParameterTape::gradient(const Tensor& parameter) const {
  auto it = bound_.find(&parameter);
  if (it == bound_.end()) return Tensor::zeros(parameter.shape());
  return it->second.grad();
}

}  // namespace core
KEYFORMER_END_NAMESPACE
