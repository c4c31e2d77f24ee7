#pragma once

#include <functional>
#include <memory>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "keyformer/core/tensor.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace core {

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// One vertex of the computation graph.
///
/// Leaves either own their value or reference an external tensor (frozen
/// model weights) that must outlive the graph. Interior nodes keep their
/// parents and a backward rule only when some parent requires a gradient.
struct Node {
  Tensor value;
  const Tensor* external = nullptr;
  Tensor grad;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward_rule;
  std::string_view op = "leaf";
  bool requires_grad = false;

  const Tensor& data() const noexcept { return external != nullptr ? *external : value; }
  /// Gradient buffer, zero-initialised on first use.
  Tensor& grad_buffer();
};

/// Handle to a graph node. Cheap to copy; copies alias the same node.
class Var {
 public:
  Var() = default;
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->data(); }
  const Shape& shape() const { return node_->data().shape(); }
  /// Gradient after backward(); an all-zero tensor when nothing flowed here.
  Tensor grad() const;
  bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
  std::string_view op() const noexcept { return node_->op; }
  const NodePtr& node() const noexcept { return node_; }
  explicit operator bool() const noexcept { return static_cast<bool>(node_); }

 private:
  NodePtr node_;
};

/// Leaf owning its value.
Var leaf(Tensor value, bool requires_grad = false);
inline Var constant(Tensor value) { return leaf(std::move(value), false); }
/// Leaf referencing `value` without copying; `value` must outlive the graph.
Var reference(const Tensor& value, bool requires_grad);

/// Reverse-mode sweep from a scalar loss. Each reachable node is visited once
/// in reverse topological order and gradients accumulate additively.
void backward(const Var& loss);

/// Binds model parameters into one graph, one leaf per distinct tensor, and
/// hands back their gradients after backward().
class ParameterTape {
 public:
  explicit ParameterTape(bool track_gradients) : track_(track_gradients) {}

  Var operator()(const Tensor& parameter);
  bool tracking() const noexcept { return track_; }
  /// Gradient of a bound parameter; zeros for parameters never used.
  Tensor gradient(const Tensor& parameter) const;

 private:
  bool track_;
  std::unordered_map<const Tensor*, Var> bound_;
};

}  // namespace core
KEYFORMER_END_NAMESPACE
