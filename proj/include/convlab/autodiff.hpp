#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "convlab/errors.hpp"
#include "convlab/tensor.hpp"

namespace convlab {

namespace detail {
inline bool &grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}
} // namespace detail

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
public:
  NoGradGuard() : previous_(detail::grad_mode()) { detail::grad_mode() = false; }
  ~NoGradGuard() { detail::grad_mode() = previous_; }
  NoGradGuard(const NoGradGuard &) = delete;
  NoGradGuard &operator=(const NoGradGuard &) = delete;

private:
  bool previous_;
};

template <typename T> struct Node {
  Tensor<T> value;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node &)> backward_fn;
  bool requires_grad = false;
  bool leaf = true;
};

/// Handle to a value in the recorded computation. Copies share the node.
template <typename T> class Var {
public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  /// A leaf. Parameters and inputs that need gradients pass requires_grad.
  static Var leaf(Tensor<T> value, bool requires_grad = false) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    n->leaf = true;
    return Var(std::move(n));
  }

  const Tensor<T> &value() const { return node_->value; }
  Tensor<T> &value() { return node_->value; }
  const Shape &shape() const { return node_->value.shape(); }
  std::span<const T> grad() const { return node_->value.grad(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->leaf; }
  void zero_grad() { node_->value.zero_grad(); }

  Node<T> &node() const { return *node_; }
  const std::shared_ptr<Node<T>> &ptr() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

private:
  std::shared_ptr<Node<T>> node_;
};

/// Records an op result. The backward closure is dropped when no parent needs
/// gradients or when recording is disabled.
template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> parents,
                   std::function<void(Node<T> &)> backward_fn) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->leaf = false;
  bool needs = false;
  if (detail::grad_mode())
    for (const auto &p : parents) needs = needs || p.requires_grad();
  if (needs) {
    n->requires_grad = true;
    for (auto &p : parents) n->parents.push_back(p.ptr());
    n->backward_fn = std::move(backward_fn);
  }
  return Var<T>(std::move(n));
}

/// Reverse-mode sweep from a scalar root. Intermediate gradients are reset
/// on every call; leaf gradients accumulate across calls.
template <typename T> void backward(const Var<T> &root) {
  if (root.value().numel() != 1)
    throw ContractError("backward needs a scalar root, got shape " +
                        shape_string(root.shape()));
  if (!root.requires_grad()) return;

  std::vector<Node<T> *> order;
  std::unordered_set<Node<T> *> seen;
  std::vector<std::pair<Node<T> *, std::size_t>> stack{{&root.node(), 0}};
  seen.insert(&root.node());
  while (!stack.empty()) {
    auto &[node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T> *p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node<T> *n : order) {
    if (!n->leaf) {
      n->value.ensure_grad();
      n->value.zero_grad();
    }
  }
  root.node().value.ensure_grad()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T> *n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

/// Gradient slot of a parent, or an empty span when it is not tracked.
template <typename T> std::span<T> grad_of(const std::shared_ptr<Node<T>> &p) {
  if (!p->requires_grad) return {};
  return p->value.ensure_grad();
}

} // namespace convlab
