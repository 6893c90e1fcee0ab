// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "semc/core/error.hpp"
#include "semc/core/tensor.hpp"

namespace semc {

/// Thread-local gradient recording switch. Ops create constant results while
/// recording is off, which keeps inference passes free of graph bookkeeping.
inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_mode()) { grad_mode() = false; }
  ~NoGradGuard() { grad_mode() = prev; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

template <typename Scalar>
struct Node {
  Tensor<Scalar> value;
  Tensor<Scalar> grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Receives this node's output gradient and accumulates into the parents.
  std::function<void(const Tensor<Scalar>&)> backward_op;

  void accumulate(const Tensor<Scalar>& g) {
    if (grad.empty()) {
      grad = Tensor<Scalar>(value.shape());
    }
    grad.array() += g.array();
  }
};

template <typename Scalar>
using NodePtr = std::shared_ptr<Node<Scalar>>;

/// Handle to a node in the dynamically built computation graph. Cheap to copy;
/// ownership follows child -> parent edges so a retained loss Var keeps the
/// whole graph alive until backward runs.
template <typename Scalar>
class Var {
public:
  Var() = default;
  explicit Var(NodePtr<Scalar> node) : node_(std::move(node)) {}

  static Var leaf(Tensor<Scalar> value, bool requires_grad) {
    auto n = std::make_shared<Node<Scalar>>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return Var(std::move(n));
  }

  static Var constant(Tensor<Scalar> value) { return leaf(std::move(value), false); }

  bool defined() const { return node_ != nullptr; }
  const NodePtr<Scalar>& node() const { return node_; }

  const Tensor<Scalar>& value() const { return node_->value; }
  Tensor<Scalar>& value() { return node_->value; }
  const Tensor<Scalar>& grad() const { return node_->grad; }
  Tensor<Scalar>& grad() { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  const Shape& shape() const { return node_->value.shape(); }
  Index dim(Index i) const { return node_->value.dim(i); }
  Index numel() const { return node_->value.numel(); }

  /// Detached copy of the value (no graph history).
  Tensor<Scalar> detached() const { return node_->value; }

  void zero_grad() {
    if (!node_->grad.empty()) node_->grad.set_zero();
  }

private:
  NodePtr<Scalar> node_;
};

namespace detail {

template <typename Scalar>
void topo_order(const NodePtr<Scalar>& root, std::vector<Node<Scalar>*>& order) {
  std::unordered_set<const Node<Scalar>*> visited;
  // Iterative post-order DFS; graphs can be a few thousand nodes deep.
  std::vector<std::pair<Node<Scalar>*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<Scalar>* parent = node->parents[next++].get();
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
}

}  // namespace detail

/// Reverse-mode sweep from a scalar root. Gradients accumulate into every
/// reachable node with requires_grad set; leaves keep them for the optimizer.
template <typename Scalar>
void backward(const Var<Scalar>& root) {
  if (!root.defined() || root.numel() != 1) {
    throw StateError("backward requires a defined scalar root");
  }
  if (!root.requires_grad()) {
    return;  // nothing reachable requires gradients
  }
  std::vector<Node<Scalar>*> order;
  detail::topo_order(root.node(), order);
  root.node()->accumulate(Tensor<Scalar>::ones({1}));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<Scalar>* n = *it;
    if (n->backward_op && !n->grad.empty()) {
      n->backward_op(n->grad);
    }
    if (n->backward_op) {
      n->grad = Tensor<Scalar>();  // free non-leaf gradient buffers eagerly
    }
  }
}

namespace detail {

template <typename Scalar>
bool track_grad(std::initializer_list<const Var<Scalar>*> inputs) {
  if (!grad_mode()) return false;
  for (const Var<Scalar>* v : inputs) {
    if (v->requires_grad()) return true;
  }
  return false;
}

template <typename Scalar>
Var<Scalar> make_node(Tensor<Scalar> value, std::vector<NodePtr<Scalar>> parents,
                      std::function<void(const Tensor<Scalar>&)> backward_op) {
  auto n = std::make_shared<Node<Scalar>>();
  n->value = std::move(value);
  n->requires_grad = true;
  n->parents = std::move(parents);
  n->backward_op = std::move(backward_op);
  return Var<Scalar>(std::move(n));
}

}  // namespace detail

}  // namespace semc
