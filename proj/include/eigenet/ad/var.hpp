#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major matrices.
//
// A Var is a handle to a graph node. Ops build new nodes whose backward
// closures push the node's gradient into its parents. Nodes that do not
// depend on any gradient-requiring leaf carry no parents and no closure, so
// pure inference builds no graph at all.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "eigenet/core/error.hpp"

namespace eigenet::ad {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
struct Node {
  Mat<T> value;
  Mat<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(const Mat<T>&)> backward;

  Mat<T>& grad_buffer() {
    if (grad.size() == 0) grad = Mat<T>::Zero(value.rows(), value.cols());
    return grad;
  }
};

template <typename T>
class Var {
 public:
  using Scalar = T;

  Var() = default;
  explicit Var(Mat<T> value, bool requires_grad = false) : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  const Mat<T>& value() const { return node_->value; }
  /// Gradient after backward(); a zero matrix if nothing flowed here.
  Mat<T> grad() const {
    if (node_->grad.size() == 0) return Mat<T>::Zero(rows(), cols());
    return node_->grad;
  }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }
  T item() const { return node_->value(0, 0); }

  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Build an op node. `backward` receives the node's accumulated gradient.
template <typename T, typename Backward>
Var<T> make_op(Mat<T> value, std::initializer_list<const Var<T>*> inputs, Backward&& backward) {
  Var<T> out(std::move(value), false);
  bool any = false;
  for (const Var<T>* in : inputs) any = any || in->requires_grad();
  if (any) {
    auto& node = *out.node();
    node.requires_grad = true;
    for (const Var<T>* in : inputs) node.parents.push_back(in->node());
    node.backward = std::forward<Backward>(backward);
  }
  return out;
}

template <typename T>
Var<T> make_op_list(Mat<T> value, const std::vector<Var<T>>& inputs,
                    std::function<void(const Mat<T>&)> backward) {
  Var<T> out(std::move(value), false);
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (any) {
    auto& node = *out.node();
    node.requires_grad = true;
    for (const auto& in : inputs) node.parents.push_back(in.node());
    node.backward = std::move(backward);
  }
  return out;
}

/// Accumulate `g` into the gradient of `n` if it wants one.
template <typename T, typename Expr>
inline void accumulate(Node<T>* n, const Expr& g) {
  if (n->requires_grad) n->grad_buffer() += g;
}

/// Reverse sweep from a scalar root. Gradients accumulate into leaves.
template <typename T>
void backward(const Var<T>& root) {
  require(root.rows() == 1 && root.cols() == 1, ErrorKind::ShapeMismatch,
          "backward() needs a scalar root");
  if (!root.requires_grad()) return;

  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node<T>* p = n->parents[i++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  root.node()->grad_buffer().setOnes();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward && n->grad.size() != 0) n->backward(n->grad);
  }
}

}  // namespace eigenet::ad
