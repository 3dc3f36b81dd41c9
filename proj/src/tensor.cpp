// Copyright 2026 The progseq Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "progseq/tensor.hpp"

#include "progseq/error.hpp"

#include <unordered_set>
#include <utility>

namespace progseq {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor::Tensor(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Index rows, Index cols, bool requires_grad) {
  return Tensor(Matrix::Zero(rows, cols), requires_grad);
}

Tensor Tensor::scalar(Scalar v, bool requires_grad) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return Tensor(std::move(m), requires_grad);
}

Tensor Tensor::row(const std::vector<Scalar>& values, bool requires_grad) {
  Matrix m(1, static_cast<Index>(values.size()));
  for (Index i = 0; i < m.cols(); ++i) m(0, i) = values[static_cast<size_t>(i)];
  return Tensor(std::move(m), requires_grad);
}

std::string Tensor::shape_string() const {
  return "[" + std::to_string(rows()) + "x" + std::to_string(cols()) + "]";
}

Scalar Tensor::item() const {
  if (size() != 1) throw ShapeError("item: expected a 1x1 tensor, got " + shape_string());
  return node_->value(0, 0);
}

void Tensor::set_requires_grad(bool on) {
  if (!node_->is_leaf()) throw Error("set_requires_grad: only leaf tensors can be toggled");
  node_->requires_grad = on;
}

Matrix Tensor::grad() const {
  if (has_grad()) return node_->grad;
  return Matrix::Zero(rows(), cols());
}

void Tensor::zero_grad() {
  if (node_->grad.size() > 0) node_->grad.setZero();
}

Tensor Tensor::detach() const { return Tensor(node_->value, false); }

void Tensor::backward() const {
  if (size() != 1) throw ShapeError("backward: loss must be 1x1, got " + shape_string());
  if (!node_->requires_grad) return;

  // Iterative post-order DFS; `order` ends up topologically sorted (inputs first).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (!n->is_leaf()) n->grad.resize(0, 0);
  }
  if (node_->grad.size() == 0) {
    node_->grad = Matrix::Ones(1, 1);
  } else {
    node_->grad(0, 0) += 1.0;
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->is_leaf() || n->grad.size() == 0) continue;
    n->backward(*n);
  }
}

}  // namespace progseq
