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

#pragma once

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace progseq {

using Scalar = double;
using Index = Eigen::Index;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// One vertex of the gradient tape.
///
/// Every tensor is rank <= 2 and stored as a row-major matrix; vectors are
/// 1 x n. `backward` reads `grad` and accumulates into the grads of `inputs`.
struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  bool is_leaf() const { return !backward; }
};

/// Dense tensor handle with reverse-mode tape participation.
///
/// Copies share the underlying node. Gradients of leaf tensors accumulate
/// across calls to backward() until zero_grad() is called explicitly.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Matrix value, bool requires_grad = false);
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Index rows, Index cols, bool requires_grad = false);
  static Tensor scalar(Scalar v, bool requires_grad = false);
  static Tensor row(const std::vector<Scalar>& values, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  Index size() const { return node_->value.size(); }
  std::vector<Index> shape() const { return {rows(), cols()}; }
  std::string shape_string() const;

  const Matrix& value() const { return node_->value; }
  /// Direct write access, for optimisers and finite-difference probes only.
  Matrix& mutable_value() { return node_->value; }
  Scalar item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on);
  bool has_grad() const { return node_->grad.size() == node_->value.size() && node_->grad.size() > 0; }
  /// Gradient; zeros if backward never reached this tensor.
  Matrix grad() const;
  void zero_grad();

  /// Same values, cut from the tape.
  Tensor detach() const;

  /// Reverse pass from a 1x1 tensor. Throws ShapeError on non-scalar loss.
  void backward() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Disables tape recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

}  // namespace progseq
