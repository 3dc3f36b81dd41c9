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

#include "progseq/optim.hpp"

#include "progseq/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace progseq {

Tensor& ParameterSet::add(std::string name, Tensor tensor) {
  if (contains(name)) throw ConfigError("duplicate parameter name: " + name);
  tensor.set_requires_grad(true);
  items_.push_back({std::move(name), std::move(tensor)});
  return items_.back().tensor;
}

const Tensor& ParameterSet::at(const std::string& name) const {
  for (const auto& p : items_) {
    if (p.name == name) return p.tensor;
  }
  throw ConfigError("unknown parameter: " + name);
}

Tensor& ParameterSet::at(const std::string& name) {
  return const_cast<Tensor&>(static_cast<const ParameterSet&>(*this).at(name));
}

bool ParameterSet::contains(const std::string& name) const {
  return std::any_of(items_.begin(), items_.end(), [&](const auto& p) { return p.name == name; });
}

Index ParameterSet::element_count() const {
  Index n = 0;
  for (const auto& p : items_) n += p.tensor.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : items_) p.tensor.zero_grad();
}

std::vector<Matrix> ParameterSet::snapshot() const {
  std::vector<Matrix> out;
  out.reserve(items_.size());
  for (const auto& p : items_) out.push_back(p.tensor.value());
  return out;
}

void ParameterSet::restore(const std::vector<Matrix>& values) {
  if (values.size() != items_.size()) throw ConfigError("restore: parameter count mismatch");
  for (size_t i = 0; i < items_.size(); ++i) items_[i].tensor.mutable_value() = values[i];
}

Matrix xavier_uniform(Index rows, Index cols, Index fan_in, Index fan_out, std::mt19937_64& rng) {
  if (rows < 1 || cols < 1 || fan_in + fan_out < 1) throw ConfigError("xavier_uniform: invalid shape");
  const Scalar bound = std::sqrt(6.0 / static_cast<Scalar>(fan_in + fan_out));
  std::uniform_real_distribution<Scalar> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Matrix xavier_uniform(const std::vector<Index>& shape, std::mt19937_64& rng) {
  if (shape.empty() || shape.size() > 2) throw ConfigError("xavier_uniform: shape must have 1 or 2 dims");
  for (Index d : shape) {
    if (d < 1) throw ConfigError("xavier_uniform: dims must be positive");
  }
  if (shape.size() == 1) return xavier_uniform(1, shape[0], shape[0], shape[0], rng);
  return xavier_uniform(shape[0], shape[1], shape[0], shape[1], rng);
}

Matrix xavier_uniform(const std::vector<Index>& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return xavier_uniform(shape, rng);
}

Adam::Adam(ParameterSet& params, AdamOptions options) : params_(&params), options_(options) {
  if (options_.learning_rate <= 0) throw ConfigError("Adam: learning rate must be positive");
  state_.learning_rate = std::max(options_.learning_rate, options_.min_learning_rate);
  for (const auto& p : params.items()) {
    state_.first_moment.push_back(Matrix::Zero(p.tensor.rows(), p.tensor.cols()));
    state_.second_moment.push_back(Matrix::Zero(p.tensor.rows(), p.tensor.cols()));
  }
}

void Adam::set_learning_rate(Scalar lr) { state_.learning_rate = std::max(lr, options_.min_learning_rate); }

void Adam::step() {
  auto& items = params_->items();
  if (items.size() != state_.first_moment.size()) throw ConfigError("Adam: parameter set changed after construction");
  for (const auto& p : items) {
    if (p.tensor.has_grad() && !p.tensor.node()->grad.allFinite()) {
      throw NumericError("Adam: non-finite gradient in parameter '" + p.name + "'");
    }
  }
  state_.step += 1;
  const Scalar t = static_cast<Scalar>(state_.step);
  const Scalar bc1 = 1.0 - std::pow(options_.beta1, t);
  const Scalar bc2 = 1.0 - std::pow(options_.beta2, t);
  const Scalar lr = state_.learning_rate;
  for (size_t i = 0; i < items.size(); ++i) {
    Tensor& param = items[i].tensor;
    Matrix& m = state_.first_moment[i];
    Matrix& v = state_.second_moment[i];
    if (param.has_grad()) {
      const Matrix& g = param.node()->grad;
      m = options_.beta1 * m + (1.0 - options_.beta1) * g;
      v = options_.beta2 * v + (1.0 - options_.beta2) * g.cwiseProduct(g);
    } else {
      m *= options_.beta1;
      v *= options_.beta2;
    }
    param.mutable_value().array() -=
        lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + options_.eps);
  }
}

PlateauScheduler::PlateauScheduler(int patience, Scalar factor, Scalar min_lr)
    : patience_(patience), factor_(factor), min_lr_(min_lr), best_(std::numeric_limits<Scalar>::infinity()) {
  if (patience < 1) throw ConfigError("scheduler patience must be >= 1");
  if (!(factor > 0 && factor < 1)) throw ConfigError("scheduler decay factor must lie in (0,1)");
}

Scalar PlateauScheduler::step(Scalar monitored, Scalar current_lr) {
  if (monitored < best_) {
    best_ = monitored;
    bad_epochs_ = 0;
    return current_lr;
  }
  if (++bad_epochs_ >= patience_) {
    bad_epochs_ = 0;
    return std::max(current_lr * factor_, min_lr_);
  }
  return current_lr;
}

}  // namespace progseq
