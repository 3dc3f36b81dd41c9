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

#include "progseq/tensor.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace progseq {

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

/// Ordered collection of trainable tensors. Order is creation order and is
/// the order used for initialisation, checkpoints and optimiser state.
class ParameterSet {
 public:
  Tensor& add(std::string name, Tensor tensor);
  const std::vector<NamedParameter>& items() const { return items_; }
  std::vector<NamedParameter>& items() { return items_; }
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  bool contains(const std::string& name) const;
  size_t size() const { return items_.size(); }
  Index element_count() const;
  void zero_grad();
  /// Deep copy of the values, in order.
  std::vector<Matrix> snapshot() const;
  void restore(const std::vector<Matrix>& values);

 private:
  std::vector<NamedParameter> items_;
};

/// Xavier/Glorot uniform in +-sqrt(6 / (fan_in + fan_out)). For a 2-D shape
/// (in, out) the fans are the two dims; a 1-D shape uses its length for both.
Matrix xavier_uniform(const std::vector<Index>& shape, std::mt19937_64& rng);
Matrix xavier_uniform(const std::vector<Index>& shape, std::uint64_t seed);
/// Same bound rule with explicit fans, e.g. for convolution kernels.
Matrix xavier_uniform(Index rows, Index cols, Index fan_in, Index fan_out, std::mt19937_64& rng);

struct AdamOptions {
  Scalar learning_rate = 1e-3;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;
  Scalar min_learning_rate = 0.0;
};

struct OptimizerState {
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::int64_t step = 0;
  Scalar learning_rate = 1e-3;
};

class Adam {
 public:
  Adam(ParameterSet& params, AdamOptions options = {});

  /// One bias-corrected update using the current grads. Throws NumericError
  /// naming the parameter if any gradient entry is NaN or Inf.
  void step();
  void zero_grad() { params_->zero_grad(); }

  Scalar learning_rate() const { return state_.learning_rate; }
  /// Clamped to the configured minimum.
  void set_learning_rate(Scalar lr);
  const OptimizerState& state() const { return state_; }
  const AdamOptions& options() const { return options_; }

 private:
  ParameterSet* params_;
  AdamOptions options_;
  OptimizerState state_;
};

/// Multiplies the learning rate by `factor` once `patience` consecutive
/// epochs pass without a strictly lower monitored value; floored at min_lr.
class PlateauScheduler {
 public:
  PlateauScheduler(int patience, Scalar factor, Scalar min_lr);

  /// Returns the learning rate to use for the next epoch.
  Scalar step(Scalar monitored, Scalar current_lr);
  int bad_epochs() const { return bad_epochs_; }
  Scalar best() const { return best_; }

 private:
  int patience_;
  Scalar factor_;
  Scalar min_lr_;
  Scalar best_;
  int bad_epochs_ = 0;
};

}  // namespace progseq
