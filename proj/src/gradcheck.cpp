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

#include "progseq/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace progseq {

GradCheckResult check_gradients(const std::string& name, const std::function<Tensor()>& loss_fn,
                                std::vector<Tensor> inputs, double h, double tolerance) {
  const auto start = std::chrono::steady_clock::now();
  GradCheckResult result;
  result.name = name;
  result.tolerance = tolerance;

  for (auto& t : inputs) t.zero_grad();
  loss_fn().backward();
  std::vector<Matrix> analytic;
  analytic.reserve(inputs.size());
  for (const auto& t : inputs) analytic.push_back(t.grad());

  NoGradGuard no_grad;
  for (size_t k = 0; k < inputs.size(); ++k) {
    Tensor& t = inputs[k];
    Matrix numeric(t.rows(), t.cols());
    for (Index i = 0; i < t.size(); ++i) {
      Scalar& slot = t.mutable_value().data()[i];
      const Scalar saved = slot;
      slot = saved + h;
      const Scalar up = loss_fn().item();
      slot = saved - h;
      const Scalar down = loss_fn().item();
      slot = saved;
      numeric.data()[i] = (up - down) / (2.0 * h);
    }
    const double scale = std::max({analytic[k].cwiseAbs().maxCoeff(), numeric.cwiseAbs().maxCoeff(), 1e-12});
    double err = (analytic[k] - numeric).cwiseAbs().maxCoeff() / scale;
    if (!std::isfinite(err)) err = std::numeric_limits<double>::infinity();
    result.max_rel_error = std::max(result.max_rel_error, err);
  }
  for (auto& t : inputs) t.zero_grad();
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace progseq
