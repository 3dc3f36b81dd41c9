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

#include <functional>
#include <string>
#include <vector>

namespace progseq {

struct GradCheckResult {
  std::string name;
  /// Worst tensor-wise relative error: max|analytic - numeric| divided by
  /// max(max|analytic|, max|numeric|), over every checked tensor.
  double max_rel_error = 0.0;
  double tolerance = 1e-4;
  double seconds = 0.0;
  bool passed() const { return max_rel_error <= tolerance; }
};

/// Compares reverse-mode gradients of `loss_fn` with respect to `inputs`
/// against central finite differences with step `h`. `loss_fn` must rebuild
/// its graph from the current input values on every call.
GradCheckResult check_gradients(const std::string& name, const std::function<Tensor()>& loss_fn,
                                std::vector<Tensor> inputs, double h = 1e-5, double tolerance = 1e-4);

/// Gradient checks over every primitive op and the composed training losses
/// (MSE, GAN discriminator/generator, MDN NLL), each on `seeds` random
/// inputs; one row per op or loss holding the worst seed.
std::vector<GradCheckResult> run_gradcheck_suite(int seeds = 20);

}  // namespace progseq
