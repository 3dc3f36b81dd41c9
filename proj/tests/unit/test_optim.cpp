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

#include "progseq/error.hpp"
#include "progseq/ops.hpp"
#include "progseq/optim.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace progseq;

TEST_CASE("adam first step with unit gradient moves each entry by -lr") {
  ParameterSet params;
  Tensor& w = params.add("w", Tensor(Matrix::Constant(2, 3, 0.5)));
  Adam adam(params);
  sum(w).backward();
  adam.step();
  for (Index i = 0; i < w.size(); ++i) CHECK(w.value().data()[i] == doctest::Approx(0.5 - 1e-3).epsilon(1e-9));
  CHECK(adam.state().step == 1);
}

TEST_CASE("adam with zero gradient leaves parameters unchanged") {
  ParameterSet params;
  Tensor& w = params.add("w", Tensor(Matrix::Constant(2, 2, 0.25)));
  Adam adam(params);
  adam.zero_grad();
  adam.step();
  CHECK(w.value() == Matrix::Constant(2, 2, 0.25));
}

TEST_CASE("adam follows the bias-corrected closed form over two steps") {
  ParameterSet params;
  Tensor& w = params.add("w", Tensor::scalar(1.0));
  AdamOptions o;
  o.learning_rate = 0.1;
  Adam adam(params, o);
  const Scalar g1 = 2.0, g2 = -1.0;
  Scalar m = 0, v = 0, x = 1.0;
  int t = 0;
  for (Scalar g : {g1, g2}) {
    adam.zero_grad();
    scale(w, g).backward();
    adam.step();
    ++t;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const Scalar mh = m / (1 - std::pow(0.9, t));
    const Scalar vh = v / (1 - std::pow(0.999, t));
    x -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
    CHECK(w.item() == doctest::Approx(x).epsilon(1e-12));
  }
}

TEST_CASE("adam names the parameter holding a non-finite gradient") {
  ParameterSet params;
  params.add("encoder.weight", Tensor::scalar(1.0));
  Tensor& bad = params.add("decoder.bias", Tensor::scalar(-1.0));
  Adam adam(params);
  sum(log(bad)).backward();  // grad is -1; make it NaN explicitly
  bad.node()->grad(0, 0) = std::numeric_limits<Scalar>::quiet_NaN();
  try {
    adam.step();
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("decoder.bias") != std::string::npos);
  }
}

TEST_CASE("parameter set rejects duplicate names and restores snapshots") {
  ParameterSet params;
  params.add("a", Tensor::scalar(1.0));
  CHECK_THROWS_AS(params.add("a", Tensor::scalar(2.0)), ConfigError);
  auto snap = params.snapshot();
  params.at("a").mutable_value()(0, 0) = 5.0;
  params.restore(snap);
  CHECK(params.at("a").item() == 1.0);
  CHECK(params.at("a").requires_grad());
}

TEST_CASE("xavier uniform: bound, variance and determinism") {
  const Matrix a = xavier_uniform({100, 100}, 42);
  const Matrix b = xavier_uniform({100, 100}, 42);
  CHECK(a == b);
  const Scalar bound = std::sqrt(6.0 / 200.0);
  CHECK(a.cwiseAbs().maxCoeff() <= bound);
  const Scalar mean = a.mean();
  const Scalar var = (a.array() - mean).square().sum() / static_cast<Scalar>(a.size());
  CHECK(std::abs(var - 2.0 / 200.0) < 0.2 * 2.0 / 200.0);
  CHECK(xavier_uniform({100, 100}, 43) != a);
}

TEST_CASE("plateau scheduler decays after patience stagnant epochs") {
  PlateauScheduler s(7, 0.7, 2e-4);
  Scalar lr = 1e-3;
  lr = s.step(1.0, lr);  // first value sets the best
  for (int e = 0; e < 6; ++e) {
    lr = s.step(1.0, lr);
    CHECK(lr == 1e-3);
  }
  lr = s.step(1.0, lr);
  CHECK(lr == doctest::Approx(7e-4));
  CHECK(s.bad_epochs() == 0);
}

TEST_CASE("plateau scheduler improvement resets the count") {
  PlateauScheduler s(2, 0.5, 0.0);
  Scalar lr = 1.0;
  lr = s.step(3.0, lr);
  lr = s.step(3.0, lr);
  lr = s.step(2.0, lr);  // strict improvement
  lr = s.step(2.0, lr);
  CHECK(lr == 1.0);
  lr = s.step(2.0, lr);
  CHECK(lr == 0.5);
}

TEST_CASE("plateau scheduler never goes below the floor or increases") {
  PlateauScheduler s(1, 0.7, 2e-4);
  Scalar lr = 1e-3;
  Scalar prev = lr;
  lr = s.step(1.0, lr);
  for (int e = 0; e < 50; ++e) {
    lr = s.step(1.0, lr);
    CHECK(lr <= prev);
    CHECK(lr >= 2e-4);
    prev = lr;
  }
  CHECK(lr == doctest::Approx(2e-4));
}
