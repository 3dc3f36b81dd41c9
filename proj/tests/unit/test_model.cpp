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
#include "progseq/model.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace progseq;

namespace {
ModelConfig tiny_config() {
  ModelConfig c;
  c.layers = 2;
  c.heads = 2;
  c.embed_dim = 8;
  c.joints = 2;
  c.vocab_size = 6;
  c.max_frames = 40;
  c.seed = 17;
  return c;
}

Matrix random_inputs(Index rows, Index cols, unsigned seed) {
  std::srand(seed);
  return Matrix::Random(rows, cols);
}
}  // namespace

TEST_CASE("positional encoding closed form") {
  const RowVector p0 = positional_encoding(0, 6);
  for (Index i = 0; i < 6; ++i) CHECK(p0(i) == (i % 2 == 0 ? 0.0 : 1.0));
  const RowVector p1 = positional_encoding(1, 6);
  CHECK(p1(0) == doctest::Approx(0.84147).epsilon(1e-5));
  CHECK(p1(2) == doctest::Approx(std::sin(1.0 / std::pow(10000.0, 2.0 / 6.0))));
  CHECK(p1(3) == doctest::Approx(std::cos(1.0 / std::pow(10000.0, 2.0 / 6.0))));
  CHECK(positional_encoding(5, 8) == positional_encoding(5, 8));
  CHECK(positional_encoding_table(4, 6).row(1) == p1);
}

TEST_CASE("causal mask hides only future positions") {
  const Mask m = causal_mask(3);
  CHECK_FALSE(m(0, 0));
  CHECK(m(0, 1));
  CHECK(m(0, 2));
  CHECK_FALSE(m(2, 0));
  CHECK_FALSE(m(2, 2));
  CHECK(m(1, 2));
}

TEST_CASE("attention with equal logits averages the values") {
  Tensor q(Matrix::Zero(2, 3));
  Tensor k(Matrix::Random(4, 3));
  Tensor v(Matrix::Random(4, 5));
  const Tensor out = attention(q, k, v);
  for (Index r = 0; r < 2; ++r) CHECK((out.value().row(r) - v.value().colwise().mean()).norm() < 1e-12);
}

TEST_CASE("causal attention at position 0 sees only key 0") {
  Tensor q(Matrix::Random(3, 2));
  Tensor k(Matrix::Random(3, 2));
  Tensor v(Matrix::Random(3, 4));
  const Mask m = causal_mask(3);
  const Tensor out = attention(q, k, v, &m);
  CHECK((out.value().row(0) - v.value().row(0)).norm() < 1e-12);
}

TEST_CASE("attention scales logits by the root of the key width") {
  Matrix qm(1, 1), km(2, 1), vm(2, 1);
  qm << 2.0;
  km << 1.0, -1.0;
  vm << 10.0, 20.0;
  // d_k = 1: scaled and unscaled logits coincide.
  const Scalar w0 = std::exp(2.0) / (std::exp(2.0) + std::exp(-2.0));
  CHECK(attention(Tensor(qm), Tensor(km), Tensor(vm)).item() == doctest::Approx(w0 * 10 + (1 - w0) * 20));
  Matrix q4 = Matrix::Constant(1, 4, 1.0), k4(2, 4);
  k4.row(0).setConstant(1.0);
  k4.row(1).setConstant(-1.0);
  const Scalar w = std::exp(2.0) / (std::exp(2.0) + std::exp(-2.0));  // logits +-4 / sqrt(4)
  CHECK(attention(Tensor(q4), Tensor(k4), Tensor(vm)).item() == doctest::Approx(w * 10 + (1 - w) * 20));
}

TEST_CASE("single head with identity projections equals plain attention") {
  const Index d = 4;
  AttentionWeights w{Tensor(Matrix::Identity(d, d)), Tensor(Matrix::Identity(d, d)), Tensor(Matrix::Identity(d, d)),
                     Tensor(Matrix::Identity(d, d))};
  Tensor x(Matrix::Random(3, d));
  Tensor mem(Matrix::Random(5, d));
  const Tensor a = multi_head_attention(x, mem, w, 1);
  const Tensor b = attention(x, mem, mem);
  CHECK((a.value() - b.value()).norm() < 1e-12);
  CHECK(multi_head_attention(x, mem, w, 2).rows() == 3);
  CHECK_THROWS_AS(multi_head_attention(x, mem, w, 3), ConfigError);
}

TEST_CASE("source embedding is an affine lookup") {
  const ProgressiveTransformer model(tiny_config());
  const std::vector<int> tokens = {3, 4, 3};
  const Tensor e = model.embed_source(tokens);
  CHECK(e.rows() == 3);
  CHECK(e.cols() == 8);
  CHECK(e.value().row(0) == e.value().row(2));
  const Matrix expected = model.parameters().at("src_embed.weight").value().row(4) +
                          model.parameters().at("src_embed.bias").value();
  CHECK(e.value().row(1) == expected);
  const std::vector<int> bad = {6};
  CHECK_THROWS_AS(model.embed_source(bad), ConfigError);
}

TEST_CASE("encoder output depends on token order") {
  const ProgressiveTransformer model(tiny_config());
  const std::vector<int> ab = {2, 3};
  const std::vector<int> ba = {3, 2};
  const Tensor x = model.encode(ab);
  CHECK(x.rows() == 2);
  CHECK(x.cols() == 8);
  CHECK((x.value() - model.encode(ba).value()).norm() > 1e-6);
  CHECK(model.encode(ab).value() == x.value());
  CHECK_THROWS_AS(model.encode(std::vector<int>{}), ConfigError);
}

TEST_CASE("joint embedding is affine and maps the start frame to the bias") {
  ProgressiveTransformer model(tiny_config());
  model.parameters().at("trg_embed.bias").mutable_value().setRandom();
  const Matrix a = Matrix::Random(1, 7);
  const Matrix b = Matrix::Random(1, 7);
  const Matrix bias = model.parameters().at("trg_embed.bias").value();
  const Matrix ea = model.embed_joints(Tensor(a)).value();
  const Matrix eb = model.embed_joints(Tensor(b)).value();
  const Matrix eab = model.embed_joints(Tensor(Matrix(a + b))).value();
  CHECK((eab - (ea + eb - bias)).norm() < 1e-12);
  CHECK(model.embed_joints(Tensor(Matrix::Zero(1, 7))).value() == bias);
  CHECK_THROWS_AS(model.embed_joints(Tensor(Matrix::Zero(1, 6))), ShapeError);
}

TEST_CASE("decoder is causal: future inputs never change past outputs") {
  const ProgressiveTransformer model(tiny_config());
  const Tensor memory = model.encode(std::vector<int>{2, 5, 4});
  Matrix in = random_inputs(6, 7, 3);
  const Matrix base = model.decode(Tensor(in), memory).value();
  CHECK(base.rows() == 6);
  in.bottomRows(3).setRandom();
  const Matrix changed = model.decode(Tensor(in), memory).value();
  CHECK((base.topRows(3) - changed.topRows(3)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((base.bottomRows(3) - changed.bottomRows(3)).norm() > 1e-6);
}

TEST_CASE("future window widens the regression output") {
  ModelConfig c = tiny_config();
  c.future_to = 5;
  const ProgressiveTransformer model(c);
  const Tensor memory = model.encode(std::vector<int>{2});
  CHECK(model.decode(Tensor(Matrix::Zero(4, 7)), memory).cols() == 5 * 7);
}

TEST_CASE("mse loss examples") {
  Tensor y(Matrix::Random(4, 3));
  CHECK(mse_loss(y, y).item() == 0.0);
  Tensor shifted(Matrix(y.value().array() + 0.5));
  CHECK(mse_loss(shifted, y).item() == doctest::Approx(0.25));
  Tensor pred(Matrix::Random(4, 3));
  std::vector<bool> only_two = {false, false, true, false};
  const Scalar frame_mse = (pred.value().row(2) - y.value().row(2)).squaredNorm() / 3.0;
  CHECK(mse_loss(pred, y, only_two).item() == doctest::Approx(frame_mse));
  CHECK_THROWS_AS(mse_loss(pred, Tensor(Matrix::Zero(3, 3))), ShapeError);
}

TEST_CASE("counter decoding with stub heads") {
  const int joints = 2;
  const Index width = 7;
  GenerateOptions fb;

  SUBCASE("counter 1 stops after one frame") {
    auto step = [&](const Matrix&) {
      RowVector r = RowVector::Zero(width);
      r(width - 1) = 1.0;
      return r;
    };
    const Generation g = counter_decode(step, joints, 300, 0.02, fb);
    CHECK(g.pose.length() == 1);
    CHECK_FALSE(g.truncated);
  }
  SUBCASE("counter 0 runs to the frame limit") {
    auto step = [&](const Matrix&) { return RowVector(RowVector::Zero(width)); };
    const Generation g = counter_decode(step, joints, 300, 0.02, fb);
    CHECK(g.pose.length() == 300);
    CHECK(g.truncated);
  }
  SUBCASE("linear counter 0.25 u stops at four frames") {
    auto step = [&](const Matrix& inputs) {
      RowVector r = RowVector::Zero(width);
      r(width - 1) = 0.25 * static_cast<Scalar>(inputs.rows());
      return r;
    };
    const Generation g = counter_decode(step, joints, 300, 0.02, fb);
    CHECK(g.pose.length() == 4);
    CHECK(g.predicted_counters == std::vector<Scalar>{0.25, 0.5, 0.75, 1.0});
    CHECK(g.pose.counters == std::vector<Scalar>{0.25, 0.5, 0.75, 1.0});
  }
  SUBCASE("predictions are fed back as the next input") {
    std::vector<Matrix> seen;
    auto step = [&](const Matrix& inputs) {
      seen.push_back(inputs);
      RowVector r = RowVector::Constant(width, static_cast<Scalar>(inputs.rows()));
      r(width - 1) = 0.3 * static_cast<Scalar>(inputs.rows());
      return r;
    };
    counter_decode(step, joints, 300, 0.02, fb);
    REQUIRE(seen.size() == 4);
    CHECK(seen[0].isZero());
    CHECK(seen[3].row(3)(0) == 3.0);
    CHECK(seen[3].row(3)(width - 1) == doctest::Approx(0.9));
  }
  SUBCASE("teacher timing produces exactly the reference length") {
    GenerateOptions tt;
    tt.mode = DecodeMode::teacher_timing;
    tt.reference_length = 12;
    std::vector<Scalar> fed;
    auto step = [&](const Matrix& inputs) {
      fed.push_back(inputs(inputs.rows() - 1, width - 1));
      RowVector r = RowVector::Zero(width);
      r(width - 1) = 1.0;  // would stop immediately in feedback mode
      return r;
    };
    const Generation g = counter_decode(step, joints, 300, 0.02, tt);
    CHECK(g.pose.length() == 12);
    CHECK(fed[0] == 0.0);
    CHECK(fed[6] == doctest::Approx(6.0 / 12.0));
  }
  SUBCASE("just-counter feedback zeroes the pose channels") {
    std::vector<Matrix> seen;
    auto step = [&](const Matrix& inputs) {
      seen.push_back(inputs);
      RowVector r = RowVector::Constant(width, 0.7);
      r(width - 1) = 0.5 * static_cast<Scalar>(inputs.rows());
      return r;
    };
    counter_decode(step, joints, 300, 0.02, fb, true);
    REQUIRE(seen.size() == 2);
    CHECK(seen[1].row(1).leftCols(width - 1).isZero());
    CHECK(seen[1](1, width - 1) == 0.5);
  }
}

TEST_CASE("generation from an untrained model terminates within the frame limit") {
  ModelConfig c = tiny_config();
  c.max_frames = 25;
  const ProgressiveTransformer model(c);
  for (int t = 2; t < 6; ++t) {
    const Generation g = model.generate(std::vector<int>{t, 2});
    CHECK(g.pose.length() >= 1);
    CHECK(g.pose.length() <= 25);
    CHECK(g.pose.frames.cols() == 6);
  }
  GenerateOptions tt;
  tt.mode = DecodeMode::teacher_timing;
  tt.reference_length = 12;
  CHECK(model.generate(std::vector<int>{3}, tt).pose.length() == 12);
}

TEST_CASE("cached decoding matches the full recompute") {
  for (const bool pre_norm : {false, true}) {
    for (const OutputHead head : {OutputHead::regression, OutputHead::mdn}) {
      CAPTURE(pre_norm);
      ModelConfig c = tiny_config();
      c.pre_norm = pre_norm;
      c.head = head;
      c.heads = head == OutputHead::mdn ? 1 : 2;
      const ProgressiveTransformer model(c);
      const std::vector<int> tokens = {4, 2, 5};
      Tensor memory;
      {
        NoGradGuard g;
        memory = model.encode(tokens);
      }
      const Matrix inputs = random_inputs(15, c.frame_dim(), 31);
      IncrementalDecoder dec(model, memory);
      Scalar gap = 0;
      for (Index u = 0; u < inputs.rows(); ++u) {
        const RowVector cached = dec.step(inputs.row(u));
        const RowVector full = model.predict_next(memory, inputs.topRows(u + 1));
        gap = std::max(gap, (cached - full).cwiseAbs().maxCoeff());
      }
      CHECK(dec.length() == 15);
      CHECK(gap < 1e-9);
    }
  }
}

TEST_CASE("model config validation") {
  ModelConfig c = tiny_config();
  c.heads = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_config();
  c.head = OutputHead::mdn;
  c.future_to = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(parse_augmentation("just_counter") == Augmentation::just_counter);
  CHECK_THROWS_AS(parse_output_head("softmax"), ConfigError);
}
