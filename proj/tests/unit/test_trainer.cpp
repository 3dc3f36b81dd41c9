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
#include "progseq/trainer.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>

using namespace progseq;

namespace {
const Corpus& tiny_corpus() {
  static const Corpus c = [] {
    CorpusOptions o;
    o.seed = 12;
    o.vocab_size = 4;
    o.sentence_count = 30;
    o.joints = 2;
    o.min_sentence_tokens = 1;
    o.max_sentence_tokens = 3;
    o.min_template_frames = 8;
    o.max_template_frames = 10;
    return generate_corpus(o);
  }();
  return c;
}

TrainConfig tiny_config(Regime regime = Regime::regression) {
  TrainConfig c;
  c.regime = regime;
  c.epochs = 2;
  c.batch_size = 4;
  c.seed = 7;
  c.model.layers = 1;
  c.model.heads = 2;
  c.model.embed_dim = 16;
  c.model.seed = 3;
  if (regime == Regime::mdn || regime == Regime::mdn_adv) c.model.head = OutputHead::mdn;
  c.discriminator.layers = 2;
  c.discriminator.channels = 8;
  c.discriminator.source_dim = 4;
  return c;
}

std::vector<size_t> batch_at(size_t step, size_t size, size_t total) {
  std::vector<size_t> b;
  for (size_t i = 0; i < size; ++i) b.push_back((step * size + i) % total);
  return b;
}

bool bit_equal(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].rows() != b[i].rows() || a[i].cols() != b[i].cols()) return false;
    if (std::memcmp(a[i].data(), b[i].data(), sizeof(Scalar) * static_cast<size_t>(a[i].size())) != 0) return false;
  }
  return true;
}
}  // namespace

TEST_CASE("single pair overfits below 1e-3 within 500 steps") {
  TrainConfig c = tiny_config();
  c.model.embed_dim = 64;
  c.model.augmentation = Augmentation::none;
  Trainer t(c, tiny_corpus());
  const std::vector<size_t> one = {0};
  const PreparedExample p = t.prepare(tiny_corpus().train[0], false);
  Scalar loss = std::numeric_limits<Scalar>::infinity();
  int steps = 0;
  while (steps < 500 && loss >= 1e-3) {
    t.train_step(one);
    ++steps;
    NoGradGuard g;
    loss = t.example_loss(p).item();
  }
  CHECK(loss < 1e-3);
  MESSAGE("overfit reached " << loss << " after " << steps << " steps");
}

TEST_CASE("identical seeds give identical loss traces") {
  auto trace = [] {
    Trainer t(tiny_config(), tiny_corpus());
    std::vector<double> losses;
    for (const EpochLog& e : t.train().epochs) {
      losses.push_back(e.train_loss);
      losses.push_back(e.dev_loss);
    }
    return losses;
  };
  const std::vector<double> a = trace();
  CHECK(a == trace());
  TrainConfig other = tiny_config();
  other.seed = 8;
  Trainer t(other, tiny_corpus());
  CHECK(t.train().epochs.front().train_loss != a.front());
}

TEST_CASE("adversarial training with zero GAN weight is regression, bit for bit") {
  TrainConfig reg = tiny_config(Regime::regression);
  TrainConfig adv = tiny_config(Regime::adversarial);
  adv.lambda_gan = 0.0;
  Trainer a(reg, tiny_corpus());
  Trainer b(adv, tiny_corpus());
  REQUIRE(bit_equal(a.model().parameters().snapshot(), b.model().parameters().snapshot()));
  const size_t n = tiny_corpus().train.size();
  for (size_t step = 0; step < 6; ++step) {
    const auto idx = batch_at(step, 4, n);
    const double la = a.train_step(idx);
    const double lb = b.train_step(idx);
    CHECK(la == lb);
    CHECK(bit_equal(a.model().parameters().snapshot(), b.model().parameters().snapshot()));
  }
  CHECK(b.discriminator() != nullptr);
}

TEST_CASE("single fixed-sigma mixture tracks regression for 50 steps") {
  TrainConfig reg = tiny_config(Regime::regression);
  TrainConfig mdn = tiny_config(Regime::mdn);
  mdn.model.mixtures = 1;
  mdn.model.mdn_fixed_sigma = true;
  const int width = 3 * tiny_corpus().joints + 1;
  mdn.lambda_mdn = 2.0 / width;
  Trainer a(reg, tiny_corpus());
  Trainer b(mdn, tiny_corpus());
  const ParameterSet& pa = a.model().parameters();
  const ParameterSet& pb = b.model().parameters();
  auto mapped = [](const std::string& name) {
    if (name == "output.weight") return std::string("mdn.means.weight");
    if (name == "output.bias") return std::string("mdn.means.bias");
    return name;
  };
  auto max_gap = [&] {
    Scalar gap = 0;
    for (const auto& p : pa.items()) gap = std::max(gap, (p.tensor.value() - pb.at(mapped(p.name)).value()).cwiseAbs().maxCoeff());
    return gap;
  };
  REQUIRE(max_gap() == 0.0);
  const size_t n = tiny_corpus().train.size();
  for (size_t step = 0; step < 50; ++step) {
    const auto idx = batch_at(step, 4, n);
    a.train_step(idx);
    b.train_step(idx);
  }
  CHECK(max_gap() < 1e-6);
  // Mixture-weight logits receive no gradient with one component.
  CHECK(pb.at("mdn.logits.weight").grad().isZero());
}

TEST_CASE("non-finite loss aborts naming the batch") {
  Trainer t(tiny_config(), tiny_corpus());
  const std::vector<size_t> idx = {0, 1};
  t.train_step(idx);
  t.model().parameters().at("output.bias").mutable_value()(0) = std::nan("");
  try {
    t.train_step(idx);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("batch 1") != std::string::npos);
  }
  const std::vector<size_t> outside = {999};
  CHECK_THROWS_AS(t.train_step(outside), ConfigError);
}

TEST_CASE("train config validation") {
  CHECK_NOTHROW(tiny_config().validate());
  TrainConfig c = tiny_config();
  c.scheduler.factor = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_config();
  c.scheduler.patience = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_config();
  c.regime = Regime::mdn;  // regression head
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_config();
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(parse_regime("wgan"), ConfigError);
  for (const std::string& r : regime_names()) CHECK(to_string(parse_regime(r)) == r);
}

TEST_CASE("presets") {
  const TrainConfig base = preset("base");
  CHECK(base.model.layers == 2);
  CHECK(base.model.heads == 4);
  CHECK(base.model.embed_dim == 512);
  CHECK(base.model.augmentation == Augmentation::noise);
  CHECK(base.noise_rate == 5.0);
  CHECK(base.learning_rate == 1e-3);
  CHECK(base.scheduler.patience == 7);
  CHECK(base.scheduler.factor == 0.7);
  CHECK(base.scheduler.min_lr == 2e-4);
  const TrainConfig adv = preset("adversarial");
  CHECK(adv.regime == Regime::adversarial);
  CHECK(adv.model.heads == 2);
  CHECK(adv.model.embed_dim == 256);
  CHECK(adv.discriminator.layers == 6);
  CHECK(preset("mdn").model.head == OutputHead::mdn);
  for (const std::string& name : preset_names()) CHECK_NOTHROW(preset(name).validate());
  CHECK_THROWS_AS(preset("huge"), ConfigError);
}

TEST_CASE("learning-rate trace and best-dev retention") {
  TrainConfig c = tiny_config();
  c.epochs = 6;
  c.learning_rate = 3e-3;
  c.scheduler.patience = 1;
  c.scheduler.factor = 0.5;
  c.scheduler.min_lr = 1e-3;
  Trainer t(c, tiny_corpus());
  const TrainLog log = t.train();
  REQUIRE(log.epochs.size() == 6);
  for (size_t i = 0; i < log.epochs.size(); ++i) {
    CHECK(log.epochs[i].epoch == static_cast<int>(i) + 1);
    CHECK(log.epochs[i].learning_rate >= 1e-3);
    if (i > 0) CHECK(log.epochs[i].learning_rate <= log.epochs[i - 1].learning_rate);
  }
  REQUIRE(log.best_epoch >= 1);
  Scalar best = std::numeric_limits<Scalar>::infinity();
  for (const EpochLog& e : log.epochs) best = std::min(best, e.dev_loss);
  CHECK(log.best_dev_loss == best);
  CHECK(log.best_dev_loss <= log.epochs.back().dev_loss);
  // The model holds the best-dev parameters.
  CHECK(t.dev_loss() == log.best_dev_loss);
}

TEST_CASE("epoch log serialises as one JSON object") {
  EpochLog e;
  e.epoch = 3;
  e.train_loss = 0.5;
  e.dev_loss = 0.25;
  e.learning_rate = 1e-3;
  const std::string json = e.to_json();
  CHECK(json.find('\n') == std::string::npos);
  CHECK(json.find("\"epoch\":3") != std::string::npos);
  CHECK(json.find("\"dev_scores\":null") != std::string::npos);
}
