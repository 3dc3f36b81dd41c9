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

#include "progseq/adversarial.hpp"
#include "progseq/data.hpp"
#include "progseq/eval.hpp"
#include "progseq/model.hpp"
#include "progseq/optim.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace progseq {

enum class Regime { regression, adversarial, mdn, mdn_adv };

std::string to_string(Regime r);
/// ConfigError listing the valid names on failure.
Regime parse_regime(const std::string& s);
const std::vector<std::string>& regime_names();

struct SchedulerConfig {
  int patience = 7;
  double factor = 0.7;
  double min_lr = 2e-4;
};

struct TrainConfig {
  Regime regime = Regime::regression;
  int epochs = 30;
  int batch_size = 16;
  double learning_rate = 1e-3;
  SchedulerConfig scheduler;
  double lambda_reg = 1.0;
  double lambda_gan = 0.001;
  double lambda_mdn = 100.0;
  /// r_n; only used with Augmentation::noise.
  double noise_rate = 5.0;
  std::uint64_t seed = 1;
  ModelConfig model;
  DiscriminatorConfig discriminator;
  /// Back-translation on the dev split every k epochs (0 disables).
  int dev_eval_every = 0;
  /// Dev sentences used for back-translation (0 = all).
  int dev_eval_limit = 0;
  int eval_jobs = 1;
  /// Stop before an epoch that would likely overrun this budget (0 = none).
  double time_budget_seconds = 0;

  void validate() const;
};

/// Named configurations: "base" (2 layers, 4 heads, 512, regression),
/// "adversarial" (2 layers, 2 heads, 256, adversarial), "mdn" (base
/// dimensions, MDN head with M = 4) and "mdn_adv".
TrainConfig preset(const std::string& name);
const std::vector<std::string>& preset_names();

struct EpochLog {
  int epoch = 0;
  double train_loss = 0;
  double dev_loss = 0;
  /// Present when back-translation ran this epoch.
  std::optional<ScoreReport> dev_scores;
  double learning_rate = 0;
  double seconds = 0;

  std::string to_json() const;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  int best_epoch = -1;
  double best_dev_loss = 0;
};

/// Per-example tensors for one teacher-forced pass.
struct PreparedExample {
  Matrix inputs;   // U x (3J+1), start frame first
  Matrix targets;  // U x (W * (3J+1))
  Matrix mask;     // same shape, 1 where the target frame exists
  std::vector<bool> frame_valid;  // first window block
  const Example* source = nullptr;
};

class Trainer {
 public:
  Trainer(TrainConfig config, const Corpus& corpus);

  const TrainConfig& config() const { return config_; }
  ProgressiveTransformer& model() { return *model_; }
  const ProgressiveTransformer& model() const { return *model_; }
  /// Null for the non-adversarial regimes.
  Discriminator* discriminator() { return disc_.get(); }
  Adam& optimizer() { return *g_opt_; }
  const NoiseStats& noise_stats() const { return noise_; }

  /// Inputs (augmented per the model config) and clean future targets.
  PreparedExample prepare(const Example& ex, bool augment) const;
  /// Unweighted generator loss of one prepared example, on the tape: the
  /// masked MSE, or the mixture NLL averaged over frames.
  Tensor example_loss(const PreparedExample& p) const;

  /// One optimiser step on the given train-split indices. Returns the mean
  /// generator loss. NumericError names the batch on non-finite values.
  double train_step(std::span<const size_t> indices);
  /// Shuffled pass over the train split; refreshes the noise statistics.
  double run_epoch();
  /// Mean teacher-forced loss on the dev split without augmentation.
  double dev_loss() const;

  /// Full loop with plateau scheduling and best-dev retention. The model
  /// ends holding the best-dev parameters. `on_epoch` sees each entry.
  TrainLog train(const std::function<void(const EpochLog&)>& on_epoch = {});

 private:
  /// Loss plus the poses the critic sees (first window block, no counter).
  GeneratorPass forward(const PreparedExample& p) const;

  TrainConfig config_;
  const Corpus* corpus_;
  std::unique_ptr<ProgressiveTransformer> model_;
  std::unique_ptr<Adam> g_opt_;
  std::unique_ptr<Discriminator> disc_;
  std::unique_ptr<Adam> d_opt_;
  NoiseStats noise_;
  std::mt19937_64 shuffle_rng_;
  mutable std::mt19937_64 noise_rng_;
  std::int64_t batch_counter_ = 0;
};

}  // namespace progseq
