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

#include "progseq/trainer.hpp"

#include "progseq/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace progseq {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool uses_mdn(Regime r) { return r == Regime::mdn || r == Regime::mdn_adv; }
bool uses_critic(Regime r) { return r == Regime::adversarial || r == Regime::mdn_adv; }

}  // namespace

const std::vector<std::string>& regime_names() {
  static const std::vector<std::string> names = {"regression", "adversarial", "mdn", "mdn_adv"};
  return names;
}

std::string to_string(Regime r) { return regime_names()[static_cast<size_t>(r)]; }

Regime parse_regime(const std::string& s) {
  const auto& names = regime_names();
  for (size_t i = 0; i < names.size(); ++i) {
    if (names[i] == s) return static_cast<Regime>(i);
  }
  throw ConfigError("unknown regime '" + s + "' (expected regression, adversarial, mdn or mdn_adv)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(learning_rate > 0)) throw ConfigError("train: learning_rate must be positive");
  if (scheduler.patience < 1) throw ConfigError("train: scheduler patience must be >= 1");
  if (!(scheduler.factor > 0 && scheduler.factor < 1)) throw ConfigError("train: scheduler factor must lie in (0, 1)");
  if (scheduler.min_lr < 0) throw ConfigError("train: scheduler min_lr must be >= 0");
  if (lambda_reg < 0 || lambda_gan < 0 || lambda_mdn < 0) throw ConfigError("train: loss weights must be >= 0");
  if (noise_rate < 0) throw ConfigError("train: noise_rate must be >= 0");
  if (dev_eval_every < 0 || dev_eval_limit < 0 || eval_jobs < 1) throw ConfigError("train: invalid dev evaluation settings");
  if (time_budget_seconds < 0) throw ConfigError("train: time budget must be >= 0");
  model.validate();
  if (uses_mdn(regime) != (model.head == OutputHead::mdn)) {
    throw ConfigError("train: regime " + to_string(regime) + " does not match the " + to_string(model.head) + " head");
  }
  if (uses_critic(regime)) discriminator.validate();
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"base", "adversarial", "mdn", "mdn_adv"};
  return names;
}

TrainConfig preset(const std::string& name) {
  TrainConfig c;
  c.model.layers = 2;
  c.model.heads = 4;
  c.model.embed_dim = 512;
  c.model.augmentation = Augmentation::noise;
  if (name == "base") return c;
  if (name == "adversarial") {
    c.regime = Regime::adversarial;
    c.model.heads = 2;
    c.model.embed_dim = 256;
    c.lambda_reg = 100.0;
    c.lambda_gan = 0.001;
    return c;
  }
  if (name == "mdn" || name == "mdn_adv") {
    c.regime = name == "mdn" ? Regime::mdn : Regime::mdn_adv;
    c.model.head = OutputHead::mdn;
    c.model.mixtures = 4;
    c.lambda_mdn = 100.0;
    c.lambda_gan = 0.001;
    return c;
  }
  throw ConfigError("unknown preset '" + name + "' (expected base, adversarial, mdn or mdn_adv)");
}

std::string EpochLog::to_json() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["train_loss"] = train_loss;
  j["dev_loss"] = dev_loss;
  if (dev_scores) {
    j["dev_scores"] = nlohmann::ordered_json::parse(dev_scores->to_json());
  } else {
    j["dev_scores"] = nullptr;
  }
  j["learning_rate"] = learning_rate;
  j["seconds"] = seconds;
  return j.dump();
}

Trainer::Trainer(TrainConfig config, const Corpus& corpus)
    : config_(std::move(config)), corpus_(&corpus), shuffle_rng_(config_.seed), noise_rng_(config_.seed ^ 0x9e3779b97f4a7c15ULL) {
  if (corpus.train.empty() || corpus.dev.empty()) throw ConfigError("train: corpus needs non-empty train and dev splits");
  config_.model.joints = corpus.joints;
  config_.model.vocab_size = corpus.vocab.size();
  config_.model.max_frames = std::max<int>(config_.model.max_frames, static_cast<int>(corpus.max_frames()));
  if (uses_critic(config_.regime)) {
    config_.discriminator.joints = corpus.joints;
    config_.discriminator.vocab_size = corpus.vocab.size();
    config_.discriminator.max_frames = std::max<int>(config_.discriminator.max_frames, static_cast<int>(corpus.max_frames()));
    config_.discriminator.max_tokens = std::max<int>(config_.discriminator.max_tokens, static_cast<int>(corpus.max_tokens()));
  }
  config_.validate();

  model_ = std::make_unique<ProgressiveTransformer>(config_.model);
  AdamOptions opts;
  opts.learning_rate = config_.learning_rate;
  opts.min_learning_rate = config_.scheduler.min_lr;
  g_opt_ = std::make_unique<Adam>(model_->parameters(), opts);
  if (uses_critic(config_.regime)) {
    disc_ = std::make_unique<Discriminator>(config_.discriminator);
    d_opt_ = std::make_unique<Adam>(disc_->parameters(), opts);
  }
  noise_ = compute_noise_stats(corpus.train);
}

PreparedExample Trainer::prepare(const Example& ex, bool augment) const {
  PreparedExample p;
  p.source = &ex;
  const ModelConfig& mc = config_.model;
  if (augment && mc.augmentation == Augmentation::noise) {
    p.inputs = decoder_inputs(gaussian_noise_augment(ex.pose, noise_, config_.noise_rate, noise_rng_));
  } else if (mc.augmentation == Augmentation::just_counter) {
    p.inputs = decoder_inputs(just_counter_inputs(ex.pose));
  } else {
    p.inputs = decoder_inputs(ex.pose);
  }
  const FutureTargets ft = future_targets(ex.pose, mc.future_from, mc.future_to);
  p.targets = ft.targets;
  const Index width = mc.frame_dim();
  p.mask.resize(ft.targets.rows(), ft.targets.cols());
  for (Index w = 0; w < ft.window(); ++w) {
    for (Index u = 0; u < ft.targets.rows(); ++u) p.mask.block(u, w * width, 1, width).setConstant(ft.valid(u, w) ? 1.0 : 0.0);
  }
  p.frame_valid.resize(static_cast<size_t>(ft.targets.rows()));
  for (Index u = 0; u < ft.targets.rows(); ++u) p.frame_valid[static_cast<size_t>(u)] = ft.valid(u, 0);
  return p;
}

GeneratorPass Trainer::forward(const PreparedExample& p) const {
  const Index pose_dim = 3 * config_.model.joints;
  const Tensor memory = model_->encode(p.source->tokens);
  const Tensor inputs(p.inputs);
  GeneratorPass pass;
  if (config_.model.head == OutputHead::mdn) {
    MixtureTensors mix = model_->decode_mixture(inputs, memory);
    const Tensor targets(p.targets.leftCols(config_.model.frame_dim()));
    pass.regression_loss = scale(mdn_nll(targets, mix, &p.frame_valid), 1.0 / static_cast<Scalar>(p.inputs.rows()));
    pass.fake_poses = slice_cols(sample_means(mix), 0, pose_dim);
  } else {
    Tensor pred = model_->decode(inputs, memory);
    pass.regression_loss = mse_loss(pred, Tensor(p.targets), p.mask);
    pass.fake_poses = slice_cols(pred, 0, pose_dim);
  }
  return pass;
}

Tensor Trainer::example_loss(const PreparedExample& p) const { return forward(p).regression_loss; }

double Trainer::train_step(std::span<const size_t> indices) {
  if (indices.empty()) throw ConfigError("train_step: empty batch");
  const std::int64_t batch = batch_counter_++;
  std::vector<PreparedExample> prepared;
  prepared.reserve(indices.size());
  for (size_t i : indices) {
    if (i >= corpus_->train.size()) throw ConfigError("train_step: index " + std::to_string(i) + " outside train split");
    prepared.push_back(prepare(corpus_->train[i], true));
  }
  const Scalar inv_batch = 1.0 / static_cast<Scalar>(indices.size());
  const Scalar weight = uses_mdn(config_.regime) ? config_.lambda_mdn : config_.lambda_reg;

  try {
    if (uses_critic(config_.regime)) {
      AdversarialBatch ab;
      for (const auto& p : prepared) {
        ab.sources.push_back(p.source->tokens);
        ab.real_poses.push_back(p.source->pose.frames);
      }
      const AdversarialStepStats stats = adversarial_train_step(
          ab, [&](size_t i) { return forward(prepared[i]); }, *g_opt_, *disc_, *d_opt_, weight, config_.lambda_gan);
      return stats.generator_loss;
    }
    g_opt_->zero_grad();
    double total = 0;
    for (size_t i = 0; i < prepared.size(); ++i) {
      Tensor loss = scale(scale(example_loss(prepared[i]), weight), inv_batch);
      if (!std::isfinite(loss.item())) throw NumericError("loss is not finite at batch item " + std::to_string(i));
      loss.backward();
      total += loss.item();
    }
    g_opt_->step();
    return total;
  } catch (const NumericError& e) {
    throw NumericError("batch " + std::to_string(batch) + ": " + e.what());
  }
}

double Trainer::run_epoch() {
  std::vector<size_t> order(corpus_->train.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::shuffle(order.begin(), order.end(), shuffle_rng_);
  NoiseStatsAccumulator next_stats(3 * corpus_->joints);
  double total = 0;
  size_t steps = 0;
  for (size_t start = 0; start < order.size(); start += static_cast<size_t>(config_.batch_size)) {
    const size_t end = std::min(order.size(), start + static_cast<size_t>(config_.batch_size));
    std::span<const size_t> batch(order.data() + start, end - start);
    total += train_step(batch);
    for (size_t i : batch) next_stats.add(corpus_->train[i].pose.frames);
    ++steps;
  }
  noise_ = next_stats.finish();
  return total / static_cast<double>(steps);
}

double Trainer::dev_loss() const {
  NoGradGuard no_grad;
  double total = 0;
  for (const auto& ex : corpus_->dev) total += forward(prepare(ex, false)).regression_loss.item();
  return total / static_cast<double>(corpus_->dev.size());
}

TrainLog Trainer::train(const std::function<void(const EpochLog&)>& on_epoch) {
  TrainLog log;
  PlateauScheduler scheduler(config_.scheduler.patience, config_.scheduler.factor, config_.scheduler.min_lr);
  std::vector<Matrix> best_params;
  std::vector<Matrix> best_disc;
  const auto t_start = Clock::now();
  double last_epoch_seconds = 0;
  for (int epoch = 1; epoch <= config_.epochs; ++epoch) {
    if (config_.time_budget_seconds > 0 && epoch > 1 &&
        seconds_since(t_start) + last_epoch_seconds > config_.time_budget_seconds) {
      break;
    }
    const auto t_epoch = Clock::now();
    EpochLog entry;
    entry.epoch = epoch;
    entry.learning_rate = g_opt_->learning_rate();
    entry.train_loss = run_epoch();
    entry.dev_loss = dev_loss();
    if (!std::isfinite(entry.dev_loss)) throw NumericError("dev loss is not finite after epoch " + std::to_string(epoch));
    if (config_.dev_eval_every > 0 && epoch % config_.dev_eval_every == 0) {
      EvalOptions eo;
      eo.jobs = config_.eval_jobs;
      eo.limit = static_cast<size_t>(config_.dev_eval_limit);
      entry.dev_scores = evaluate_model(*model_, *corpus_, "dev", {}, eo);
    }
    if (log.best_epoch < 0 || entry.dev_loss < log.best_dev_loss) {
      log.best_epoch = epoch;
      log.best_dev_loss = entry.dev_loss;
      best_params = model_->parameters().snapshot();
      if (disc_) best_disc = disc_->parameters().snapshot();
    }
    const Scalar next_lr = scheduler.step(entry.dev_loss, g_opt_->learning_rate());
    g_opt_->set_learning_rate(next_lr);
    if (d_opt_) d_opt_->set_learning_rate(next_lr);
    entry.seconds = seconds_since(t_epoch);
    last_epoch_seconds = entry.seconds;
    log.epochs.push_back(entry);
    if (on_epoch) on_epoch(log.epochs.back());
  }
  if (!best_params.empty()) model_->parameters().restore(best_params);
  if (disc_ && !best_disc.empty()) disc_->parameters().restore(best_disc);
  return log;
}

}  // namespace progseq
