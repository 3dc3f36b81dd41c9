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

#include "progseq/adversarial.hpp"

#include "progseq/error.hpp"

#include <cmath>
#include <random>

namespace progseq {

void DiscriminatorConfig::validate() const {
  if (layers < 1) throw ConfigError("discriminator: need at least one convolution layer");
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("discriminator: kernel size must be odd");
  if (channels < 1 || source_dim < 1) throw ConfigError("discriminator: widths must be positive");
  if (max_frames < 1 || max_tokens < 1) throw ConfigError("discriminator: max lengths must be positive");
  if (joints < 1 || vocab_size < 1) throw ConfigError("discriminator: invalid joints or vocabulary");
}

Tensor pad_target(const Tensor& poses, Index max_frames) {
  if (poses.rows() > max_frames) {
    throw ConfigError("pad_target: sequence of " + std::to_string(poses.rows()) + " frames exceeds U_max " +
                      std::to_string(max_frames));
  }
  return pad_rows(poses, max_frames);
}

Discriminator::Discriminator(DiscriminatorConfig config) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  src_weight_ = params_.add("disc.src_embed.weight", Tensor(xavier_uniform({config_.vocab_size, config_.source_dim}, rng)));
  src_bias_ = params_.add("disc.src_embed.bias", Tensor::zeros(1, config_.source_dim));
  Index in_channels = 3 * config_.joints + config_.source_dim;
  for (int l = 0; l < config_.layers; ++l) {
    const std::string p = "disc.conv." + std::to_string(l);
    const Index k = config_.kernel;
    conv_weights_.push_back(params_.add(
        p + ".weight", Tensor(xavier_uniform(k * in_channels, config_.channels, k * in_channels, k * config_.channels, rng))));
    conv_biases_.push_back(params_.add(p + ".bias", Tensor::zeros(1, config_.channels)));
    in_channels = config_.channels;
  }
  out_weight_ = params_.add("disc.output.weight", Tensor(xavier_uniform({config_.channels, 1}, rng)));
  out_bias_ = params_.add("disc.output.bias", Tensor::zeros(1, 1));
}

Tensor Discriminator::embed_and_pad_source(std::span<const int> tokens) const {
  if (static_cast<Index>(tokens.size()) > config_.max_tokens) {
    throw ConfigError("embed_and_pad_source: " + std::to_string(tokens.size()) + " tokens exceed T_max " +
                      std::to_string(config_.max_tokens));
  }
  if (tokens.empty()) return Tensor::zeros(config_.max_tokens, config_.source_dim);
  return pad_rows(add_row(gather_rows(src_weight_, tokens), src_bias_), config_.max_tokens);
}

Tensor Discriminator::score(const Tensor& poses, std::span<const int> tokens) const {
  return score_with_source(poses, embed_and_pad_source(tokens));
}

Tensor Discriminator::score_with_source(const Tensor& poses, const Tensor& source_pad) const {
  if (poses.cols() != 3 * config_.joints) {
    throw ShapeError("discriminate: poses " + poses.shape_string() + " vs " + std::to_string(3 * config_.joints) +
                     " joint channels");
  }
  if (source_pad.rows() != config_.max_tokens || source_pad.cols() != config_.source_dim) {
    throw ShapeError("discriminate: source block " + source_pad.shape_string() + " vs [" +
                     std::to_string(config_.max_tokens) + "x" + std::to_string(config_.source_dim) + "]");
  }
  const Index frames = config_.max_frames;
  Tensor pooled = mean_rows(source_pad);
  Tensor condition = matmul(Tensor(Matrix::Ones(frames, 1)), pooled);
  Tensor h = concat({pad_target(poses, frames), condition}, 1);
  for (size_t l = 0; l < conv_weights_.size(); ++l) {
    h = leaky_relu(linear(unfold_time(h, config_.kernel), conv_weights_[l], conv_biases_[l]), 0.2);
  }
  return sigmoid(linear(mean_rows(h), out_weight_, out_bias_));
}

GanLosses gan_losses(const Tensor& d_real, const Tensor& d_fake) {
  return {discriminator_loss(d_real, d_fake), generator_adversarial_loss(d_fake)};
}

Tensor discriminator_loss(const Tensor& d_real, const Tensor& d_fake) {
  Tensor real = log(clamp(d_real, kScoreClamp, 1.0 - kScoreClamp));
  Tensor fake = log(add_scalar(scale(clamp(d_fake, kScoreClamp, 1.0 - kScoreClamp), -1.0), 1.0));
  return scale(add(real, fake), -1.0);
}

Tensor generator_adversarial_loss(const Tensor& d_fake) {
  return scale(log(clamp(d_fake, kScoreClamp, 1.0 - kScoreClamp)), -1.0);
}

Tensor generator_total_loss(const Tensor& reg_loss, const Tensor& adv_loss, Scalar lambda_reg, Scalar lambda_gan) {
  if (lambda_reg < 0 || lambda_gan < 0) throw ConfigError("generator_total_loss: weights must be >= 0");
  return add(scale(reg_loss, lambda_reg), scale(adv_loss, lambda_gan));
}

namespace {

void require_finite(Scalar v, const char* what, size_t index) {
  if (!std::isfinite(v)) {
    throw NumericError(std::string(what) + " is not finite at batch item " + std::to_string(index));
  }
}

}  // namespace

AdversarialStepStats adversarial_train_step(const AdversarialBatch& batch, const GeneratorForward& generator,
                                            Adam& generator_opt, Discriminator& discriminator,
                                            Adam& discriminator_opt, Scalar lambda_reg, Scalar lambda_gan) {
  if (batch.size() == 0 || batch.real_poses.size() != batch.size()) throw ConfigError("adversarial step: empty or ragged batch");
  AdversarialStepStats stats;
  const Scalar inv_batch = 1.0 / static_cast<Scalar>(batch.size());

  // Critic update on real vs detached fake.
  discriminator_opt.zero_grad();
  for (size_t i = 0; i < batch.size(); ++i) {
    Tensor fake;
    {
      NoGradGuard no_grad;
      fake = generator(i).fake_poses;
    }
    Tensor d_real = discriminator.score(Tensor(batch.real_poses[i]), batch.sources[i]);
    Tensor d_fake = discriminator.score(fake.detach(), batch.sources[i]);
    Tensor loss = scale(discriminator_loss(d_real, d_fake), inv_batch);
    require_finite(loss.item(), "discriminator loss", i);
    loss.backward();
    stats.discriminator_loss += loss.item();
    stats.mean_real_score += d_real.item() * inv_batch;
    stats.mean_fake_score += d_fake.item() * inv_batch;
  }
  discriminator_opt.step();

  // Generator update against the frozen critic.
  generator_opt.zero_grad();
  for (auto& p : discriminator.parameters().items()) p.tensor.set_requires_grad(false);
  try {
    for (size_t i = 0; i < batch.size(); ++i) {
      GeneratorPass pass = generator(i);
      Tensor adv = generator_adversarial_loss(discriminator.score(pass.fake_poses, batch.sources[i]));
      Tensor loss = scale(generator_total_loss(pass.regression_loss, adv, lambda_reg, lambda_gan), inv_batch);
      require_finite(loss.item(), "generator loss", i);
      loss.backward();
      stats.generator_loss += loss.item();
    }
  } catch (...) {
    for (auto& p : discriminator.parameters().items()) p.tensor.set_requires_grad(true);
    throw;
  }
  for (auto& p : discriminator.parameters().items()) p.tensor.set_requires_grad(true);
  generator_opt.step();
  return stats;
}

}  // namespace progseq
