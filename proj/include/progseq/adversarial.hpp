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

#include "progseq/ops.hpp"
#include "progseq/optim.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace progseq {

struct DiscriminatorConfig {
  int layers = 6;
  int channels = 128;
  int kernel = 3;
  int max_frames = 128;
  int max_tokens = 6;
  int source_dim = 64;
  int joints = 8;
  int vocab_size = 14;
  std::uint64_t seed = 2;

  void validate() const;
};

/// Zero frames appended to a fixed length. Counter channel must already be
/// stripped. ConfigError when the sequence is longer than `max_frames`.
Tensor pad_target(const Tensor& poses, Index max_frames);

/// Conditional temporal-convolution critic.
///
/// The padded source embedding is mean-pooled and appended to every padded
/// frame, giving H (U_max x (3J + d_src)); N convolutions with leaky ReLU
/// run over the time axis, followed by global mean pooling, a linear layer
/// and a sigmoid.
class Discriminator {
 public:
  explicit Discriminator(DiscriminatorConfig config);

  const DiscriminatorConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  /// W^X one_hot(x_t) + b^X per token, zero rows up to max_tokens.
  Tensor embed_and_pad_source(std::span<const int> tokens) const;
  /// d_p in (0,1) as a 1x1 tensor. `poses` is U x 3J.
  Tensor score(const Tensor& poses, std::span<const int> tokens) const;
  /// Same, with an explicit T_max x d_src source block (e.g. zeros).
  Tensor score_with_source(const Tensor& poses, const Tensor& source_pad) const;

 private:
  DiscriminatorConfig config_;
  ParameterSet params_;
  Tensor src_weight_, src_bias_;
  std::vector<Tensor> conv_weights_, conv_biases_;
  Tensor out_weight_, out_bias_;
};

inline constexpr Scalar kScoreClamp = 1e-7;

struct GanLosses {
  Tensor discriminator;  // -[log d_real + log(1 - d_fake)]
  Tensor generator;      // -log d_fake
};

/// Scores are clamped to [1e-7, 1 - 1e-7] before the logs.
GanLosses gan_losses(const Tensor& d_real, const Tensor& d_fake);
Tensor discriminator_loss(const Tensor& d_real, const Tensor& d_fake);
Tensor generator_adversarial_loss(const Tensor& d_fake);

/// lambda_reg * L_reg + lambda_gan * L_adv
Tensor generator_total_loss(const Tensor& reg_loss, const Tensor& adv_loss, Scalar lambda_reg, Scalar lambda_gan);

/// One generator forward pass for batch item `index`: its regression-style
/// loss and the produced poses (U x 3J) that the critic sees.
struct GeneratorPass {
  Tensor regression_loss;
  Tensor fake_poses;
};
using GeneratorForward = std::function<GeneratorPass(size_t index)>;

struct AdversarialBatch {
  std::vector<std::vector<int>> sources;
  std::vector<Matrix> real_poses;
  size_t size() const { return sources.size(); }
};

struct AdversarialStepStats {
  Scalar discriminator_loss = 0;
  Scalar generator_loss = 0;
  Scalar mean_real_score = 0;
  Scalar mean_fake_score = 0;
};

/// One critic update on (real, detached fake) followed by one generator
/// update through the weighted total loss; losses are batch means. The
/// critic's parameters are frozen during the generator update. Throws
/// NumericError with the batch item index on a non-finite loss.
AdversarialStepStats adversarial_train_step(const AdversarialBatch& batch, const GeneratorForward& generator,
                                            Adam& generator_opt, Discriminator& discriminator,
                                            Adam& discriminator_opt, Scalar lambda_reg, Scalar lambda_gan);

}  // namespace progseq
