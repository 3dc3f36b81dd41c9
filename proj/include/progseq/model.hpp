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

#include "progseq/data.hpp"
#include "progseq/mdn.hpp"
#include "progseq/ops.hpp"
#include "progseq/optim.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace progseq {

enum class Augmentation { none, noise, just_counter };
enum class OutputHead { regression, mdn };

std::string to_string(Augmentation a);
std::string to_string(OutputHead h);
Augmentation parse_augmentation(const std::string& s);
OutputHead parse_output_head(const std::string& s);

struct ModelConfig {
  int layers = 2;
  int heads = 4;
  int embed_dim = 512;
  /// 0 selects 2 * embed_dim.
  int ff_dim = 0;
  int joints = 8;
  /// Including the reserved PAD/BOS ids.
  int vocab_size = 14;
  int future_from = 0;
  int future_to = 1;
  Augmentation augmentation = Augmentation::noise;
  OutputHead head = OutputHead::regression;
  int mixtures = 4;
  bool mdn_fixed_sigma = false;
  /// Layer norm before each sub-layer plus a final norm per stack, instead
  /// of after each residual sum.
  bool pre_norm = false;
  double sigma_floor = 1e-4;
  int max_frames = 300;
  double termination_epsilon = 0.02;
  std::uint64_t seed = 1;

  int frame_dim() const { return 3 * joints + 1; }
  int window() const { return future_to - future_from; }
  int feed_forward_dim() const { return ff_dim > 0 ? ff_dim : 2 * embed_dim; }
  /// Throws ConfigError on any violated invariant.
  void validate() const;
};

/// Sinusoidal encoding: sin(t / 10000^(2i/d)) on even dims, cos on odd.
RowVector positional_encoding(Index t, Index dim);
/// Rows 0..count-1 of the encoding.
Matrix positional_encoding_table(Index count, Index dim);
/// true above the diagonal: position u may attend to 0..u only.
Mask causal_mask(Index length);

/// softmax(Q K^T / sqrt(d_k)) V.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const Mask* mask = nullptr);

struct AttentionWeights {
  Tensor query, key, value, output;  // d x d each; per-head projections are column blocks
};

/// Per head i: attention over column block i of the Q/K/V projections; heads
/// are concatenated and projected by `output`.
Tensor multi_head_attention(const Tensor& queries, const Tensor& keys_values, const AttentionWeights& w, int heads,
                            const Mask* mask = nullptr);

struct FeedForwardWeights {
  Tensor w1, b1, w2, b2;
};
struct NormWeights {
  Tensor gain, bias;
};
struct EncoderLayerWeights {
  AttentionWeights self_attention;
  NormWeights norm1;
  FeedForwardWeights feed_forward;
  NormWeights norm2;
};
struct DecoderLayerWeights {
  AttentionWeights self_attention;
  NormWeights norm1;
  AttentionWeights cross_attention;
  NormWeights norm2;
  FeedForwardWeights feed_forward;
  NormWeights norm3;
};

/// Mean over unmasked entries of (pred - target)^2. `mask` is an elementwise
/// 0/1 matrix of the same shape, or empty for "all valid".
Tensor mse_loss(const Tensor& pred, const Tensor& target, const Matrix& mask = {});
/// Frame mask convenience: rows with frame_valid[u] == false are excluded.
Tensor mse_loss(const Tensor& pred, const Tensor& target, const std::vector<bool>& frame_valid);

/// One predicted frame split into pose and counter.
struct DecoderStepOutput {
  RowVector pose;  // 3J
  Scalar counter = 0;
};
DecoderStepOutput split_frame(const RowVector& joined);

enum class DecodeMode { feedback, teacher_timing };

struct GenerateOptions {
  DecodeMode mode = DecodeMode::feedback;
  /// Frame count for teacher_timing.
  Index reference_length = 0;
  /// <= 0 uses the model configuration.
  Index max_frames = 0;
  double epsilon = -1.0;
};

struct Generation {
  PoseSequence pose;  // counters re-encoded as u/U
  std::vector<Scalar> predicted_counters;
  bool truncated = false;
};

/// Predicts the next joined frame (1 x (3J+1)) from all decoder inputs so far.
using StepFunction = std::function<RowVector(const Matrix& inputs)>;

/// Counter-decoding loop. Starts from a zero pose with counter 0. In
/// feedback mode each prediction re-enters as the next input and decoding
/// stops when the predicted counter reaches 1 - epsilon, or at max_frames
/// with `truncated` set. In teacher_timing mode the fed-back counter is
/// replaced by u / reference_length and exactly reference_length frames are
/// produced. With `zero_pose_inputs` only counters are fed back.
Generation counter_decode(const StepFunction& step, int joints, Index max_frames, double epsilon,
                          const GenerateOptions& options, bool zero_pose_inputs = false);

/// Encoder-decoder transformer producing continuous frames with a counter.
class ProgressiveTransformer {
 public:
  explicit ProgressiveTransformer(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  /// Row t is W^x one_hot(x_t) + b^x, without positional encoding.
  Tensor embed_source(std::span<const int> tokens) const;
  /// T x d contextual source representation.
  Tensor encode(std::span<const int> tokens) const;
  /// Affine embedding of joined frames, rows x (3J+1) -> rows x d.
  Tensor embed_joints(const Tensor& frames) const;
  /// Decoder stack output before the head, U x d.
  Tensor decoder_features(const Tensor& inputs, const Tensor& memory) const;
  /// Regression head: U x (window * (3J+1)), block 0 is the next frame.
  Tensor decode(const Tensor& inputs, const Tensor& memory) const;
  /// Mixture head over the next frame (3J+1 channels).
  MixtureTensors decode_mixture(const Tensor& inputs, const Tensor& memory) const;

  /// Next joined frame for the last input row, evaluated without the tape.
  RowVector predict_next(const Tensor& memory, const Matrix& inputs) const;
  Generation generate(std::span<const int> tokens, const GenerateOptions& options = {}) const;

  const Tensor& source_table() const { return src_table_; }

 private:
  friend class IncrementalDecoder;

  Tensor& add_weight(const std::string& name, Index rows, Index cols, std::mt19937_64& rng);
  Tensor& add_bias(const std::string& name, Index cols);
  Tensor& add_gain(const std::string& name, Index cols);
  AttentionWeights add_attention(const std::string& prefix, std::mt19937_64& rng);
  FeedForwardWeights add_feed_forward(const std::string& prefix, std::mt19937_64& rng);
  NormWeights add_norm(const std::string& prefix);

  ModelConfig config_;
  ParameterSet params_;
  Tensor src_table_, src_bias_;
  Tensor trg_weight_, trg_bias_;
  std::vector<EncoderLayerWeights> encoder_;
  std::vector<DecoderLayerWeights> decoder_;
  NormWeights encoder_norm_, decoder_norm_;
  Tensor out_weight_, out_bias_;
  MdnHeadWeights mdn_;
};

/// Inference-only decoder. Self-attention keys and values are cached per
/// layer and the encoder memory is projected once, so each step pushes a
/// single row through the stack. Matches the full recompute up to rounding.
class IncrementalDecoder {
 public:
  IncrementalDecoder(const ProgressiveTransformer& model, const Tensor& memory);

  /// Appends one joined input frame; returns the next-frame prediction.
  RowVector step(const RowVector& input);
  Index length() const { return length_; }

 private:
  struct LayerCache {
    Matrix keys, values, cross_keys, cross_values;
  };
  const ProgressiveTransformer* model_;
  std::vector<LayerCache> layers_;
  Index length_ = 0;
};

}  // namespace progseq
