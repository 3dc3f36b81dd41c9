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

#include "progseq/model.hpp"

#include "progseq/error.hpp"

#include <cmath>

namespace progseq {

std::string to_string(Augmentation a) {
  switch (a) {
    case Augmentation::none: return "none";
    case Augmentation::noise: return "noise";
    case Augmentation::just_counter: return "just_counter";
  }
  return "none";
}

std::string to_string(OutputHead h) { return h == OutputHead::mdn ? "mdn" : "regression"; }

Augmentation parse_augmentation(const std::string& s) {
  if (s == "none") return Augmentation::none;
  if (s == "noise") return Augmentation::noise;
  if (s == "just_counter") return Augmentation::just_counter;
  throw ConfigError("unknown augmentation '" + s + "' (expected none, noise or just_counter)");
}

OutputHead parse_output_head(const std::string& s) {
  if (s == "regression") return OutputHead::regression;
  if (s == "mdn") return OutputHead::mdn;
  throw ConfigError("unknown output head '" + s + "' (expected regression or mdn)");
}

void ModelConfig::validate() const {
  if (layers < 1) throw ConfigError("model: layers must be >= 1");
  if (heads < 1 || embed_dim < 1 || embed_dim % heads != 0) {
    throw ConfigError("model: embed_dim " + std::to_string(embed_dim) + " not divisible by heads " +
                      std::to_string(heads));
  }
  if (joints < 1) throw ConfigError("model: joints must be >= 1");
  if (vocab_size < 3) throw ConfigError("model: vocab_size must include reserved ids and a content token");
  if (future_from < 0 || future_to <= future_from) throw ConfigError("model: need 0 <= future_from < future_to");
  if (max_frames < 1) throw ConfigError("model: max_frames must be >= 1");
  if (!(termination_epsilon > 0 && termination_epsilon < 0.5)) {
    throw ConfigError("model: termination_epsilon must lie in (0, 0.5)");
  }
  if (head == OutputHead::mdn) {
    if (mixtures < 1) throw ConfigError("model: mdn needs at least one mixture component");
    if (window() != 1) throw ConfigError("model: mdn head supports only next-frame prediction (future window 0..1)");
    if (!(sigma_floor > 0)) throw ConfigError("model: sigma_floor must be positive");
  }
}

RowVector positional_encoding(Index t, Index dim) {
  RowVector pe(dim);
  for (Index k = 0; k < dim; ++k) {
    const Index i2 = k - (k % 2);
    const Scalar angle = static_cast<Scalar>(t) / std::pow(10000.0, static_cast<Scalar>(i2) / static_cast<Scalar>(dim));
    pe(k) = (k % 2 == 0) ? std::sin(angle) : std::cos(angle);
  }
  return pe;
}

Matrix positional_encoding_table(Index count, Index dim) {
  Matrix table(count, dim);
  for (Index t = 0; t < count; ++t) table.row(t) = positional_encoding(t, dim);
  return table;
}

Mask causal_mask(Index length) {
  Mask m(length, length);
  for (Index i = 0; i < length; ++i) {
    for (Index j = 0; j < length; ++j) m(i, j) = j > i;
  }
  return m;
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const Mask* mask) {
  if (q.cols() != k.cols()) throw ShapeError("attention: query/key width " + q.shape_string() + " vs " + k.shape_string());
  if (k.rows() != v.rows()) throw ShapeError("attention: key/value rows " + k.shape_string() + " vs " + v.shape_string());
  const Scalar inv_sqrt = 1.0 / std::sqrt(static_cast<Scalar>(q.cols()));
  Tensor logits = scale(matmul(q, transpose(k)), inv_sqrt);
  return matmul(softmax_rows(logits, mask), v);
}

Tensor multi_head_attention(const Tensor& queries, const Tensor& keys_values, const AttentionWeights& w, int heads,
                            const Mask* mask) {
  const Index d = w.query.cols();
  if (heads < 1 || d % heads != 0) throw ConfigError("multi_head_attention: width not divisible by heads");
  if (keys_values.cols() != w.key.rows()) {
    throw ShapeError("multi_head_attention: memory " + keys_values.shape_string() + " vs key projection " +
                     w.key.shape_string());
  }
  Tensor q = matmul(queries, w.query);
  Tensor k = matmul(keys_values, w.key);
  Tensor v = matmul(keys_values, w.value);
  if (heads == 1) return matmul(attention(q, k, v, mask), w.output);
  const Index dk = d / heads;
  std::vector<Tensor> outs;
  outs.reserve(static_cast<size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    outs.push_back(attention(slice_cols(q, h * dk, dk), slice_cols(k, h * dk, dk), slice_cols(v, h * dk, dk), mask));
  }
  return matmul(concat(outs, 1), w.output);
}

Tensor mse_loss(const Tensor& pred, const Tensor& target, const Matrix& mask) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw ShapeError("mse_loss: shape mismatch " + pred.shape_string() + " vs " + target.shape_string());
  }
  Tensor sq = square(sub(pred, target));
  if (mask.size() == 0) return mean(sq);
  if (mask.rows() != pred.rows() || mask.cols() != pred.cols()) throw ShapeError("mse_loss: mask shape mismatch");
  const Scalar count = mask.sum();
  if (count <= 0) return scale(sum(mul(sq, Tensor(mask))), 0.0);
  return scale(sum(mul(sq, Tensor(mask))), 1.0 / count);
}

Tensor mse_loss(const Tensor& pred, const Tensor& target, const std::vector<bool>& frame_valid) {
  if (static_cast<Index>(frame_valid.size()) != pred.rows()) throw ShapeError("mse_loss: frame mask length mismatch");
  Matrix mask(pred.rows(), pred.cols());
  for (Index u = 0; u < mask.rows(); ++u) mask.row(u).setConstant(frame_valid[static_cast<size_t>(u)] ? 1.0 : 0.0);
  return mse_loss(pred, target, mask);
}

DecoderStepOutput split_frame(const RowVector& joined) {
  DecoderStepOutput out;
  out.pose = joined.leftCols(joined.cols() - 1);
  out.counter = joined(joined.cols() - 1);
  return out;
}

Generation counter_decode(const StepFunction& step, int joints, Index max_frames, double epsilon,
                          const GenerateOptions& options, bool zero_pose_inputs) {
  const Index width = 3 * joints + 1;
  Index limit = max_frames;
  if (options.mode == DecodeMode::teacher_timing) {
    if (options.reference_length < 1) throw ConfigError("teacher timing needs a reference length >= 1");
    limit = options.reference_length;
  }
  if (limit < 1) throw ConfigError("counter_decode: frame limit must be >= 1");

  Matrix inputs = Matrix::Zero(1, width);
  std::vector<RowVector> frames;
  Generation gen;
  bool finished = false;
  for (Index u = 1; u <= limit; ++u) {
    RowVector pred = step(inputs);
    if (pred.cols() != width) throw ShapeError("counter_decode: step returned " + std::to_string(pred.cols()) + " values");
    frames.push_back(pred.leftCols(width - 1));
    gen.predicted_counters.push_back(pred(width - 1));
    if (options.mode == DecodeMode::feedback && pred(width - 1) >= 1.0 - epsilon) {
      finished = true;
      break;
    }
    if (u == limit) break;
    RowVector next = pred;
    if (options.mode == DecodeMode::teacher_timing) {
      next(width - 1) = static_cast<Scalar>(u) / static_cast<Scalar>(options.reference_length);
    }
    if (zero_pose_inputs) next.leftCols(width - 1).setZero();
    inputs.conservativeResize(inputs.rows() + 1, Eigen::NoChange);
    inputs.row(inputs.rows() - 1) = next;
  }
  gen.truncated = options.mode == DecodeMode::feedback && !finished;

  Matrix out(static_cast<Index>(frames.size()), width - 1);
  for (size_t i = 0; i < frames.size(); ++i) out.row(static_cast<Index>(i)) = frames[i];
  gen.pose = counter_encode(out);
  gen.pose.joints = joints;
  return gen;
}

// ---- ProgressiveTransformer ----

Tensor& ProgressiveTransformer::add_weight(const std::string& name, Index rows, Index cols, std::mt19937_64& rng) {
  return params_.add(name, Tensor(xavier_uniform({rows, cols}, rng)));
}

Tensor& ProgressiveTransformer::add_bias(const std::string& name, Index cols) {
  return params_.add(name, Tensor::zeros(1, cols));
}

Tensor& ProgressiveTransformer::add_gain(const std::string& name, Index cols) {
  return params_.add(name, Tensor(Matrix::Ones(1, cols)));
}

AttentionWeights ProgressiveTransformer::add_attention(const std::string& prefix, std::mt19937_64& rng) {
  const Index d = config_.embed_dim;
  AttentionWeights w;
  w.query = add_weight(prefix + ".query", d, d, rng);
  w.key = add_weight(prefix + ".key", d, d, rng);
  w.value = add_weight(prefix + ".value", d, d, rng);
  w.output = add_weight(prefix + ".output", d, d, rng);
  return w;
}

FeedForwardWeights ProgressiveTransformer::add_feed_forward(const std::string& prefix, std::mt19937_64& rng) {
  const Index d = config_.embed_dim;
  const Index f = config_.feed_forward_dim();
  FeedForwardWeights w;
  w.w1 = add_weight(prefix + ".w1", d, f, rng);
  w.b1 = add_bias(prefix + ".b1", f);
  w.w2 = add_weight(prefix + ".w2", f, d, rng);
  w.b2 = add_bias(prefix + ".b2", d);
  return w;
}

NormWeights ProgressiveTransformer::add_norm(const std::string& prefix) {
  NormWeights w;
  w.gain = add_gain(prefix + ".gain", config_.embed_dim);
  w.bias = add_bias(prefix + ".bias", config_.embed_dim);
  return w;
}

ProgressiveTransformer::ProgressiveTransformer(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  const Index d = config_.embed_dim;
  const Index width = config_.frame_dim();

  src_table_ = add_weight("src_embed.weight", config_.vocab_size, d, rng);
  src_bias_ = add_bias("src_embed.bias", d);
  for (int l = 0; l < config_.layers; ++l) {
    const std::string p = "encoder." + std::to_string(l);
    EncoderLayerWeights layer;
    layer.self_attention = add_attention(p + ".self_attn", rng);
    layer.norm1 = add_norm(p + ".norm1");
    layer.feed_forward = add_feed_forward(p + ".ff", rng);
    layer.norm2 = add_norm(p + ".norm2");
    encoder_.push_back(layer);
  }
  if (config_.pre_norm) encoder_norm_ = add_norm("encoder.norm");
  trg_weight_ = add_weight("trg_embed.weight", width, d, rng);
  trg_bias_ = add_bias("trg_embed.bias", d);
  for (int l = 0; l < config_.layers; ++l) {
    const std::string p = "decoder." + std::to_string(l);
    DecoderLayerWeights layer;
    layer.self_attention = add_attention(p + ".self_attn", rng);
    layer.norm1 = add_norm(p + ".norm1");
    layer.cross_attention = add_attention(p + ".cross_attn", rng);
    layer.norm2 = add_norm(p + ".norm2");
    layer.feed_forward = add_feed_forward(p + ".ff", rng);
    layer.norm3 = add_norm(p + ".norm3");
    decoder_.push_back(layer);
  }
  if (config_.pre_norm) decoder_norm_ = add_norm("decoder.norm");
  if (config_.head == OutputHead::regression) {
    out_weight_ = add_weight("output.weight", d, config_.window() * width, rng);
    out_bias_ = add_bias("output.bias", config_.window() * width);
  } else {
    const Index m = config_.mixtures;
    mdn_.weight_means = add_weight("mdn.means.weight", d, m * width, rng);
    mdn_.bias_means = add_bias("mdn.means.bias", m * width);
    mdn_.weight_logits = add_weight("mdn.logits.weight", d, m, rng);
    mdn_.bias_logits = add_bias("mdn.logits.bias", m);
    mdn_.weight_scales = add_weight("mdn.log_scales.weight", d, m, rng);
    mdn_.bias_scales = add_bias("mdn.log_scales.bias", m);
  }
}

Tensor ProgressiveTransformer::embed_source(std::span<const int> tokens) const {
  for (int t : tokens) {
    if (t < 0 || t >= config_.vocab_size) {
      throw ConfigError("embed_source: token id " + std::to_string(t) + " outside vocabulary of " +
                        std::to_string(config_.vocab_size));
    }
  }
  return add_row(gather_rows(src_table_, tokens), src_bias_);
}

namespace {

Tensor feed_forward(const Tensor& x, const FeedForwardWeights& w) {
  return linear(relu(linear(x, w.w1, w.b1)), w.w2, w.b2);
}

Tensor residual_norm(const Tensor& x, const Tensor& sublayer, const NormWeights& n) {
  return layer_norm(add(x, sublayer), n.gain, n.bias);
}

Tensor norm(const Tensor& x, const NormWeights& n) { return layer_norm(x, n.gain, n.bias); }

}  // namespace

Tensor ProgressiveTransformer::encode(std::span<const int> tokens) const {
  if (tokens.empty()) throw ConfigError("encode: empty source sequence");
  Tensor x = add(embed_source(tokens), Tensor(positional_encoding_table(static_cast<Index>(tokens.size()), config_.embed_dim)));
  if (config_.pre_norm) {
    for (const auto& layer : encoder_) {
      const Tensor h = norm(x, layer.norm1);
      x = add(x, multi_head_attention(h, h, layer.self_attention, config_.heads));
      x = add(x, feed_forward(norm(x, layer.norm2), layer.feed_forward));
    }
    return norm(x, encoder_norm_);
  }
  for (const auto& layer : encoder_) {
    x = residual_norm(x, multi_head_attention(x, x, layer.self_attention, config_.heads), layer.norm1);
    x = residual_norm(x, feed_forward(x, layer.feed_forward), layer.norm2);
  }
  return x;
}

Tensor ProgressiveTransformer::embed_joints(const Tensor& frames) const {
  if (frames.cols() != config_.frame_dim()) {
    throw ShapeError("embed_joints: expected " + std::to_string(config_.frame_dim()) + " input channels, got " +
                     frames.shape_string());
  }
  return linear(frames, trg_weight_, trg_bias_);
}

Tensor ProgressiveTransformer::decoder_features(const Tensor& inputs, const Tensor& memory) const {
  if (memory.cols() != config_.embed_dim) {
    throw ShapeError("decode: encoder output " + memory.shape_string() + " does not match embed dim " +
                     std::to_string(config_.embed_dim));
  }
  const Mask mask = causal_mask(inputs.rows());
  Tensor x = embed_joints(inputs);
  if (config_.pre_norm) {
    for (const auto& layer : decoder_) {
      const Tensor h = norm(x, layer.norm1);
      x = add(x, multi_head_attention(h, h, layer.self_attention, config_.heads, &mask));
      x = add(x, multi_head_attention(norm(x, layer.norm2), memory, layer.cross_attention, config_.heads));
      x = add(x, feed_forward(norm(x, layer.norm3), layer.feed_forward));
    }
    return norm(x, decoder_norm_);
  }
  for (const auto& layer : decoder_) {
    x = residual_norm(x, multi_head_attention(x, x, layer.self_attention, config_.heads, &mask), layer.norm1);
    x = residual_norm(x, multi_head_attention(x, memory, layer.cross_attention, config_.heads), layer.norm2);
    x = residual_norm(x, feed_forward(x, layer.feed_forward), layer.norm3);
  }
  return x;
}

Tensor ProgressiveTransformer::decode(const Tensor& inputs, const Tensor& memory) const {
  if (config_.head != OutputHead::regression) throw ConfigError("decode: model has a mixture head");
  return linear(decoder_features(inputs, memory), out_weight_, out_bias_);
}

MixtureTensors ProgressiveTransformer::decode_mixture(const Tensor& inputs, const Tensor& memory) const {
  if (config_.head != OutputHead::mdn) throw ConfigError("decode_mixture: model has a regression head");
  MdnHeadOptions opts;
  opts.components = config_.mixtures;
  opts.dim = config_.frame_dim();
  opts.sigma_floor = config_.sigma_floor;
  opts.fixed_unit_sigma = config_.mdn_fixed_sigma;
  return mdn_head(decoder_features(inputs, memory), mdn_, opts);
}

RowVector ProgressiveTransformer::predict_next(const Tensor& memory, const Matrix& inputs) const {
  NoGradGuard no_grad;
  const Tensor in(inputs);
  const Index last = inputs.rows() - 1;
  if (config_.head == OutputHead::mdn) return sample(decode_mixture(in, memory).frame(last));
  return decode(in, memory).value().block(last, 0, 1, config_.frame_dim());
}

Generation ProgressiveTransformer::generate(std::span<const int> tokens, const GenerateOptions& options) const {
  Tensor memory;
  {
    NoGradGuard no_grad;
    memory = encode(tokens);
  }
  const Index max_frames = options.max_frames > 0 ? options.max_frames : config_.max_frames;
  const double eps = options.epsilon > 0 ? options.epsilon : config_.termination_epsilon;
  IncrementalDecoder decoder(*this, memory);
  auto step = [&](const Matrix& inputs) {
    RowVector out;
    while (decoder.length() < inputs.rows()) out = decoder.step(inputs.row(decoder.length()));
    return out;
  };
  return counter_decode(step, config_.joints, max_frames, eps, options,
                        config_.augmentation == Augmentation::just_counter);
}

namespace {

// One query row against cached keys and values; heads are column blocks.
Tensor cached_attention(const Tensor& query_row, const Matrix& keys, const Matrix& values, const AttentionWeights& w,
                        int heads) {
  const Tensor q = matmul(query_row, w.query);
  const Tensor k(keys), v(values);
  if (heads == 1) return matmul(attention(q, k, v, nullptr), w.output);
  const Index dk = keys.cols() / heads;
  std::vector<Tensor> outs;
  outs.reserve(static_cast<size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    outs.push_back(attention(slice_cols(q, h * dk, dk), slice_cols(k, h * dk, dk), slice_cols(v, h * dk, dk), nullptr));
  }
  return matmul(concat(outs, 1), w.output);
}

void append_row(Matrix& m, const Matrix& row) {
  m.conservativeResize(m.rows() + 1, row.cols());
  m.row(m.rows() - 1) = row.row(0);
}

}  // namespace

IncrementalDecoder::IncrementalDecoder(const ProgressiveTransformer& model, const Tensor& memory) : model_(&model) {
  const Index d = model.config_.embed_dim;
  if (memory.cols() != d) {
    throw ShapeError("decode: encoder output " + memory.shape_string() + " does not match embed dim " +
                     std::to_string(d));
  }
  NoGradGuard no_grad;
  for (const auto& layer : model.decoder_) {
    LayerCache c;
    c.keys.resize(0, d);
    c.values.resize(0, d);
    c.cross_keys = matmul(memory, layer.cross_attention.key).value();
    c.cross_values = matmul(memory, layer.cross_attention.value).value();
    layers_.push_back(std::move(c));
  }
}

RowVector IncrementalDecoder::step(const RowVector& input) {
  NoGradGuard no_grad;
  const ProgressiveTransformer& m = *model_;
  const ModelConfig& c = m.config_;
  Tensor x = m.embed_joints(Tensor(Matrix(input)));
  for (size_t i = 0; i < layers_.size(); ++i) {
    const DecoderLayerWeights& layer = m.decoder_[i];
    LayerCache& cache = layers_[i];
    auto self = [&](const Tensor& h) {
      append_row(cache.keys, matmul(h, layer.self_attention.key).value());
      append_row(cache.values, matmul(h, layer.self_attention.value).value());
      return cached_attention(h, cache.keys, cache.values, layer.self_attention, c.heads);
    };
    auto cross = [&](const Tensor& h) {
      return cached_attention(h, cache.cross_keys, cache.cross_values, layer.cross_attention, c.heads);
    };
    if (c.pre_norm) {
      x = add(x, self(norm(x, layer.norm1)));
      x = add(x, cross(norm(x, layer.norm2)));
      x = add(x, feed_forward(norm(x, layer.norm3), layer.feed_forward));
    } else {
      x = residual_norm(x, self(x), layer.norm1);
      x = residual_norm(x, cross(x), layer.norm2);
      x = residual_norm(x, feed_forward(x, layer.feed_forward), layer.norm3);
    }
  }
  if (c.pre_norm) x = norm(x, m.decoder_norm_);
  ++length_;
  if (c.head == OutputHead::mdn) {
    MdnHeadOptions opts;
    opts.components = c.mixtures;
    opts.dim = c.frame_dim();
    opts.sigma_floor = c.sigma_floor;
    opts.fixed_unit_sigma = c.mdn_fixed_sigma;
    return sample(mdn_head(x, m.mdn_, opts).frame(0));
  }
  return linear(x, m.out_weight_, m.out_bias_).value().block(0, 0, 1, c.frame_dim());
}

}  // namespace progseq
