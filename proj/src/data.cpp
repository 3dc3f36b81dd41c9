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

#include "progseq/data.hpp"

#include "progseq/error.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>
#include <set>

namespace progseq {

// ---- Vocabulary ----

Vocabulary::Vocabulary(std::vector<std::string> content_tokens) {
  tokens_ = {"<pad>", "<bos>"};
  std::set<std::string> seen(tokens_.begin(), tokens_.end());
  for (auto& t : content_tokens) {
    if (t.empty()) throw ConfigError("vocabulary: empty token");
    if (!seen.insert(t).second) throw ConfigError("vocabulary: duplicate token '" + t + "'");
    tokens_.push_back(std::move(t));
  }
}

Vocabulary Vocabulary::numbered(int content_count) {
  std::vector<std::string> names;
  for (int k = 0; k < content_count; ++k) {
    std::string n = std::to_string(k);
    names.push_back("w" + std::string(n.size() < 2 ? 2 - n.size() : 0, '0') + n);
  }
  return Vocabulary(std::move(names));
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw ConfigError("vocabulary: id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<size_t>(id)];
}

int Vocabulary::id(const std::string& token) const {
  for (size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i] == token) return static_cast<int>(i);
  }
  throw ConfigError("unknown token '" + token + "'");
}

std::vector<std::string> Vocabulary::content_tokens() const {
  return {tokens_.begin() + kFirstContent, tokens_.end()};
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::vector<std::string> Vocabulary::decode(std::span<const int> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(token(i));
  return out;
}

// ---- PoseSequence ----

Matrix PoseSequence::joined() const {
  Matrix out(frames.rows(), frames.cols() + 1);
  out.leftCols(frames.cols()) = frames;
  for (Index u = 0; u < frames.rows(); ++u) out(u, frames.cols()) = counters[static_cast<size_t>(u)];
  return out;
}

void PoseSequence::validate() const {
  if (frames.cols() != 3 * joints) {
    throw ConfigError("pose sequence: expected " + std::to_string(3 * joints) + " channels, got " +
                      std::to_string(frames.cols()));
  }
  if (static_cast<Index>(counters.size()) != frames.rows()) throw ConfigError("pose sequence: counter count mismatch");
  if (!frames.allFinite()) throw ConfigError("pose sequence: non-finite joint value");
}

// ---- Corpus ----

const std::vector<Example>& Corpus::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "dev") return dev;
  if (name == "test") return test;
  throw ConfigError("unknown split '" + name + "' (expected train, dev or test)");
}

const SymbolTemplate& Corpus::template_for(int token_id) const {
  const int k = token_id - Vocabulary::kFirstContent;
  if (k < 0 || k >= static_cast<int>(templates.size())) {
    throw ConfigError("no template for token id " + std::to_string(token_id));
  }
  return templates[static_cast<size_t>(k)];
}

Index Corpus::max_frames() const {
  Index n = 0;
  for (const auto* s : {&train, &dev, &test}) {
    for (const auto& e : *s) n = std::max(n, e.pose.length());
  }
  return n;
}

Index Corpus::max_tokens() const {
  Index n = 0;
  for (const auto* s : {&train, &dev, &test}) {
    for (const auto& e : *s) n = std::max(n, static_cast<Index>(e.tokens.size()));
  }
  return n;
}

Matrix compose_target(std::span<const SymbolTemplate> templates, std::span<const int> tokens) {
  if (tokens.empty()) throw ConfigError("compose_target: empty sentence");
  std::vector<const Matrix*> parts;
  for (auto it = tokens.rbegin(); it != tokens.rend(); ++it) {
    const int k = *it - Vocabulary::kFirstContent;
    if (k < 0 || k >= static_cast<int>(templates.size())) {
      throw ConfigError("compose_target: token id " + std::to_string(*it) + " has no template");
    }
    parts.push_back(&templates[static_cast<size_t>(k)].trajectory);
  }
  Index total = 0;
  for (const auto* p : parts) total += p->rows();
  total += kTransitionFrames * static_cast<Index>(parts.size() - 1);
  Matrix out(total, parts.front()->cols());
  Index row = 0;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) {
      const RowVector from = parts[i - 1]->bottomRows(1);
      const RowVector to = parts[i]->topRows(1);
      for (Index s = 1; s <= kTransitionFrames; ++s) {
        const Scalar t = static_cast<Scalar>(s) / static_cast<Scalar>(kTransitionFrames + 1);
        out.row(row++) = (1.0 - t) * from + t * to;
      }
    }
    out.middleRows(row, parts[i]->rows()) = *parts[i];
    row += parts[i]->rows();
  }
  return out;
}

Corpus generate_corpus(const CorpusOptions& o) {
  if (o.vocab_size < 2) throw ConfigError("generate_corpus: vocab size must be >= 2");
  if (o.joints < 1) throw ConfigError("generate_corpus: joint count must be >= 1");
  if (o.sentence_count < 3) throw ConfigError("generate_corpus: need at least 3 sentences to split");
  if (o.min_sentence_tokens < 1 || o.max_sentence_tokens < o.min_sentence_tokens) {
    throw ConfigError("generate_corpus: invalid sentence length range");
  }
  if (o.min_template_frames < 1 || o.max_template_frames < o.min_template_frames) {
    throw ConfigError("generate_corpus: invalid template length range");
  }

  Corpus corpus;
  corpus.seed = o.seed;
  corpus.joints = o.joints;
  corpus.vocab = Vocabulary::numbered(o.vocab_size);
  std::mt19937_64 rng(o.seed);

  const Index channels = 3 * o.joints;
  std::uniform_int_distribution<int> length_dist(o.min_template_frames, o.max_template_frames);
  std::uniform_real_distribution<Scalar> amp_dist(0.3, 1.0);
  std::uniform_real_distribution<Scalar> freq_dist(0.5, 2.0);
  std::uniform_real_distribution<Scalar> phase_dist(0.0, 2.0 * std::numbers::pi);
  for (int k = 0; k < o.vocab_size; ++k) {
    SymbolTemplate t;
    t.symbol = k + Vocabulary::kFirstContent;
    const Index len = length_dist(rng);
    t.trajectory.resize(len, channels);
    for (Index d = 0; d < channels; ++d) {
      const Scalar amp = amp_dist(rng);
      const Scalar freq = freq_dist(rng);
      const Scalar phase = phase_dist(rng);
      for (Index l = 0; l < len; ++l) {
        t.trajectory(l, d) = amp * std::sin(2.0 * std::numbers::pi * freq * static_cast<Scalar>(l) /
                                                static_cast<Scalar>(len) +
                                            phase);
      }
    }
    corpus.templates.push_back(std::move(t));
  }

  std::uniform_int_distribution<int> sentence_len(o.min_sentence_tokens, o.max_sentence_tokens);
  std::uniform_int_distribution<int> token_dist(Vocabulary::kFirstContent, Vocabulary::kFirstContent + o.vocab_size - 1);
  std::set<std::vector<int>> seen;
  std::vector<std::vector<int>> sentences;
  int attempts = 0;
  const int max_attempts = o.sentence_count * 1000;
  while (static_cast<int>(sentences.size()) < o.sentence_count) {
    if (++attempts > max_attempts) throw ConfigError("generate_corpus: cannot draw enough distinct sentences");
    std::vector<int> s(static_cast<size_t>(sentence_len(rng)));
    for (auto& tok : s) tok = token_dist(rng);
    if (seen.insert(s).second) sentences.push_back(std::move(s));
  }

  const int n = o.sentence_count;
  const int n_dev = std::max(1, static_cast<int>(std::lround(n * o.dev_fraction)));
  const int n_test = std::max(1, static_cast<int>(std::lround(n * o.test_fraction)));
  const int n_train = n - n_dev - n_test;
  if (n_train < 1) throw ConfigError("generate_corpus: split fractions leave no training sentences");
  for (int i = 0; i < n; ++i) {
    Example e;
    e.tokens = sentences[static_cast<size_t>(i)];
    e.pose = counter_encode(compose_target(corpus.templates, e.tokens));
    e.pose.joints = o.joints;
    auto& bucket = i < n_train ? corpus.train : (i < n_train + n_dev ? corpus.dev : corpus.test);
    bucket.push_back(std::move(e));
  }
  return corpus;
}

PoseSequence counter_encode(const Matrix& frames) {
  const Index u_total = frames.rows();
  if (u_total == 0) throw ConfigError("counter_encode: sequence has no frames");
  PoseSequence seq;
  seq.frames = frames;
  seq.joints = static_cast<int>(frames.cols() / 3);
  seq.counters.resize(static_cast<size_t>(u_total));
  for (Index u = 1; u <= u_total; ++u) {
    seq.counters[static_cast<size_t>(u - 1)] = static_cast<Scalar>(u) / static_cast<Scalar>(u_total);
  }
  return seq;
}

NormalizeResult normalize_skeleton(const Matrix& frames, int reference_joint, std::span<const int> scale_group,
                                   Scalar target_scale) {
  const Index joints = frames.cols() / 3;
  if (frames.cols() % 3 != 0) throw ConfigError("normalize_skeleton: channel count is not a multiple of 3");
  if (reference_joint < 0 || reference_joint >= joints) {
    throw ConfigError("normalize_skeleton: reference joint " + std::to_string(reference_joint) + " out of range");
  }
  for (int j : scale_group) {
    if (j < 0 || j >= joints) throw ConfigError("normalize_skeleton: scale-group joint out of range");
  }
  NormalizeResult result;
  result.frames = frames;
  Matrix& out = result.frames;
  for (Index u = 0; u < out.rows(); ++u) {
    const RowVector ref = out.block(u, 3 * reference_joint, 1, 3);
    for (Index j = 0; j < joints; ++j) out.block(u, 3 * j, 1, 3) -= ref;
  }

  Scalar sq = 0;
  Index n = 0;
  for (Index u = 0; u < out.rows(); ++u) {
    for (int j : scale_group) {
      sq += out.block(u, 3 * j, 1, 3).squaredNorm();
      ++n;
    }
  }
  const Scalar rms = n > 0 ? std::sqrt(sq / static_cast<Scalar>(n)) : 0.0;
  if (rms <= 1e-12) {
    result.degenerate_scale = true;
    std::clog << "warning: normalize_skeleton: scale group has zero extent; scale left unchanged\n";
    return result;
  }
  out *= target_scale / rms;
  return result;
}

NoiseStatsAccumulator::NoiseStatsAccumulator(Index channels)
    : sum_(RowVector::Zero(channels)), sum_sq_(RowVector::Zero(channels)) {}

void NoiseStatsAccumulator::add(const Matrix& frames) {
  if (frames.cols() != sum_.cols()) throw ShapeError("noise stats: channel count mismatch");
  for (Index u = 1; u < frames.rows(); ++u) {
    const RowVector delta = frames.row(u) - frames.row(u - 1);
    sum_ += delta;
    sum_sq_ += delta.cwiseProduct(delta);
    ++count_;
  }
}

NoiseStats NoiseStatsAccumulator::finish() const {
  NoiseStats stats;
  stats.std_dev = RowVector::Zero(sum_.cols());
  if (count_ == 0) return stats;
  const Scalar n = static_cast<Scalar>(count_);
  for (Index d = 0; d < sum_.cols(); ++d) {
    const Scalar mu = sum_(d) / n;
    stats.std_dev(d) = std::sqrt(std::max<Scalar>(0.0, sum_sq_(d) / n - mu * mu));
  }
  return stats;
}

NoiseStats compute_noise_stats(std::span<const Example> examples) {
  if (examples.empty()) throw ConfigError("compute_noise_stats: no examples");
  NoiseStatsAccumulator acc(examples.front().pose.channels());
  for (const auto& e : examples) acc.add(e.pose.frames);
  return acc.finish();
}

PoseSequence gaussian_noise_augment(const PoseSequence& seq, const NoiseStats& stats, Scalar noise_rate,
                                    std::mt19937_64& rng) {
  if (noise_rate < 0) throw ConfigError("gaussian_noise_augment: noise rate must be >= 0");
  if (stats.std_dev.cols() != seq.channels()) throw ShapeError("gaussian_noise_augment: stats/channel mismatch");
  PoseSequence out = seq;
  if (noise_rate == 0) return out;
  std::normal_distribution<Scalar> normal(0.0, 1.0);
  for (Index u = 0; u < out.frames.rows(); ++u) {
    for (Index d = 0; d < out.frames.cols(); ++d) {
      const Scalar sd = noise_rate * stats.std_dev(d);
      const Scalar z = normal(rng);
      if (sd > 0) out.frames(u, d) += sd * z;
    }
  }
  return out;
}

PoseSequence gaussian_noise_augment(const PoseSequence& seq, const NoiseStats& stats, Scalar noise_rate,
                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return gaussian_noise_augment(seq, stats, noise_rate, rng);
}

FutureTargets future_targets(const PoseSequence& seq, int from, int to) {
  if (from < 0 || to <= from) {
    throw ConfigError("future_targets: need 0 <= from < to, got from=" + std::to_string(from) +
                      " to=" + std::to_string(to));
  }
  const Matrix joined = seq.joined();
  const Index u_total = joined.rows();
  const Index width = joined.cols();
  const Index window = to - from;
  FutureTargets ft;
  ft.targets = Matrix::Zero(u_total, window * width);
  ft.valid.setConstant(u_total, window, false);
  for (Index u = 0; u < u_total; ++u) {
    for (Index w = 0; w < window; ++w) {
      const Index frame = u + from + w;  // 0-based index of frame u+1+from+w
      if (frame < u_total) {
        ft.targets.block(u, w * width, 1, width) = joined.row(frame);
        ft.valid(u, w) = true;
      }
    }
  }
  return ft;
}

PoseSequence just_counter_inputs(const PoseSequence& seq) {
  PoseSequence out = seq;
  out.frames.setZero();
  return out;
}

Matrix decoder_inputs(const PoseSequence& seq) {
  const Matrix joined = seq.joined();
  Matrix out = Matrix::Zero(joined.rows(), joined.cols());
  if (joined.rows() > 1) out.bottomRows(joined.rows() - 1) = joined.topRows(joined.rows() - 1);
  return out;
}

}  // namespace progseq
