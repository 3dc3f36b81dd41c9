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

#include "progseq/tensor.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace progseq {

/// Symbol inventory. Ids are dense; 0 and 1 are reserved for PAD and BOS,
/// content tokens start at 2.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kFirstContent = 2;

  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> content_tokens);
  /// Content tokens named w00, w01, ...
  static Vocabulary numbered(int content_count);

  int size() const { return static_cast<int>(tokens_.size()); }
  int content_count() const { return size() - kFirstContent; }
  const std::string& token(int id) const;
  /// Throws ConfigError naming the token when it is unknown.
  int id(const std::string& token) const;
  bool is_content(int id) const { return id >= kFirstContent && id < size(); }
  std::vector<std::string> content_tokens() const;
  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(std::span<const int> ids) const;

 private:
  std::vector<std::string> tokens_;
};

/// U frames of 3J joint coordinates plus one counter per frame.
struct PoseSequence {
  Matrix frames;
  std::vector<Scalar> counters;
  int joints = 0;

  Index length() const { return frames.rows(); }
  Index channels() const { return frames.cols(); }
  /// U x (3J+1): joints then counter.
  Matrix joined() const;
  /// Throws ConfigError when shapes disagree or values are not finite.
  void validate() const;
};

/// Per-symbol motion primitive used to synthesise target trajectories.
struct SymbolTemplate {
  int symbol = 0;
  Matrix trajectory;  // L x 3J, values in [-1, 1]
  Index length() const { return trajectory.rows(); }
};

struct Example {
  std::vector<int> tokens;
  PoseSequence pose;
};

struct Corpus {
  std::uint64_t seed = 0;
  int joints = 0;
  Vocabulary vocab;
  std::vector<SymbolTemplate> templates;  // indexed by id - kFirstContent
  std::vector<Example> train;
  std::vector<Example> dev;
  std::vector<Example> test;

  /// "train", "dev" or "test"; ConfigError otherwise.
  const std::vector<Example>& split(const std::string& name) const;
  const SymbolTemplate& template_for(int token_id) const;
  /// Longest target sequence across all splits.
  Index max_frames() const;
  Index max_tokens() const;
};

struct CorpusOptions {
  std::uint64_t seed = 1;
  int vocab_size = 12;
  int sentence_count = 750;
  int joints = 8;
  int min_sentence_tokens = 2;
  int max_sentence_tokens = 6;
  int min_template_frames = 8;
  int max_template_frames = 16;
  double dev_fraction = 0.1;
  double test_fraction = 0.1;
};

inline constexpr Index kTransitionFrames = 3;

/// Seeded synthetic corpus: each content symbol gets a sinusoidal template;
/// a sentence's target is its templates in reversed token order joined by
/// kTransitionFrames linearly interpolated frames. Sentences are distinct,
/// so the splits are disjoint.
Corpus generate_corpus(const CorpusOptions& options);

/// Target frames (without counters) for `tokens` under the corpus rule.
Matrix compose_target(std::span<const SymbolTemplate> templates, std::span<const int> tokens);

/// Appends counters c_u = u/U (u = 1..U). Throws ConfigError on U = 0.
PoseSequence counter_encode(const Matrix& frames);

struct NormalizeResult {
  Matrix frames;
  bool degenerate_scale = false;
};

/// Moves `reference_joint` to the origin in every frame, then scales all
/// coordinates so the RMS distance of the `scale_group` joints from the
/// reference equals `target_scale`. A zero-extent group leaves the scale
/// unchanged and sets `degenerate_scale`.
NormalizeResult normalize_skeleton(const Matrix& frames, int reference_joint, std::span<const int> scale_group,
                                   Scalar target_scale);

/// Per-coordinate standard deviation of frame-to-frame deltas.
struct NoiseStats {
  RowVector std_dev;
};

class NoiseStatsAccumulator {
 public:
  explicit NoiseStatsAccumulator(Index channels);
  void add(const Matrix& frames);
  NoiseStats finish() const;
  Index count() const { return count_; }

 private:
  RowVector sum_;
  RowVector sum_sq_;
  Index count_ = 0;
};

NoiseStats compute_noise_stats(std::span<const Example> examples);

/// frames + eps, eps[u][d] ~ N(0, (noise_rate * std_dev[d])^2); counters
/// untouched.
PoseSequence gaussian_noise_augment(const PoseSequence& seq, const NoiseStats& stats, Scalar noise_rate,
                                    std::mt19937_64& rng);
PoseSequence gaussian_noise_augment(const PoseSequence& seq, const NoiseStats& stats, Scalar noise_rate,
                                    std::uint64_t seed);

/// Multi-frame regression targets. For decoder input position u (0 is the
/// start frame), block w holds joined frame u+1+from+w (1-based), w in
/// [0, to-from). `valid(u, w)` is false past the end of the sequence.
struct FutureTargets {
  Matrix targets;  // U x (W * (3J+1)), zeros where invalid
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> valid;  // U x W
  Index window() const { return valid.cols(); }
};

FutureTargets future_targets(const PoseSequence& seq, int from, int to);

/// Joint channels zeroed, counters kept.
PoseSequence just_counter_inputs(const PoseSequence& seq);

/// Teacher-forced decoder inputs: a zero-pose, counter-0 start frame followed
/// by the first U-1 joined frames of `seq`. U x (3J+1).
Matrix decoder_inputs(const PoseSequence& seq);

}  // namespace progseq
