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
#include "progseq/model.hpp"

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace progseq {

using TokenSequence = std::vector<std::string>;

/// Monotone, continuous alignment between two frame sequences. Steps are
/// 0-based (i, j) pairs from (0, 0) to (Ua-1, Ub-1).
struct AlignmentPath {
  std::vector<std::pair<Index, Index>> steps;
  Scalar cost = 0;
};

/// Minimum-cost DTW with Euclidean frame distance over all given columns.
/// Callers pass joint channels only (no counter). ConfigError on empty input.
AlignmentPath dtw(const Matrix& a, const Matrix& b);
Scalar dtw_cost(const Matrix& a, const Matrix& b);

/// Corpus BLEU over orders 1..n in percent: clipped n-gram precisions,
/// geometric mean, brevity penalty; any zero precision gives 0.
Scalar corpus_bleu(const std::vector<TokenSequence>& candidates, const std::vector<TokenSequence>& references, int n);
/// Single-pair BLEU-n (a one-sentence corpus).
Scalar bleu_n(const TokenSequence& candidate, const TokenSequence& reference, int n);

/// LCS-based F-measure (beta = 1) in percent.
Scalar rouge_l(const TokenSequence& candidate, const TokenSequence& reference);
/// Mean sentence-level ROUGE-L.
Scalar corpus_rouge_l(const std::vector<TokenSequence>& candidates, const std::vector<TokenSequence>& references);

struct BackTranslateOptions {
  Index min_span = 6;
  Index max_span = 20;
};

/// Template-matching recogniser. Splits `frames` into contiguous spans with
/// lengths in [min_span, max_span], labels each span with the template of
/// least DTW cost per frame, keeps the segmentation of least total cost and
/// returns the labels in source order (reversing the corpus ordering).
std::vector<int> back_translate(const Matrix& frames, std::span<const SymbolTemplate> templates,
                                const BackTranslateOptions& options = {});

struct ScoreReport {
  Scalar bleu[4] = {0, 0, 0, 0};
  Scalar rouge_l = 0;
  Scalar dtw_mean = 0;
  int truncated_count = 0;
  std::vector<TokenSequence> hypotheses;
  std::vector<TokenSequence> references;

  /// {"bleu1","bleu2","bleu3","bleu4","rougeL","dtw_mean","truncated_count"}
  std::string to_json() const;
};

struct EvalOptions {
  BackTranslateOptions back_translation;
  /// Worker threads; results are merged in sentence order.
  int jobs = 1;
  /// 0 evaluates every example.
  size_t limit = 0;
};

using ExampleGenerator = std::function<Generation(const Example&)>;

/// generate -> back_translate -> corpus BLEU-1..4, ROUGE-L, mean DTW cost.
ScoreReport evaluate(const ExampleGenerator& generate, std::span<const Example> examples, const Corpus& corpus,
                     const EvalOptions& options = {});

ScoreReport evaluate_model(const ProgressiveTransformer& model, const Corpus& corpus, const std::string& split,
                           const GenerateOptions& mode = {}, const EvalOptions& options = {});

}  // namespace progseq
