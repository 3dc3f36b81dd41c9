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

#include "progseq/eval.hpp"

#include "progseq/error.hpp"
#include "progseq/pose_io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

namespace progseq {

namespace {

constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();

Matrix frame_distances(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("dtw: channel mismatch [" + std::to_string(a.cols()) + "] vs [" +
                                             std::to_string(b.cols()) + "]");
  Matrix d(a.rows(), b.rows());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < b.rows(); ++j) d(i, j) = (a.row(i) - b.row(j)).norm();
  }
  return d;
}

Matrix accumulated_cost(const Matrix& dist) {
  const Index n = dist.rows();
  const Index m = dist.cols();
  Matrix acc(n, m);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) {
      Scalar prev = 0;
      if (i > 0 || j > 0) {
        prev = kInf;
        if (i > 0 && j > 0) prev = acc(i - 1, j - 1);
        if (i > 0) prev = std::min(prev, acc(i - 1, j));
        if (j > 0) prev = std::min(prev, acc(i, j - 1));
      }
      acc(i, j) = prev + dist(i, j);
    }
  }
  return acc;
}

}  // namespace

AlignmentPath dtw(const Matrix& a, const Matrix& b) {
  if (a.rows() == 0 || b.rows() == 0) throw ConfigError("dtw: empty sequence");
  const Matrix acc = accumulated_cost(frame_distances(a, b));
  AlignmentPath path;
  path.cost = acc(a.rows() - 1, b.rows() - 1);
  Index i = a.rows() - 1;
  Index j = b.rows() - 1;
  path.steps.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i == 0) {
      --j;
    } else if (j == 0) {
      --i;
    } else {
      const Scalar diag = acc(i - 1, j - 1);
      const Scalar up = acc(i - 1, j);
      const Scalar left = acc(i, j - 1);
      if (diag <= up && diag <= left) {
        --i;
        --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    }
    path.steps.emplace_back(i, j);
  }
  std::reverse(path.steps.begin(), path.steps.end());
  return path;
}

Scalar dtw_cost(const Matrix& a, const Matrix& b) {
  if (a.rows() == 0 || b.rows() == 0) throw ConfigError("dtw: empty sequence");
  return accumulated_cost(frame_distances(a, b))(a.rows() - 1, b.rows() - 1);
}

// ---- BLEU / ROUGE ----

namespace {

using NGramCounts = std::map<std::vector<std::string>, int>;

NGramCounts ngrams(const TokenSequence& s, size_t n) {
  NGramCounts counts;
  if (s.size() < n) return counts;
  for (size_t i = 0; i + n <= s.size(); ++i) ++counts[TokenSequence(s.begin() + static_cast<long>(i), s.begin() + static_cast<long>(i + n))];
  return counts;
}

size_t lcs_length(const TokenSequence& a, const TokenSequence& b) {
  std::vector<size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

Scalar corpus_bleu(const std::vector<TokenSequence>& candidates, const std::vector<TokenSequence>& references, int n) {
  if (n < 1 || n > 4) throw ConfigError("bleu: order must be in 1..4");
  if (candidates.size() != references.size()) throw ConfigError("bleu: candidate/reference count mismatch");
  std::vector<double> matched(static_cast<size_t>(n), 0.0), total(static_cast<size_t>(n), 0.0);
  double cand_len = 0;
  double ref_len = 0;
  for (size_t s = 0; s < candidates.size(); ++s) {
    if (references[s].empty()) throw ConfigError("bleu: empty reference");
    cand_len += static_cast<double>(candidates[s].size());
    ref_len += static_cast<double>(references[s].size());
    for (int k = 1; k <= n; ++k) {
      const NGramCounts cand = ngrams(candidates[s], static_cast<size_t>(k));
      const NGramCounts ref = ngrams(references[s], static_cast<size_t>(k));
      for (const auto& [gram, count] : cand) {
        auto it = ref.find(gram);
        if (it != ref.end()) matched[static_cast<size_t>(k - 1)] += std::min(count, it->second);
        total[static_cast<size_t>(k - 1)] += count;
      }
    }
  }
  double log_sum = 0;
  for (int k = 0; k < n; ++k) {
    if (matched[static_cast<size_t>(k)] == 0 || total[static_cast<size_t>(k)] == 0) return 0.0;
    log_sum += std::log(matched[static_cast<size_t>(k)] / total[static_cast<size_t>(k)]);
  }
  const double bp = cand_len >= ref_len ? 1.0 : std::exp(1.0 - ref_len / cand_len);
  return 100.0 * bp * std::exp(log_sum / n);
}

Scalar bleu_n(const TokenSequence& candidate, const TokenSequence& reference, int n) {
  return corpus_bleu({candidate}, {reference}, n);
}

Scalar rouge_l(const TokenSequence& candidate, const TokenSequence& reference) {
  if (reference.empty()) throw ConfigError("rouge_l: empty reference");
  if (candidate.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(candidate, reference));
  if (lcs == 0) return 0.0;
  const double precision = lcs / static_cast<double>(candidate.size());
  const double recall = lcs / static_cast<double>(reference.size());
  return 100.0 * 2.0 * precision * recall / (precision + recall);
}

Scalar corpus_rouge_l(const std::vector<TokenSequence>& candidates, const std::vector<TokenSequence>& references) {
  if (candidates.size() != references.size()) throw ConfigError("rouge_l: candidate/reference count mismatch");
  if (candidates.empty()) return 0.0;
  double total = 0;
  for (size_t i = 0; i < candidates.size(); ++i) total += rouge_l(candidates[i], references[i]);
  return total / static_cast<double>(candidates.size());
}

// ---- back translation ----

std::vector<int> back_translate(const Matrix& frames, std::span<const SymbolTemplate> templates,
                                const BackTranslateOptions& options) {
  const Index u_total = frames.rows();
  const Index lo = options.min_span;
  const Index hi = options.max_span;
  if (lo < 1 || hi < lo) throw ConfigError("back_translate: need 1 <= min_span <= max_span");
  if (u_total < lo) {
    throw ConfigError("back_translate: " + std::to_string(u_total) + " frames is shorter than the minimum span " +
                      std::to_string(lo));
  }
  if (templates.empty()) throw ConfigError("back_translate: empty template bank");

  // span_cost(s, l - lo) = least per-frame DTW cost of frames[s, s+l) over templates.
  Matrix span_cost = Matrix::Constant(u_total, hi - lo + 1, kInf);
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> span_label =
      Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Constant(u_total, hi - lo + 1, -1);
  for (const auto& tmpl : templates) {
    const Matrix dist = frame_distances(frames, tmpl.trajectory);
    const Index m = tmpl.length();
    std::vector<Scalar> prev(static_cast<size_t>(m)), cur(static_cast<size_t>(m));
    for (Index s = 0; s + lo <= u_total; ++s) {
      const Index max_len = std::min(hi, u_total - s);
      for (Index l = 1; l <= max_len; ++l) {
        const Index row = s + l - 1;
        for (Index j = 0; j < m; ++j) {
          Scalar best;
          if (l == 1) {
            best = j == 0 ? 0.0 : cur[static_cast<size_t>(j - 1)];
          } else {
            best = prev[static_cast<size_t>(j)];
            if (j > 0) best = std::min({best, prev[static_cast<size_t>(j - 1)], cur[static_cast<size_t>(j - 1)]});
          }
          cur[static_cast<size_t>(j)] = best + dist(row, j);
        }
        if (l >= lo) {
          const Scalar c = cur[static_cast<size_t>(m - 1)] / static_cast<Scalar>(l);
          if (c < span_cost(s, l - lo)) {
            span_cost(s, l - lo) = c;
            span_label(s, l - lo) = tmpl.symbol;
          }
        }
        std::swap(prev, cur);
      }
    }
  }

  std::vector<Scalar> best(static_cast<size_t>(u_total + 1), kInf);
  std::vector<Index> back(static_cast<size_t>(u_total + 1), 0);
  best[0] = 0;
  for (Index p = lo; p <= u_total; ++p) {
    for (Index l = lo; l <= std::min(hi, p); ++l) {
      const Index s = p - l;
      const Scalar prior = best[static_cast<size_t>(s)];
      if (prior == kInf) continue;
      const Scalar c = prior + span_cost(s, l - lo);
      if (c < best[static_cast<size_t>(p)]) {
        best[static_cast<size_t>(p)] = c;
        back[static_cast<size_t>(p)] = l;
      }
    }
  }
  if (best[static_cast<size_t>(u_total)] == kInf) {
    throw ConfigError("back_translate: no segmentation of " + std::to_string(u_total) + " frames fits the span bounds");
  }
  std::vector<int> labels;
  for (Index p = u_total; p > 0;) {
    const Index l = back[static_cast<size_t>(p)];
    labels.push_back(span_label(p - l, l - lo));
    p -= l;
  }
  // `labels` is in reverse time order, which is source order for this corpus.
  return labels;
}

// ---- reports ----

std::string ScoreReport::to_json() const {
  std::ostringstream out;
  out << "{\"bleu1\": " << format_number(bleu[0]) << ", \"bleu2\": " << format_number(bleu[1])
      << ", \"bleu3\": " << format_number(bleu[2]) << ", \"bleu4\": " << format_number(bleu[3])
      << ", \"rougeL\": " << format_number(rouge_l) << ", \"dtw_mean\": " << format_number(dtw_mean)
      << ", \"truncated_count\": " << truncated_count << "}";
  return out.str();
}

ScoreReport evaluate(const ExampleGenerator& generate, std::span<const Example> examples, const Corpus& corpus,
                     const EvalOptions& options) {
  const size_t count = options.limit > 0 ? std::min(options.limit, examples.size()) : examples.size();
  if (count == 0) throw ConfigError("evaluate: no examples");
  struct Item {
    TokenSequence hypothesis;
    Scalar dtw = 0;
    bool truncated = false;
  };
  std::vector<Item> items(count);
  std::vector<std::exception_ptr> errors(count);

  auto work = [&](size_t i) {
    try {
      const Example& ex = examples[i];
      Generation gen = generate(ex);
      Item& item = items[i];
      item.truncated = gen.truncated;
      if (gen.pose.length() >= options.back_translation.min_span) {
        item.hypothesis = corpus.vocab.decode(back_translate(gen.pose.frames, corpus.templates, options.back_translation));
      }
      item.dtw = gen.pose.length() > 0 ? dtw_cost(gen.pose.frames, ex.pose.frames) : kInf;
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };

  const int jobs = std::max(1, options.jobs);
  if (jobs == 1) {
    for (size_t i = 0; i < count; ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w) {
      pool.emplace_back([&, w] {
        for (size_t i = static_cast<size_t>(w); i < count; i += static_cast<size_t>(jobs)) work(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ScoreReport report;
  Scalar dtw_total = 0;
  for (size_t i = 0; i < count; ++i) {
    report.hypotheses.push_back(items[i].hypothesis);
    report.references.push_back(corpus.vocab.decode(examples[i].tokens));
    dtw_total += items[i].dtw;
    report.truncated_count += items[i].truncated ? 1 : 0;
  }
  for (int n = 1; n <= 4; ++n) report.bleu[n - 1] = corpus_bleu(report.hypotheses, report.references, n);
  report.rouge_l = corpus_rouge_l(report.hypotheses, report.references);
  report.dtw_mean = dtw_total / static_cast<Scalar>(count);
  return report;
}

ScoreReport evaluate_model(const ProgressiveTransformer& model, const Corpus& corpus, const std::string& split,
                           const GenerateOptions& mode, const EvalOptions& options) {
  const auto& examples = corpus.split(split);
  auto gen = [&](const Example& ex) {
    GenerateOptions opts = mode;
    if (opts.mode == DecodeMode::teacher_timing && opts.reference_length <= 0) opts.reference_length = ex.pose.length();
    return model.generate(ex.tokens, opts);
  };
  return evaluate(gen, examples, corpus, options);
}

}  // namespace progseq
