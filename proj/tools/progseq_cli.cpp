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

// progseq command-line driver.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include "progseq/checkpoint.hpp"
#include "progseq/config_io.hpp"
#include "progseq/error.hpp"
#include "progseq/eval.hpp"
#include "progseq/gradcheck.hpp"
#include "progseq/pose_io.hpp"
#include "progseq/trainer.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace progseq;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Bad flag values detected after CLI11 parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("PROGSEQ_SEED");
  if (!s || !*s) return std::nullopt;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (*end != '\0') throw UsageError("PROGSEQ_SEED must be a non-negative integer, got '" + std::string(s) + "'");
  return v;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write " + p.string());
}

void write_run_config(const fs::path& dir, const std::string& command, Json body) {
  Json j;
  j["command"] = command;
  for (auto& [k, v] : body.items()) j[k] = v;
  write_text(dir / "run_config.json", j.dump(2) + "\n");
}

void require_empty_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_directory(dir)) throw Error(dir.string() + " exists and is not a directory");
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) throw Error("output directory " + dir.string() + " is not empty (use --force to overwrite)");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

Json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("cannot open " + p.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError(p.string() + ": " + e.what());
  }
}

std::vector<std::string> split_tokens(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

GenerateOptions parse_mode(const std::string& mode) {
  GenerateOptions g;
  if (mode == "feedback") return g;
  if (mode.rfind("teacher:", 0) == 0) {
    const std::string n = mode.substr(8);
    char* end = nullptr;
    const long v = std::strtol(n.c_str(), &end, 10);
    if (!n.empty() && *end == '\0' && v >= 1) {
      g.mode = DecodeMode::teacher_timing;
      g.reference_length = v;
      return g;
    }
  }
  if (mode == "teacher") {
    g.mode = DecodeMode::teacher_timing;  // per-example reference length
    return g;
  }
  throw UsageError("--mode must be feedback, teacher or teacher:<U> with U >= 1, got '" + mode + "'");
}

// ---- make-data ----

struct MakeDataArgs {
  CorpusOptions opts;
  fs::path out;
  bool force = false;
};

int run_make_data(MakeDataArgs& a) {
  if (auto s = env_seed()) a.opts.seed = *s;
  require_empty_dir(a.out, a.force);
  const Corpus corpus = generate_corpus(a.opts);
  save_corpus(corpus, a.out);
  Json body;
  body["seed"] = a.opts.seed;
  body["vocab"] = a.opts.vocab_size;
  body["sentences"] = a.opts.sentence_count;
  body["joints"] = a.opts.joints;
  write_run_config(a.out, "make-data", body);
  std::cout << "wrote " << corpus.train.size() << "/" << corpus.dev.size() << "/" << corpus.test.size()
            << " train/dev/test sentences to " << a.out.string() << "\n";
  return 0;
}

// ---- train ----

struct TrainArgs {
  fs::path config;
  std::string preset = "base";
  fs::path data;
  fs::path out;
  std::optional<std::string> regime;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  bool force = false;
  bool quiet = false;
};

TrainConfig resolve_train_config(const TrainArgs& a) {
  TrainConfig c = preset(a.preset);
  if (!a.config.empty()) {
    Json j = read_json_file(a.config);
    if (j.is_object() && j.contains("preset")) {
      c = preset(j["preset"].get<std::string>());
      j.erase("preset");
    }
    c = train_config_from_json(j, c);
  }
  if (a.regime) {
    c.regime = parse_regime(*a.regime);
    const bool mixture = c.regime == Regime::mdn || c.regime == Regime::mdn_adv;
    c.model.head = mixture ? OutputHead::mdn : OutputHead::regression;
  }
  if (a.epochs) c.epochs = *a.epochs;
  std::optional<std::uint64_t> seed = a.seed;
  if (auto s = env_seed()) seed = s;
  if (seed) {
    c.seed = *seed;
    c.model.seed = *seed;
    c.discriminator.seed = *seed + 1;
  }
  c.validate();
  return c;
}

int run_train(const TrainArgs& a) {
  TrainConfig config;
  try {
    config = resolve_train_config(a);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  const Corpus corpus = load_corpus(a.data);
  require_empty_dir(a.out, a.force);
  Trainer trainer(config, corpus);
  Json body;
  body["data"] = fs::absolute(a.data).lexically_normal().string();
  body["train"] = to_json(trainer.config());
  write_run_config(a.out, "train", body);

  std::ofstream log_file(a.out / "train_log.jsonl", std::ios::binary);
  const TrainLog log = trainer.train([&](const EpochLog& e) {
    log_file << e.to_json() << "\n" << std::flush;
    if (!a.quiet) {
      char secs[32];
      std::snprintf(secs, sizeof secs, "%.1f", e.seconds);
      std::cerr << "epoch " << e.epoch << " train " << e.train_loss << " dev " << e.dev_loss << " lr "
                << e.learning_rate << " (" << secs << "s)\n";
    }
  });
  save_checkpoint(a.out / "checkpoint", trainer.model(), corpus.vocab, trainer.discriminator());
  std::cout << "best epoch " << log.best_epoch << " dev loss " << log.best_dev_loss << "; checkpoint in "
            << (a.out / "checkpoint").string() << "\n";
  return 0;
}

// ---- generate ----

struct GenerateArgs {
  fs::path checkpoint;
  std::string input;
  std::string mode = "feedback";
  fs::path out;
};

int run_generate(const GenerateArgs& a) {
  GenerateOptions opts = parse_mode(a.mode);
  if (opts.mode == DecodeMode::teacher_timing && opts.reference_length < 1) {
    throw UsageError("generate needs an explicit length: --mode teacher:<U>");
  }
  const LoadedCheckpoint ck = load_checkpoint(a.checkpoint);
  const std::vector<std::string> words = split_tokens(a.input);
  if (words.empty()) throw UsageError("--input must hold at least one token");
  const std::vector<int> ids = ck.vocab.encode(words);
  const Generation gen = ck.model->generate(ids, opts);
  if (a.out.empty()) {
    write_poseq(std::cout, gen.pose);
  } else {
    write_poseq(a.out, gen.pose);
  }
  if (gen.truncated) std::cerr << "warning: generation reached the frame limit without a terminal counter\n";
  return 0;
}

// ---- evaluate ----

struct EvaluateArgs {
  fs::path checkpoint;
  fs::path data;
  std::string split = "test";
  std::string mode = "feedback";
  int jobs = 1;
  size_t limit = 0;
  fs::path out;
};

int run_evaluate(const EvaluateArgs& a) {
  const GenerateOptions opts = parse_mode(a.mode);
  const LoadedCheckpoint ck = load_checkpoint(a.checkpoint);
  const Corpus corpus = load_corpus(a.data);
  if (ck.vocab.content_tokens() != corpus.vocab.content_tokens()) {
    throw Error("checkpoint vocabulary does not match the corpus vocabulary");
  }
  EvalOptions eo;
  eo.jobs = a.jobs;
  eo.limit = a.limit;
  const ScoreReport report = evaluate_model(*ck.model, corpus, a.split, opts, eo);
  std::cout << report.to_json() << "\n";
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_text(a.out / "score_report.json", report.to_json() + "\n");
    Json body;
    body["checkpoint"] = fs::absolute(a.checkpoint).lexically_normal().string();
    body["data"] = fs::absolute(a.data).lexically_normal().string();
    body["split"] = a.split;
    body["mode"] = a.mode;
    body["limit"] = a.limit;
    write_run_config(a.out, "evaluate", body);
  }
  return 0;
}

// ---- gradcheck ----

int run_gradcheck(int seeds) {
  const auto rows = run_gradcheck_suite(seeds);
  bool ok = true;
  double total = 0;
  std::printf("%-26s %14s %10s %8s  %s\n", "check", "max rel err", "tolerance", "seconds", "result");
  for (const auto& r : rows) {
    std::printf("%-26s %14.3e %10.1e %8.3f  %s\n", r.name.c_str(), r.max_rel_error, r.tolerance, r.seconds,
                r.passed() ? "PASS" : "FAIL");
    ok = ok && r.passed();
    total += r.seconds;
  }
  std::printf("%zu checks, %.2f s, %s\n", rows.size(), total, ok ? "all passed" : "FAILURES");
  return ok ? 0 : kExitRuntime;
}

// ---- render ----

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

int run_render(const fs::path& pose_path, const fs::path& out) {
  const PoseSequence seq = read_poseq(pose_path);
  fs::create_directories(out);
  constexpr double kSize = 256.0;
  constexpr double kExtent = 1.5;  // world units mapped to the half-width
  auto px = [&](double v, bool flip) {
    const double t = (v / kExtent + 1.0) * 0.5 * kSize;
    return flip ? kSize - t : t;
  };

  std::ostringstream csv;
  csv << "frame,counter";
  for (int j = 0; j < seq.joints; ++j) csv << ",j" << j << "_x,j" << j << "_y";
  csv << "\n";
  for (Index u = 0; u < seq.length(); ++u) {
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"256\" height=\"256\" viewBox=\"0 0 256 256\">\n"
        << "<rect width=\"256\" height=\"256\" fill=\"white\"/>\n<polyline fill=\"none\" stroke=\"#888\" points=\"";
    for (int j = 0; j < seq.joints; ++j) {
      svg << (j ? " " : "") << fixed3(px(seq.frames(u, 3 * j), false)) << ","
          << fixed3(px(seq.frames(u, 3 * j + 1), true));
    }
    svg << "\"/>\n";
    csv << u << "," << format_number(seq.counters[static_cast<size_t>(u)]);
    for (int j = 0; j < seq.joints; ++j) {
      const double x = seq.frames(u, 3 * j);
      const double y = seq.frames(u, 3 * j + 1);
      svg << "<circle cx=\"" << fixed3(px(x, false)) << "\" cy=\"" << fixed3(px(y, true)) << "\" r=\"4\" fill=\"#c33\"/>\n";
      csv << "," << format_number(x) << "," << format_number(y);
    }
    csv << "\n";
    svg << "<text x=\"4\" y=\"14\" font-size=\"12\">frame " << u << " counter "
        << fixed3(seq.counters[static_cast<size_t>(u)]) << "</text>\n</svg>\n";
    char name[32];
    std::snprintf(name, sizeof name, "frame_%05lld.svg", static_cast<long long>(u));
    write_text(out / name, svg.str());
  }
  write_text(out / "frames.csv", csv.str());
  Json body;
  body["pose"] = fs::absolute(pose_path).lexically_normal().string();
  body["frames"] = seq.length();
  write_run_config(out, "render", body);
  std::cout << "rendered " << seq.length() << " frames to " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"progseq: continuous sequence production with counter decoding"};
  app.require_subcommand(1);

  MakeDataArgs md;
  auto* make_data = app.add_subcommand("make-data", "Generate a seeded synthetic corpus");
  make_data->add_option("--seed", md.opts.seed, "Corpus seed")->capture_default_str();
  make_data->add_option("--vocab", md.opts.vocab_size, "Content symbols")->capture_default_str()->check(CLI::PositiveNumber);
  make_data->add_option("--sentences", md.opts.sentence_count, "Distinct sentences")->capture_default_str()->check(CLI::PositiveNumber);
  make_data->add_option("--joints", md.opts.joints, "Joints per frame")->capture_default_str()->check(CLI::PositiveNumber);
  make_data->add_option("--out", md.out, "Output directory")->required();
  make_data->add_flag("--force", md.force, "Replace a non-empty output directory");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a model on a corpus directory");
  train->add_option("--config", ta.config, "JSON config (optional \"preset\" key plus overrides)")->check(CLI::ExistingFile);
  train->add_option("--preset", ta.preset, "Base configuration")->capture_default_str()->check(CLI::IsMember(preset_names()));
  train->add_option("--data", ta.data, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--out", ta.out, "Run directory")->required();
  train->add_option("--regime", ta.regime, "Override the regime")->check(CLI::IsMember(regime_names()));
  train->add_option("--epochs", ta.epochs, "Override the epoch count")->check(CLI::PositiveNumber);
  train->add_option("--seed", ta.seed, "Override every seed");
  train->add_flag("--force", ta.force, "Replace a non-empty run directory");
  train->add_flag("--quiet", ta.quiet, "No per-epoch progress on stderr");

  GenerateArgs ga;
  auto* generate = app.add_subcommand("generate", "Produce a pose sequence for a token sequence");
  generate->add_option("--checkpoint", ga.checkpoint, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  generate->add_option("--input", ga.input, "Space-separated tokens")->required();
  generate->add_option("--mode", ga.mode, "feedback or teacher:<U>")->capture_default_str();
  generate->add_option("--out", ga.out, "POSEQ1 output file (default stdout)");

  EvaluateArgs ea;
  auto* evaluate = app.add_subcommand("evaluate", "Back-translation scores on a split");
  evaluate->add_option("--checkpoint", ea.checkpoint, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--data", ea.data, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--split", ea.split, "Split name")->capture_default_str()->check(CLI::IsMember({"train", "dev", "test"}));
  evaluate->add_option("--mode", ea.mode, "feedback, teacher (reference lengths) or teacher:<U>")->capture_default_str();
  evaluate->add_option("--jobs", ea.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  evaluate->add_option("--limit", ea.limit, "Evaluate only the first N sentences (0 = all)")->capture_default_str();
  evaluate->add_option("--out", ea.out, "Directory for score_report.json and run_config.json");

  int seeds = 20;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every op and loss");
  gradcheck->add_option("--seeds", seeds, "Random inputs per check")->capture_default_str()->check(CLI::PositiveNumber);

  fs::path render_pose;
  fs::path render_out;
  auto* render = app.add_subcommand("render", "Per-frame SVG and CSV of a POSEQ1 file (depth dropped)");
  render->add_option("--pose", render_pose, "POSEQ1 file")->required()->check(CLI::ExistingFile);
  render->add_option("--out", render_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*make_data) return run_make_data(md);
    if (*train) return run_train(ta);
    if (*generate) return run_generate(ga);
    if (*evaluate) return run_evaluate(ea);
    if (*gradcheck) return run_gradcheck(seeds);
    if (*render) return run_render(render_pose, render_out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
