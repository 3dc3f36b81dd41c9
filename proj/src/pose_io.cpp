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

#include "progseq/pose_io.hpp"

#include "progseq/error.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace progseq {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw Error("format_number: conversion failed");
  return std::string(buf, ptr);
}

void write_poseq(std::ostream& out, const PoseSequence& seq) {
  seq.validate();
  out << "POSEQ1 " << seq.joints << ' ' << seq.length() << '\n';
  for (Index u = 0; u < seq.length(); ++u) {
    for (Index d = 0; d < seq.channels(); ++d) out << format_number(seq.frames(u, d)) << ' ';
    out << format_number(seq.counters[static_cast<size_t>(u)]) << '\n';
  }
}

void write_poseq(const fs::path& path, const PoseSequence& seq) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_poseq(out, seq);
}

namespace {

double parse_number(const std::string& tok, int line) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) throw ParseError("invalid number '" + tok + "'", line);
  return v;
}

long parse_count(const std::string& tok, int line, const char* what) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size() || v < 0) {
    throw ParseError(std::string("invalid ") + what + " '" + tok + "'", line);
  }
  return v;
}

}  // namespace

PoseSequence read_poseq(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing POSEQ1 header", 1);
  std::istringstream header(line);
  std::string magic, j_tok, u_tok, extra;
  header >> magic >> j_tok >> u_tok;
  if (magic != "POSEQ1" || j_tok.empty() || u_tok.empty() || (header >> extra)) {
    throw ParseError("malformed header, expected 'POSEQ1 <J> <U>'", 1);
  }
  const long joints = parse_count(j_tok, 1, "joint count");
  const long frames = parse_count(u_tok, 1, "frame count");
  if (joints < 1) throw ParseError("joint count must be >= 1", 1);

  PoseSequence seq;
  seq.joints = static_cast<int>(joints);
  seq.frames.resize(frames, 3 * joints);
  seq.counters.resize(static_cast<size_t>(frames));
  for (long u = 0; u < frames; ++u) {
    const int line_no = static_cast<int>(u) + 2;
    if (!std::getline(in, line)) throw ParseError("expected " + std::to_string(frames) + " frame lines", line_no);
    std::istringstream row(line);
    std::string tok;
    long col = 0;
    while (row >> tok) {
      if (col > 3 * joints) throw ParseError("too many values", line_no);
      const double v = parse_number(tok, line_no);
      if (col < 3 * joints) {
        seq.frames(u, col) = v;
      } else {
        seq.counters[static_cast<size_t>(u)] = v;
      }
      ++col;
    }
    if (col != 3 * joints + 1) {
      throw ParseError("expected " + std::to_string(3 * joints + 1) + " values, got " + std::to_string(col), line_no);
    }
  }
  if (!seq.frames.allFinite()) throw ParseError("non-finite joint value", 0);
  return seq;
}

PoseSequence read_poseq(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  try {
    return read_poseq(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}

namespace {

std::string numbered_file(const std::string& dir, size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%05zu.poseq", i);
  return dir + "/" + buf;
}

}  // namespace

void save_corpus(const Corpus& corpus, const fs::path& dir) {
  fs::create_directories(dir / "templates");
  json manifest;
  manifest["format"] = "progseq-corpus-1";
  manifest["seed"] = corpus.seed;
  manifest["joints"] = corpus.joints;
  manifest["vocabulary"] = corpus.vocab.content_tokens();
  manifest["reserved"] = {{"pad", Vocabulary::kPad}, {"bos", Vocabulary::kBos}};
  json templates = json::array();
  for (const auto& t : corpus.templates) {
    const std::string file = "templates/" + corpus.vocab.token(t.symbol) + ".poseq";
    PoseSequence seq = counter_encode(t.trajectory);
    seq.joints = corpus.joints;
    write_poseq(dir / file, seq);
    templates.push_back({{"token", corpus.vocab.token(t.symbol)}, {"length", t.length()}, {"file", file}});
  }
  manifest["templates"] = templates;
  json splits = json::object();
  for (const char* name : {"train", "dev", "test"}) {
    fs::create_directories(dir / name);
    json items = json::array();
    const auto& examples = corpus.split(name);
    for (size_t i = 0; i < examples.size(); ++i) {
      const std::string file = numbered_file(name, i);
      write_poseq(dir / file, examples[i].pose);
      items.push_back({{"tokens", corpus.vocab.decode(examples[i].tokens)}, {"file", file}});
    }
    splits[name] = items;
  }
  manifest["splits"] = splits;
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  out << manifest.dump(2) << '\n';
}

Corpus load_corpus(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw Error("cannot read " + (dir / "manifest.json").string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest.json: ") + e.what(), 0);
  }
  Corpus corpus;
  try {
    corpus.seed = manifest.at("seed").get<std::uint64_t>();
    corpus.joints = manifest.at("joints").get<int>();
    corpus.vocab = Vocabulary(manifest.at("vocabulary").get<std::vector<std::string>>());
    for (const auto& t : manifest.at("templates")) {
      SymbolTemplate tmpl;
      tmpl.symbol = corpus.vocab.id(t.at("token").get<std::string>());
      tmpl.trajectory = read_poseq(dir / t.at("file").get<std::string>()).frames;
      corpus.templates.push_back(std::move(tmpl));
    }
    for (const char* name : {"train", "dev", "test"}) {
      auto& bucket = name == std::string("train") ? corpus.train : (name == std::string("dev") ? corpus.dev : corpus.test);
      for (const auto& item : manifest.at("splits").at(name)) {
        Example e;
        e.tokens = corpus.vocab.encode(item.at("tokens").get<std::vector<std::string>>());
        e.pose = read_poseq(dir / item.at("file").get<std::string>());
        if (e.pose.joints != corpus.joints) throw ConfigError("joint count mismatch in " + item.at("file").get<std::string>());
        bucket.push_back(std::move(e));
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest.json: ") + e.what(), 0);
  }
  return corpus;
}

}  // namespace progseq
