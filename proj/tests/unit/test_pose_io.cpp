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

#include "progseq/error.hpp"
#include "progseq/pose_io.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace progseq;
namespace fs = std::filesystem;

namespace {
fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(PROGSEQ_TEST_TMP) / "pose_io" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int parse_line_of(const std::string& text) {
  std::istringstream in(text);
  try {
    read_poseq(in);
  } catch (const ParseError& e) {
    return e.line();
  }
  return -1;
}
}  // namespace

TEST_CASE("POSEQ1 round-trips values bit-exactly") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix f(7, 6);
  for (Index i = 0; i < f.size(); ++i) f.data()[i] = n(rng) * 1e3;
  f(0, 0) = 1e-300;
  f(1, 1) = -0.0;
  PoseSequence seq = counter_encode(f);
  seq.joints = 2;
  std::ostringstream out;
  write_poseq(out, seq);
  std::istringstream in(out.str());
  const PoseSequence back = read_poseq(in);
  CHECK(back.joints == 2);
  CHECK(back.frames == seq.frames);
  CHECK(back.counters == seq.counters);
  std::ostringstream again;
  write_poseq(again, back);
  CHECK(again.str() == out.str());
  CHECK(out.str().rfind("POSEQ1 2 7\n", 0) == 0);
}

TEST_CASE("shortest round-trip formatting") {
  CHECK(format_number(0.25) == "0.25");
  CHECK(format_number(1.0) == "1");
  CHECK(std::stod(format_number(0.1 + 0.2)) == 0.1 + 0.2);
}

TEST_CASE("malformed POSEQ1 input reports the line number") {
  CHECK(parse_line_of("") == 1);
  CHECK(parse_line_of("POSE 1 1\n0 0 0 1\n") == 1);
  CHECK(parse_line_of("POSEQ1 1 x\n") == 1);
  CHECK(parse_line_of("POSEQ1 1 2\n0 0 0 0.5\n0 0 1\n") == 3);
  CHECK(parse_line_of("POSEQ1 1 2\n0 0 0 0.5\n0 0 0 1 9\n") == 3);
  CHECK(parse_line_of("POSEQ1 1 2\n0 0 zero 0.5\n0 0 0 1\n") == 2);
  CHECK(parse_line_of("POSEQ1 1 3\n0 0 0 0.5\n0 0 0 1\n") == 4);
  std::istringstream in("POSEQ1 1 1\n0 0 0 1 2\n");
  try {
    read_poseq(in);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("corpus save and load round-trip") {
  CorpusOptions o;
  o.seed = 9;
  o.vocab_size = 5;
  o.sentence_count = 30;
  o.joints = 3;
  const Corpus c = generate_corpus(o);
  const fs::path dir = scratch("corpus");
  save_corpus(c, dir / "a");
  const Corpus back = load_corpus(dir / "a");
  CHECK(back.seed == c.seed);
  CHECK(back.joints == 3);
  CHECK(back.vocab.content_tokens() == c.vocab.content_tokens());
  REQUIRE(back.templates.size() == c.templates.size());
  for (size_t k = 0; k < c.templates.size(); ++k) {
    CHECK(back.templates[k].symbol == c.templates[k].symbol);
    CHECK(back.templates[k].trajectory == c.templates[k].trajectory);
  }
  for (const char* split : {"train", "dev", "test"}) {
    REQUIRE(back.split(split).size() == c.split(split).size());
    for (size_t i = 0; i < c.split(split).size(); ++i) {
      CHECK(back.split(split)[i].tokens == c.split(split)[i].tokens);
      CHECK(back.split(split)[i].pose.frames == c.split(split)[i].pose.frames);
    }
  }
  // Same corpus written twice gives byte-identical files.
  save_corpus(c, dir / "b");
  CHECK(slurp(dir / "a" / "manifest.json") == slurp(dir / "b" / "manifest.json"));
  CHECK(slurp(dir / "a" / "train" / "00000.poseq") == slurp(dir / "b" / "train" / "00000.poseq"));
}

TEST_CASE("loading a missing corpus fails cleanly") {
  CHECK_THROWS_AS(load_corpus(scratch("empty")), Error);
}
