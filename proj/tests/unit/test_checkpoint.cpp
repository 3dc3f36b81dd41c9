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

#include "progseq/checkpoint.hpp"
#include "progseq/error.hpp"

#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <set>

using namespace progseq;
namespace fs = std::filesystem;

namespace {
fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(PROGSEQ_TEST_TMP) / "checkpoint" / name;
  fs::remove_all(p);
  fs::create_directories(p.parent_path());
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
}

ModelConfig small_model(int joints = 3) {
  ModelConfig m;
  m.layers = 1;
  m.heads = 2;
  m.embed_dim = 8;
  m.joints = joints;
  m.vocab_size = 6;
  m.seed = 21;
  return m;
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}
}  // namespace

TEST_CASE("save then load reproduces the float32 blob bit-exactly") {
  const ProgressiveTransformer model(small_model());
  const Vocabulary vocab = Vocabulary::numbered(4);
  const fs::path a = scratch("roundtrip_a");
  save_checkpoint(a, model, vocab);

  const LoadedCheckpoint back = load_checkpoint(a);
  CHECK(back.vocab.content_tokens() == vocab.content_tokens());
  CHECK(back.model->config().joints == 3);
  CHECK(back.model->config().embed_dim == 8);
  CHECK(back.discriminator == nullptr);
  for (const auto& p : model.parameters().items()) {
    const Matrix expected = p.tensor.value().cast<float>().cast<Scalar>();
    CHECK(back.model->parameters().at(p.name).value() == expected);
  }
  const fs::path b = scratch("roundtrip_b");
  save_checkpoint(b, *back.model, back.vocab);
  CHECK(slurp(a / "params.bin") == slurp(b / "params.bin"));
  CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
}

TEST_CASE("manifest lists every parameter exactly once") {
  const ProgressiveTransformer model(small_model());
  const fs::path dir = scratch("manifest");
  save_checkpoint(dir, model, Vocabulary::numbered(4));
  const CheckpointManifest m = read_checkpoint_manifest(dir);
  REQUIRE(m.parameters.size() == model.parameters().size());
  std::set<std::string> names;
  std::size_t offset = 0;
  for (const auto& e : m.parameters) {
    CHECK(names.insert(e.name).second);
    CHECK(model.parameters().contains(e.name));
    CHECK(e.offset == offset);
    offset += static_cast<std::size_t>(e.rows * e.cols) * sizeof(float);
  }
  CHECK(m.blob_bytes == offset);
  CHECK(fs::file_size(dir / "params.bin") == offset);
}

TEST_CASE("critic parameters travel under their own namespace") {
  const ProgressiveTransformer model(small_model());
  DiscriminatorConfig dc;
  dc.layers = 2;
  dc.channels = 4;
  dc.source_dim = 3;
  dc.joints = 3;
  dc.vocab_size = 6;
  const Discriminator disc(dc);
  const fs::path dir = scratch("critic");
  save_checkpoint(dir, model, Vocabulary::numbered(4), &disc);
  const CheckpointManifest m = read_checkpoint_manifest(dir);
  REQUIRE(m.discriminator.has_value());
  CHECK(m.discriminator->layers == 2);
  size_t critic_entries = 0;
  for (const auto& e : m.parameters) critic_entries += e.name.rfind("disc.", 0) == 0;
  CHECK(critic_entries == disc.parameters().size());
  const LoadedCheckpoint back = load_checkpoint(dir);
  REQUIRE(back.discriminator != nullptr);
  for (const auto& p : disc.parameters().items()) {
    CHECK(back.discriminator->parameters().at(p.name).value() == p.tensor.value().cast<float>().cast<Scalar>());
  }
}

TEST_CASE("joint-count mismatch is a config error") {
  const ProgressiveTransformer model(small_model(3));
  const fs::path dir = scratch("joints");
  save_checkpoint(dir, model, Vocabulary::numbered(4));
  ProgressiveTransformer other(small_model(5));
  try {
    load_parameters(dir, other);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("J=3") != std::string::npos);
    CHECK(msg.find("J=5") != std::string::npos);
  }
}

TEST_CASE("corrupt checkpoints name the offending parameter") {
  const ProgressiveTransformer model(small_model());
  const fs::path dir = scratch("corrupt");
  save_checkpoint(dir, model, Vocabulary::numbered(4));
  const std::string manifest = slurp(dir / "manifest.json");
  const std::string blob = slurp(dir / "params.bin");

  SUBCASE("truncated blob") {
    spit(dir / "params.bin", blob.substr(0, blob.size() - 8));
    CHECK_THROWS_AS(load_checkpoint(dir), Error);
  }
  SUBCASE("wrong shape") {
    auto j = nlohmann::json::parse(manifest);
    auto& params = j.at("parameters");
    const std::string name = params.at(2).at("name");
    params.at(2).at("shape").at(0) = params.at(2).at("shape").at(0).get<int>() + 1;
    spit(dir / "manifest.json", j.dump(2));
    CHECK(error_of([&] { load_checkpoint(dir); }).find(name) != std::string::npos);
  }
  SUBCASE("unknown parameter") {
    auto j = nlohmann::json::parse(manifest);
    j.at("parameters").at(0).at("name") = "encoder.0.ghost";
    spit(dir / "manifest.json", j.dump(2));
    CHECK(error_of([&] { load_checkpoint(dir); }).find("encoder.0.ghost") != std::string::npos);
  }
  SUBCASE("duplicate entry") {
    auto j = nlohmann::json::parse(manifest);
    const std::string name = j.at("parameters").at(0).at("name");
    j.at("parameters").at(1).at("name") = name;
    spit(dir / "manifest.json", j.dump(2));
    CHECK(error_of([&] { load_checkpoint(dir); }).find(name) != std::string::npos);
  }
  SUBCASE("missing directory") { CHECK_THROWS_AS(load_checkpoint(dir / "nope"), Error); }
}
