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

#include "progseq/config_io.hpp"
#include "progseq/error.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <set>

namespace progseq {

namespace fs = std::filesystem;

namespace {

constexpr const char* kFormat = "progseq-checkpoint-1";

void append_float(std::string& blob, Scalar v) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  for (int b = 0; b < 4; ++b) blob.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
}

Scalar read_float(const std::string& blob, std::size_t offset) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(blob[offset + b])) << (8 * b);
  return static_cast<Scalar>(std::bit_cast<float>(bits));
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void check_compatible(const ModelConfig& saved, const ModelConfig& live) {
  if (saved.joints != live.joints) {
    throw ConfigError("checkpoint joint count mismatch: checkpoint has J=" + std::to_string(saved.joints) +
                      ", model expects J=" + std::to_string(live.joints));
  }
  auto same = [](const char* field, long a, long b) {
    if (a != b) {
      throw ConfigError(std::string("checkpoint ") + field + " mismatch: checkpoint has " + std::to_string(a) +
                        ", model expects " + std::to_string(b));
    }
  };
  same("layers", saved.layers, live.layers);
  same("heads", saved.heads, live.heads);
  same("embed_dim", saved.embed_dim, live.embed_dim);
  same("ff_dim", saved.feed_forward_dim(), live.feed_forward_dim());
  same("vocab_size", saved.vocab_size, live.vocab_size);
  same("window", saved.window(), live.window());
  same("head", static_cast<long>(saved.head), static_cast<long>(live.head));
  if (saved.head == OutputHead::mdn) same("mixtures", saved.mixtures, live.mixtures);
}

}  // namespace

void save_checkpoint(const fs::path& dir, const ProgressiveTransformer& model, const Vocabulary& vocab,
                     const Discriminator* discriminator) {
  fs::create_directories(dir);
  Json manifest;
  manifest["format"] = kFormat;
  manifest["model"] = to_json(model.config());
  manifest["discriminator"] = discriminator ? to_json(discriminator->config()) : Json(nullptr);
  manifest["vocabulary"] = vocab.content_tokens();
  Json entries = Json::array();
  std::string blob;
  auto add_all = [&](const ParameterSet& params) {
    for (const auto& p : params.items()) {
      const Matrix& v = p.tensor.value();
      entries.push_back({{"name", p.name}, {"shape", {v.rows(), v.cols()}}, {"offset", blob.size()}});
      for (Index i = 0; i < v.size(); ++i) append_float(blob, v.data()[i]);
    }
  };
  add_all(model.parameters());
  if (discriminator) add_all(discriminator->parameters());
  manifest["parameters"] = entries;
  manifest["blob_bytes"] = blob.size();

  std::ofstream(dir / "manifest.json", std::ios::binary) << manifest.dump(2) << "\n";
  std::ofstream out(dir / "params.bin", std::ios::binary);
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw Error("cannot write " + (dir / "params.bin").string());
}

CheckpointManifest read_checkpoint_manifest(const fs::path& dir) {
  Json j;
  try {
    j = Json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint manifest: ") + e.what(), 0);
  }
  if (!j.contains("format") || j["format"] != kFormat) throw ConfigError("checkpoint manifest: unsupported format");
  CheckpointManifest m;
  m.model = model_config_from_json(j.at("model"));
  if (!j.at("discriminator").is_null()) m.discriminator = discriminator_config_from_json(j.at("discriminator"));
  m.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
  std::set<std::string> seen;
  for (const auto& e : j.at("parameters")) {
    CheckpointManifest::Entry entry;
    entry.name = e.at("name").get<std::string>();
    entry.rows = e.at("shape").at(0).get<Index>();
    entry.cols = e.at("shape").at(1).get<Index>();
    entry.offset = e.at("offset").get<std::size_t>();
    if (!seen.insert(entry.name).second) throw Error("checkpoint manifest lists parameter '" + entry.name + "' twice");
    m.parameters.push_back(entry);
  }
  m.blob_bytes = j.at("blob_bytes").get<std::size_t>();
  return m;
}

void load_parameters(const fs::path& dir, ProgressiveTransformer& model, Discriminator* discriminator) {
  const CheckpointManifest m = read_checkpoint_manifest(dir);
  check_compatible(m.model, model.config());
  const std::string blob = read_file(dir / "params.bin");
  if (blob.size() != m.blob_bytes) {
    throw Error("checkpoint blob holds " + std::to_string(blob.size()) + " bytes, manifest expects " +
                std::to_string(m.blob_bytes));
  }
  std::set<std::string> loaded;
  for (const auto& e : m.parameters) {
    const bool is_disc = e.name.rfind("disc.", 0) == 0;
    if (is_disc && !discriminator) continue;
    ParameterSet& params = is_disc ? discriminator->parameters() : model.parameters();
    if (!params.contains(e.name)) throw Error("checkpoint parameter '" + e.name + "' has no counterpart in the model");
    Tensor& t = params.at(e.name);
    if (t.rows() != e.rows || t.cols() != e.cols) {
      throw Error("checkpoint parameter '" + e.name + "' has shape [" + std::to_string(e.rows) + "x" +
                  std::to_string(e.cols) + "], model expects " + t.shape_string());
    }
    const std::size_t bytes = static_cast<std::size_t>(e.rows * e.cols) * 4;
    if (e.offset + bytes > blob.size()) throw Error("checkpoint parameter '" + e.name + "' runs past the end of the blob");
    Matrix& v = t.mutable_value();
    for (Index i = 0; i < v.size(); ++i) v.data()[i] = read_float(blob, e.offset + static_cast<std::size_t>(i) * 4);
    loaded.insert(e.name);
  }
  auto require_all = [&](const ParameterSet& params) {
    for (const auto& p : params.items()) {
      if (!loaded.count(p.name)) throw Error("checkpoint is missing parameter '" + p.name + "'");
    }
  };
  require_all(model.parameters());
  if (discriminator) require_all(discriminator->parameters());
}

LoadedCheckpoint load_checkpoint(const fs::path& dir) {
  LoadedCheckpoint out;
  out.manifest = read_checkpoint_manifest(dir);
  out.vocab = Vocabulary(out.manifest.vocabulary);
  out.model = std::make_unique<ProgressiveTransformer>(out.manifest.model);
  if (out.manifest.discriminator) out.discriminator = std::make_unique<Discriminator>(*out.manifest.discriminator);
  load_parameters(dir, *out.model, out.discriminator.get());
  return out;
}

}  // namespace progseq
