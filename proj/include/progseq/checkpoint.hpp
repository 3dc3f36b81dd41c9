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

#include "progseq/adversarial.hpp"
#include "progseq/data.hpp"
#include "progseq/model.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace progseq {

/// A checkpoint is a directory holding manifest.json (configs, vocabulary,
/// and per-parameter name, shape and byte offset) and params.bin, the
/// parameters as little-endian float32 in manifest order. Critic
/// parameters, when present, follow under their "disc." names.
struct CheckpointManifest {
  ModelConfig model;
  std::optional<DiscriminatorConfig> discriminator;
  std::vector<std::string> vocabulary;  // content tokens
  struct Entry {
    std::string name;
    Index rows = 0;
    Index cols = 0;
    std::size_t offset = 0;  // bytes
  };
  std::vector<Entry> parameters;
  std::size_t blob_bytes = 0;
};

void save_checkpoint(const std::filesystem::path& dir, const ProgressiveTransformer& model, const Vocabulary& vocab,
                     const Discriminator* discriminator = nullptr);

CheckpointManifest read_checkpoint_manifest(const std::filesystem::path& dir);

/// Copies checkpoint values into existing modules. ConfigError when the
/// architectures differ (e.g. joint count); Error naming the parameter when
/// the manifest and blob or module disagree.
void load_parameters(const std::filesystem::path& dir, ProgressiveTransformer& model,
                     Discriminator* discriminator = nullptr);

struct LoadedCheckpoint {
  CheckpointManifest manifest;
  Vocabulary vocab;
  std::unique_ptr<ProgressiveTransformer> model;
  std::unique_ptr<Discriminator> discriminator;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace progseq
