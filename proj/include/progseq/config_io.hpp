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
#include "progseq/model.hpp"
#include "progseq/trainer.hpp"

#include <json.hpp>

namespace progseq {

using Json = nlohmann::ordered_json;

/// Full objects with every field, in declaration order.
Json to_json(const ModelConfig& c);
Json to_json(const DiscriminatorConfig& c);
Json to_json(const TrainConfig& c);

/// Fields present in `j` override those of `base`; unknown keys and
/// ill-typed values raise ConfigError naming the key.
ModelConfig model_config_from_json(const Json& j, ModelConfig base = {});
DiscriminatorConfig discriminator_config_from_json(const Json& j, DiscriminatorConfig base = {});
TrainConfig train_config_from_json(const Json& j, TrainConfig base = {});

}  // namespace progseq
