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

#include "progseq/config_io.hpp"

#include "progseq/error.hpp"

#include <functional>
#include <map>

namespace progseq {

namespace {

using Setter = std::function<void(const Json&)>;

struct BadValue : std::exception {};

void apply(const Json& j, const std::string& what, const std::map<std::string, Setter>& setters) {
  if (!j.is_object()) throw ConfigError(what + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError(what + ": unknown key '" + key + "'");
    try {
      it->second(value);
    } catch (const BadValue&) {
      throw ConfigError(what + ": bad value for '" + key + "': " + value.dump());
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(what + ": bad value for '" + key + "': " + value.dump());
    }
  }
}

template <typename T>
Setter set(T& field) {
  return [&field](const Json& v) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw BadValue();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw BadValue();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw BadValue();
    }
    field = v.get<T>();
  };
}

}  // namespace

Json to_json(const ModelConfig& c) {
  Json j;
  j["layers"] = c.layers;
  j["heads"] = c.heads;
  j["embed_dim"] = c.embed_dim;
  j["ff_dim"] = c.ff_dim;
  j["joints"] = c.joints;
  j["vocab_size"] = c.vocab_size;
  j["future_from"] = c.future_from;
  j["future_to"] = c.future_to;
  j["augmentation"] = to_string(c.augmentation);
  j["head"] = to_string(c.head);
  j["mixtures"] = c.mixtures;
  j["mdn_fixed_sigma"] = c.mdn_fixed_sigma;
  j["pre_norm"] = c.pre_norm;
  j["sigma_floor"] = c.sigma_floor;
  j["max_frames"] = c.max_frames;
  j["termination_epsilon"] = c.termination_epsilon;
  j["seed"] = c.seed;
  return j;
}

Json to_json(const DiscriminatorConfig& c) {
  Json j;
  j["layers"] = c.layers;
  j["channels"] = c.channels;
  j["kernel"] = c.kernel;
  j["max_frames"] = c.max_frames;
  j["max_tokens"] = c.max_tokens;
  j["source_dim"] = c.source_dim;
  j["joints"] = c.joints;
  j["vocab_size"] = c.vocab_size;
  j["seed"] = c.seed;
  return j;
}

Json to_json(const TrainConfig& c) {
  Json j;
  j["regime"] = to_string(c.regime);
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["scheduler"] = {{"patience", c.scheduler.patience}, {"factor", c.scheduler.factor}, {"min_lr", c.scheduler.min_lr}};
  j["lambda_reg"] = c.lambda_reg;
  j["lambda_gan"] = c.lambda_gan;
  j["lambda_mdn"] = c.lambda_mdn;
  j["noise_rate"] = c.noise_rate;
  j["seed"] = c.seed;
  j["model"] = to_json(c.model);
  j["discriminator"] = to_json(c.discriminator);
  j["dev_eval_every"] = c.dev_eval_every;
  j["dev_eval_limit"] = c.dev_eval_limit;
  j["eval_jobs"] = c.eval_jobs;
  j["time_budget_seconds"] = c.time_budget_seconds;
  return j;
}

ModelConfig model_config_from_json(const Json& j, ModelConfig c) {
  apply(j, "model config",
        {{"layers", set(c.layers)},
         {"heads", set(c.heads)},
         {"embed_dim", set(c.embed_dim)},
         {"ff_dim", set(c.ff_dim)},
         {"joints", set(c.joints)},
         {"vocab_size", set(c.vocab_size)},
         {"future_from", set(c.future_from)},
         {"future_to", set(c.future_to)},
         {"augmentation", [&](const Json& v) { c.augmentation = parse_augmentation(v.get<std::string>()); }},
         {"head", [&](const Json& v) { c.head = parse_output_head(v.get<std::string>()); }},
         {"mixtures", set(c.mixtures)},
         {"mdn_fixed_sigma", set(c.mdn_fixed_sigma)},
         {"pre_norm", set(c.pre_norm)},
         {"sigma_floor", set(c.sigma_floor)},
         {"max_frames", set(c.max_frames)},
         {"termination_epsilon", set(c.termination_epsilon)},
         {"seed", set(c.seed)}});
  return c;
}

DiscriminatorConfig discriminator_config_from_json(const Json& j, DiscriminatorConfig c) {
  apply(j, "discriminator config",
        {{"layers", set(c.layers)},
         {"channels", set(c.channels)},
         {"kernel", set(c.kernel)},
         {"max_frames", set(c.max_frames)},
         {"max_tokens", set(c.max_tokens)},
         {"source_dim", set(c.source_dim)},
         {"joints", set(c.joints)},
         {"vocab_size", set(c.vocab_size)},
         {"seed", set(c.seed)}});
  return c;
}

TrainConfig train_config_from_json(const Json& j, TrainConfig c) {
  apply(j, "train config",
        {{"regime", [&](const Json& v) { c.regime = parse_regime(v.get<std::string>()); }},
         {"epochs", set(c.epochs)},
         {"batch_size", set(c.batch_size)},
         {"learning_rate", set(c.learning_rate)},
         {"scheduler",
          [&](const Json& v) {
            apply(v, "scheduler config",
                  {{"patience", set(c.scheduler.patience)},
                   {"factor", set(c.scheduler.factor)},
                   {"min_lr", set(c.scheduler.min_lr)}});
          }},
         {"lambda_reg", set(c.lambda_reg)},
         {"lambda_gan", set(c.lambda_gan)},
         {"lambda_mdn", set(c.lambda_mdn)},
         {"noise_rate", set(c.noise_rate)},
         {"seed", set(c.seed)},
         {"model", [&](const Json& v) { c.model = model_config_from_json(v, c.model); }},
         {"discriminator", [&](const Json& v) { c.discriminator = discriminator_config_from_json(v, c.discriminator); }},
         {"dev_eval_every", set(c.dev_eval_every)},
         {"dev_eval_limit", set(c.dev_eval_limit)},
         {"eval_jobs", set(c.eval_jobs)},
         {"time_budget_seconds", set(c.time_budget_seconds)}});
  return c;
}

}  // namespace progseq
