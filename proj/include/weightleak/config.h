/*
 * Copyright 2026 The WeightLeak Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Run configuration: the JSON document every CLI command reads.
//
//   {
//     "schema_version": 1,
//     "model": "tiny-mlp",
//     "data":       {"source": "synthetic", "n": 100, "seed": 7, ...},
//     "federation": {"clients": 1, "rounds": 1, "fraction": 1.0, "transmit": "weights"},
//     "client":     {"optimizer": "sgd", "learning_rate": 0.01, ...},
//     "defense":    {"kind": "none", ...},
//     "attack":     {"objective": "dlm-plus", "optimizer": "adam", "lr": 0.1, ...},
//     "trials":     {"count": 20, "seed_base": 0},
//     "sweep":      {"kind": "gamma", "values": [80, 100, 120]},
//     "compare":    {"algorithms": ["dlg", "cosine", "dlm", "dlm-plus"]}
//   }
//
// Every section and key except schema_version is optional. Unknown keys are
// rejected. docs/config.md lists every key with its default.

#ifndef WEIGHTLEAK_CONFIG_H_
#define WEIGHTLEAK_CONFIG_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "weightleak/attacks.h"
#include "weightleak/defenses.h"
#include "weightleak/flsim.h"
#include "weightleak/models.h"

namespace weightleak {

inline constexpr int kSchemaVersion = 1;

enum class DataSource { kSynthetic, kIdx, kCifar10, kCifar100 };

struct DataConfig {
  DataSource source = DataSource::kSynthetic;
  std::size_t n = 100;        // synthetic pool size
  std::uint64_t seed = 7;     // synthetic pattern seed
  std::string images;         // idx images file
  std::string labels;         // idx labels file
  std::string path;           // cifar batch file
  bool replicate_rgb = false; // idx: copy the gray channel into three
};

enum class SweepKind { kNone, kGamma, kEpochs, kDefense, kTuningK };

struct SweepConfig {
  SweepKind kind = SweepKind::kNone;
  std::vector<double> values;
};

struct RunConfig {
  std::string model = "tiny-mlp";
  DataConfig data;
  FederationConfig federation;
  ClientConfig client;
  DefenseConfig defense = NoDefense{};
  AttackConfig attack;
  // gamma0 given as "1/lr": resolved against client.learning_rate.
  bool gamma0_inverse_lr = false;
  std::size_t trials = 20;
  std::uint64_t seed_base = 0;
  SweepConfig sweep;
  std::vector<ObjectiveKind> compare = {ObjectiveKind::kDlg, ObjectiveKind::kCosine, ObjectiveKind::kDlm,
                                        ObjectiveKind::kDlmPlus};

  ModelSpec model_spec() const { return model_preset(model); }
  // attack with gamma0 resolved.
  AttackConfig resolved_attack() const;
  void validate() const;
};

// Throws ConfigError naming the offending key. Unknown keys get a
// "did you mean" hint when a known key is close.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig read_config(const std::filesystem::path& path);
// Full document with every default spelled out; parse_config(dump) == cfg.
nlohmann::json config_to_json(const RunConfig& cfg);
// FNV-1a of the canonical dump, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

std::string sweep_kind_name(SweepKind kind);
std::string data_source_name(DataSource source);

}  // namespace weightleak

#endif  // WEIGHTLEAK_CONFIG_H_
