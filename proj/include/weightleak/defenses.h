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

// Transformations a client applies to its weights before uploading them.

#ifndef WEIGHTLEAK_DEFENSES_H_
#define WEIGHTLEAK_DEFENSES_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>

#include "weightleak/models.h"

namespace weightleak {

enum class NoiseKind { kGaussian, kLaplacian };

struct DPConfig {
  double clip = 1.0;  // C
  NoiseKind noise = NoiseKind::kGaussian;
  double sigma = 0.0;
  std::size_t group_size = 1;  // L

  void validate() const;
};

enum class SparsifyScope { kGlobal, kPerLayer };

struct SparsifyConfig {
  double rate = 0.0;
  SparsifyScope scope = SparsifyScope::kGlobal;

  void validate() const;
};

struct NoDefense {};

using DefenseConfig = std::variant<NoDefense, DPConfig, SparsifyConfig>;

// Per layer: W / max(1, ||W|| / C).
ModelWeights dp_clip(const ModelWeights& weights, double clip);
// Per layer: (W + n) / L with n ~ N(0, sigma^2 C^2) or Laplace(0, sigma C).
ModelWeights dp_noise(const ModelWeights& weights, const DPConfig& cfg, std::uint64_t seed);
// dp_noise(dp_clip(weights)).
ModelWeights dp_apply(const ModelWeights& weights, const DPConfig& cfg, std::uint64_t seed);

// Zeroes the ceil(rate * n) smallest-magnitude entries over the scope: the
// threshold is the magnitude at sorted position ceil(rate * n), and entries
// strictly below it are pruned, so ties with the threshold survive.
ModelWeights sparsify(const ModelWeights& weights, double rate,
                      SparsifyScope scope = SparsifyScope::kGlobal);

ModelWeights apply_defense(const DefenseConfig& cfg, const ModelWeights& weights,
                           std::uint64_t seed);
// Short label, e.g. "none", "dp-gaussian(C=1,sigma=0.001,L=1)", "sparsify(0.2)".
std::string describe(const DefenseConfig& cfg);
// False when the defense cannot change a payload (none, sparsify at rate 0).
bool is_active(const DefenseConfig& cfg);

}  // namespace weightleak

#endif  // WEIGHTLEAK_DEFENSES_H_
