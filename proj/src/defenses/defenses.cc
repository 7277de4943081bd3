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

#include "weightleak/defenses.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

#include "weightleak/errors.h"

namespace weightleak {

void DPConfig::validate() const {
  if (!(clip > 0.0)) throw ArgumentError("dp: clip threshold C must be > 0");
  if (!(sigma >= 0.0)) throw ArgumentError("dp: noise level sigma must be >= 0");
  if (group_size < 1) throw ArgumentError("dp: group size L must be >= 1");
}

void SparsifyConfig::validate() const {
  if (!(rate >= 0.0 && rate < 1.0)) throw ArgumentError("sparsify: rate must lie in [0, 1)");
}

ModelWeights dp_clip(const ModelWeights& weights, double clip) {
  if (!(clip > 0.0)) throw ArgumentError("dp_clip: C must be > 0");
  ModelWeights out = weights;
  constexpr double kShrink = 1.0 - 4.0 * std::numeric_limits<double>::epsilon();
  for (Tensor& layer : out.mutable_tensors()) {
    const double norm = layer.norm();
    if (norm <= clip) continue;
    const double factor = norm / clip;
    for (double& v : layer.mutable_data()) v /= factor;
    // Rounding can leave the result a few ulps above C. Shrinking until the
    // computed norm is within C makes a second clip a no-op.
    while (layer.norm() > clip) {
      for (double& v : layer.mutable_data()) v *= kShrink;
    }
  }
  return out;
}

ModelWeights dp_noise(const ModelWeights& weights, const DPConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  const double spread = cfg.sigma * cfg.clip;
  const double inv_group = 1.0 / static_cast<double>(cfg.group_size);
  std::normal_distribution<double> gaussian(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(-0.5, 0.5);
  ModelWeights out = weights;
  for (Tensor& layer : out.mutable_tensors()) {
    for (double& v : layer.mutable_data()) {
      double noise = 0.0;
      if (spread > 0.0) {
        if (cfg.noise == NoiseKind::kGaussian) {
          noise = spread * gaussian(rng);
        } else {
          double u = uniform(rng);
          while (u == -0.5) u = uniform(rng);
          noise = -spread * std::copysign(1.0, u) * std::log(1.0 - 2.0 * std::abs(u));
        }
      }
      v = (v + noise) * inv_group;
    }
  }
  return out;
}

ModelWeights dp_apply(const ModelWeights& weights, const DPConfig& cfg, std::uint64_t seed) {
  return dp_noise(dp_clip(weights, cfg.clip), cfg, seed);
}

namespace {

// Magnitude below which entries are pruned, or 0 (prune nothing).
double prune_threshold(std::vector<double> magnitudes, double rate) {
  const std::size_t n = magnitudes.size();
  const auto k = static_cast<std::size_t>(std::ceil(rate * static_cast<double>(n)));
  if (k == 0) return 0.0;
  if (k >= n) return std::numeric_limits<double>::infinity();
  std::nth_element(magnitudes.begin(), magnitudes.begin() + static_cast<std::ptrdiff_t>(k),
                   magnitudes.end());
  return magnitudes[k];
}

void prune_below(Tensor& t, double threshold) {
  for (double& v : t.mutable_data()) {
    if (std::abs(v) < threshold) v = 0.0;
  }
}

}  // namespace

ModelWeights sparsify(const ModelWeights& weights, double rate, SparsifyScope scope) {
  SparsifyConfig{rate, scope}.validate();
  ModelWeights out = weights;
  if (rate == 0.0) return out;
  if (scope == SparsifyScope::kGlobal) {
    std::vector<double> mags;
    mags.reserve(weights.element_count());
    for (const Tensor& t : weights.tensors()) {
      for (double v : t.data()) mags.push_back(std::abs(v));
    }
    const double threshold = prune_threshold(std::move(mags), rate);
    for (Tensor& t : out.mutable_tensors()) prune_below(t, threshold);
  } else {
    for (Tensor& t : out.mutable_tensors()) {
      std::vector<double> mags;
      mags.reserve(t.size());
      for (double v : t.data()) mags.push_back(std::abs(v));
      prune_below(t, prune_threshold(std::move(mags), rate));
    }
  }
  return out;
}

ModelWeights apply_defense(const DefenseConfig& cfg, const ModelWeights& weights,
                           std::uint64_t seed) {
  return std::visit(
      [&](const auto& c) -> ModelWeights {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, NoDefense>) {
          return weights;
        } else if constexpr (std::is_same_v<T, DPConfig>) {
          return dp_apply(weights, c, seed);
        } else {
          return sparsify(weights, c.rate, c.scope);
        }
      },
      cfg);
}

std::string describe(const DefenseConfig& cfg) {
  std::ostringstream out;
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, NoDefense>) {
          out << "none";
        } else if constexpr (std::is_same_v<T, DPConfig>) {
          out << "dp-" << (c.noise == NoiseKind::kGaussian ? "gaussian" : "laplacian")
              << "(C=" << c.clip << ",sigma=" << c.sigma << ",L=" << c.group_size << ")";
        } else {
          out << "sparsify(" << c.rate << (c.scope == SparsifyScope::kPerLayer ? ",per-layer" : "")
              << ")";
        }
      },
      cfg);
  return out.str();
}

bool is_active(const DefenseConfig& cfg) {
  if (std::holds_alternative<NoDefense>(cfg)) return false;
  if (const auto* s = std::get_if<SparsifyConfig>(&cfg)) return s->rate > 0.0;
  return true;  // clipping alone can change the payload
}

}  // namespace weightleak
