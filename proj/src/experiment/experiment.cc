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

#include "weightleak/experiment.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "weightleak/attacks.h"
#include "weightleak/data_io.h"
#include "weightleak/errors.h"
#include "weightleak/seed.h"

namespace weightleak {
namespace {

constexpr std::uint64_t kSampleStream = 0x5a3e;
constexpr std::uint64_t kFederationStream = 0xfed;
constexpr std::uint64_t kAttackStream = 0xa77a;

PayloadKind payload_for(ObjectiveKind kind) {
  return uses_weights(kind) ? PayloadKind::kWeights : PayloadKind::kGradients;
}

TrialRecord attack_record(const AttackView& view, const ModelSpec& spec, const AttackConfig& attack,
                          const GroundTruth* truth, Tensor* recovered) {
  TrialRecord rec;
  rec.algorithm = objective_name(attack.objective.kind);
  if (truth != nullptr) rec.true_labels = truth->labels;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    AttackResult r = run_attack(view, spec, attack, truth);
    rec.success = r.success;
    rec.psnr = r.psnr;
    rec.ssim = r.ssim;
    rec.per_image_psnr = r.per_image_psnr;
    rec.labels = r.labels;
    rec.labels_correct = r.labels_correct;
    rec.iterations = r.iterations_used;
    rec.final_loss = r.final_loss;
    rec.alpha_estimate = r.alpha_estimate;
    rec.gamma = r.gamma;
    rec.loss_trace = std::move(r.loss_trace);
    rec.psnr_trace = std::move(r.psnr_trace);
    if (recovered != nullptr) *recovered = std::move(r.recovered);
  } catch (const DivergedError& e) {
    rec.status = "diverged";
    rec.detail = std::string(e.what()) + " at iteration " + std::to_string(e.iteration());
    rec.iterations = e.iteration();
  }
  rec.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

}  // namespace

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&]() {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

Dataset load_data(const RunConfig& cfg) {
  const ModelSpec spec = cfg.model_spec();
  const ImageShape in = spec.input_shape();
  Dataset data;
  switch (cfg.data.source) {
    case DataSource::kSynthetic:
      return synthetic_dataset(cfg.data.n, {in[0], in[1], in[2]}, spec.num_classes(), cfg.data.seed);
    case DataSource::kIdx:
      data = load_idx(cfg.data.images, cfg.data.labels, cfg.data.replicate_rgb);
      break;
    case DataSource::kCifar10:
      data = load_cifar_binary(cfg.data.path, CifarVariant::kCifar10);
      break;
    case DataSource::kCifar100:
      data = load_cifar_binary(cfg.data.path, CifarVariant::kCifar100);
      break;
  }
  const Shape want = {in[0], in[1], in[2]};
  if (data.image_shape() != want) {
    throw ConfigError("data images are " + shape_string(data.image_shape()) + " but model '" + cfg.model +
                      "' expects " + shape_string(want));
  }
  if (data.num_classes > spec.num_classes()) {
    throw ConfigError("data has " + std::to_string(data.num_classes) + " classes but model '" + cfg.model +
                      "' has " + std::to_string(spec.num_classes()));
  }
  return data;
}

TrialSeeds trial_seeds(const RunConfig& cfg, std::size_t pool_size, std::size_t trial) {
  const std::size_t batch = cfg.attack.batch_size;
  if (batch > pool_size) {
    throw ConfigError("attack.batch_size " + std::to_string(batch) + " exceeds the data pool of " +
                      std::to_string(pool_size));
  }
  TrialSeeds s;
  s.trial_seed = cfg.seed_base + trial;
  s.federation = derive_seed(s.trial_seed, {kFederationStream});
  s.attack = derive_seed(s.trial_seed, {kAttackStream});
  std::vector<std::size_t> all(pool_size);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(s.trial_seed, {kSampleStream}));
  // Partial Fisher-Yates: the first `batch` entries are the draw.
  for (std::size_t i = 0; i < batch; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool_size - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  s.positions.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(batch));
  return s;
}

WiretapLog trial_wiretap(const RunConfig& cfg, const ModelSpec& spec, const Dataset& pool, std::size_t trial,
                         PayloadKind transmit) {
  const TrialSeeds seeds = trial_seeds(cfg, pool.size(), trial);
  const Dataset local = pool.subset(seeds.positions);
  FederationConfig fed;
  fed.seed = seeds.federation;
  fed.transmit = transmit;
  return run_simulation(fed, cfg.client, spec, local, cfg.defense);
}

TrialRecord run_trial(const RunConfig& cfg, const ModelSpec& spec, const Dataset& pool, std::size_t trial) {
  const TrialSeeds seeds = trial_seeds(cfg, pool.size(), trial);
  const Dataset local = pool.subset(seeds.positions);
  AttackConfig attack = cfg.resolved_attack();
  attack.seed = seeds.attack;
  TrialRecord rec;
  try {
    const WiretapLog log = trial_wiretap(cfg, spec, pool, trial, payload_for(attack.objective.kind));
    const GroundTruth truth{local.images, local.labels};
    rec = attack_record(log.updates.front().attack_view(), spec, attack, &truth, nullptr);
  } catch (const SimulationError& e) {
    rec.algorithm = objective_name(attack.objective.kind);
    rec.status = "diverged";
    rec.detail = e.what();
    rec.true_labels = local.labels;
  }
  rec.trial = trial;
  rec.seed = seeds.trial_seed;
  return rec;
}

std::vector<TrialRecord> run_trials(const RunConfig& cfg, const Dataset& pool, std::size_t jobs) {
  cfg.validate();
  const ModelSpec spec = cfg.model_spec();
  std::vector<TrialRecord> out(cfg.trials);
  parallel_for(cfg.trials, jobs, [&](std::size_t t) { out[t] = run_trial(cfg, spec, pool, t); });
  return out;
}

std::vector<TrialRecord> run_compare(const RunConfig& cfg, const Dataset& pool, std::size_t jobs) {
  std::vector<TrialRecord> all;
  for (ObjectiveKind kind : cfg.compare) {
    RunConfig c = cfg;
    c.attack.objective.kind = kind;
    auto block = run_trials(c, pool, jobs);
    all.insert(all.end(), block.begin(), block.end());
  }
  return all;
}

std::string apply_sweep_value(RunConfig& cfg, SweepKind kind, double value) {
  switch (kind) {
    case SweepKind::kGamma:
      cfg.attack.objective.gamma0 = value;
      cfg.gamma0_inverse_lr = false;
      return "gamma0";
    case SweepKind::kEpochs:
      if (!(value >= 1.0) || value != std::floor(value)) {
        throw ConfigError("sweep.values: local epochs must be positive integers");
      }
      cfg.client.local_epochs = static_cast<std::size_t>(value);
      return "local_epochs";
    case SweepKind::kDefense:
      if (auto* dp = std::get_if<DPConfig>(&cfg.defense)) {
        dp->sigma = value;
        return "sigma";
      }
      if (auto* sp = std::get_if<SparsifyConfig>(&cfg.defense)) {
        sp->rate = value;
        return "rate";
      }
      throw ConfigError("defense sweep needs defense.kind 'dp' or 'sparsify'");
    case SweepKind::kTuningK:
      cfg.attack.objective.k = value;
      return "k";
    case SweepKind::kNone:
      break;
  }
  throw ConfigError("sweep.kind is not set");
}

std::vector<TrialRecord> run_sweep(const RunConfig& cfg, const Dataset& pool, std::size_t jobs) {
  if (cfg.sweep.kind == SweepKind::kNone) throw ConfigError("sweep.kind is not set");
  if (cfg.sweep.values.empty()) throw ConfigError("sweep.values must not be empty");
  std::vector<TrialRecord> all;
  for (double v : cfg.sweep.values) {
    RunConfig c = cfg;
    const std::string name = apply_sweep_value(c, cfg.sweep.kind, v);
    auto block = run_trials(c, pool, jobs);
    for (auto& r : block) {
      r.parameter = name;
      r.value = v;
    }
    all.insert(all.end(), block.begin(), block.end());
  }
  return all;
}

std::vector<TrialRecord> attack_wiretap(const RunConfig& cfg, const WiretapLog& log, const Dataset* pool,
                                        std::size_t jobs, std::vector<Tensor>* recovered) {
  cfg.validate();
  const ModelSpec spec = cfg.model_spec();
  if (log.spec_fingerprint != spec.fingerprint()) {
    throw ContractError("wiretap was recorded for a different model than '" + cfg.model + "'");
  }
  const AttackConfig base = cfg.resolved_attack();
  // Fail before any work when the payload cannot feed the objective.
  for (const TransmittedUpdate& u : log.updates) {
    if (uses_weights(base.objective.kind) != (u.kind() == PayloadKind::kWeights)) {
      throw ContractError(objective_name(base.objective.kind) + " requires " +
                          (uses_weights(base.objective.kind) ? "weights" : "gradients") + " mode, got a " +
                          payload_kind_name(u.kind()) + " payload");
    }
  }
  std::vector<TrialRecord> out(log.updates.size());
  if (recovered != nullptr) recovered->assign(log.updates.size(), Tensor());
  parallel_for(log.updates.size(), jobs, [&](std::size_t i) {
    const TransmittedUpdate& u = log.updates[i];
    AttackConfig attack = base;
    attack.seed = derive_seed(cfg.seed_base + i, {kAttackStream});
    std::optional<GroundTruth> truth;
    if (pool != nullptr) {
      const auto& ids = u.evaluation_sample_ref();
      if (ids.size() != attack.batch_size) {
        throw ConfigError("update " + std::to_string(i) + " was trained on " + std::to_string(ids.size()) +
                          " examples but attack.batch_size is " + std::to_string(attack.batch_size));
      }
      GroundTruth gt;
      gt.images = pool->images_for_ids(ids);
      for (std::size_t id : ids) gt.labels.push_back(pool->labels[pool->position_of(id)]);
      truth = std::move(gt);
    }
    out[i] = attack_record(u.attack_view(), spec, attack, truth ? &*truth : nullptr,
                           recovered != nullptr ? &(*recovered)[i] : nullptr);
    out[i].trial = i;
    out[i].update = i;
    out[i].seed = cfg.seed_base + i;
  });
  return out;
}

}  // namespace weightleak
