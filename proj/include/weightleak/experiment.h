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

// Seeded attack trials shared by the CLI and the acceptance suite.
//
// Trial t of a run uses seed s = seed_base + t. From s it derives the sample
// positions drawn from the data pool, the federation seed (initial weights,
// client shuffling, defense noise) and the attack seed (dummy init). A trial
// simulates one client for one round on the drawn examples, transmitting
// weights or gradients as the objective requires, then attacks that update.

#ifndef WEIGHTLEAK_EXPERIMENT_H_
#define WEIGHTLEAK_EXPERIMENT_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "weightleak/config.h"
#include "weightleak/dataset.h"
#include "weightleak/flsim.h"
#include "weightleak/results.h"

namespace weightleak {

// Synthetic pools take the model's input shape and class count.
Dataset load_data(const RunConfig& cfg);

struct TrialSeeds {
  std::uint64_t trial_seed;
  std::uint64_t federation;
  std::uint64_t attack;
  std::vector<std::size_t> positions;  // into the pool
};
TrialSeeds trial_seeds(const RunConfig& cfg, std::size_t pool_size, std::size_t trial);

// The wiretap for one trial. Also used to derive matching wiretaps for
// baselines: the same trial with another payload kind sees the same round.
WiretapLog trial_wiretap(const RunConfig& cfg, const ModelSpec& spec, const Dataset& pool, std::size_t trial,
                         PayloadKind transmit);

TrialRecord run_trial(const RunConfig& cfg, const ModelSpec& spec, const Dataset& pool, std::size_t trial);

// All cfg.trials trials over `jobs` workers, in trial order.
std::vector<TrialRecord> run_trials(const RunConfig& cfg, const Dataset& pool, std::size_t jobs);

// One block of trials per algorithm in cfg.compare, sharing seeds.
std::vector<TrialRecord> run_compare(const RunConfig& cfg, const Dataset& pool, std::size_t jobs);

// Applies one grid value; returns the name of the field it set.
std::string apply_sweep_value(RunConfig& cfg, SweepKind kind, double value);
// One block of trials per grid value; records carry parameter and value.
std::vector<TrialRecord> run_sweep(const RunConfig& cfg, const Dataset& pool, std::size_t jobs);

// Attacks every update of a stored wiretap. With a pool, ground truth is
// looked up through each update's sample ids and the records are scored.
std::vector<TrialRecord> attack_wiretap(const RunConfig& cfg, const WiretapLog& log, const Dataset* pool,
                                        std::size_t jobs, std::vector<Tensor>* recovered = nullptr);

// Runs fn(0..n-1) over `jobs` threads. The first exception by index is
// rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace weightleak

#endif  // WEIGHTLEAK_EXPERIMENT_H_
