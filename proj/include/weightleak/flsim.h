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

// Sequential FedAvg / FedSGD simulator. Produces the wiretap: every
// (global weights, client payload) pair a network observer would see.

#ifndef WEIGHTLEAK_FLSIM_H_
#define WEIGHTLEAK_FLSIM_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "weightleak/dataset.h"
#include "weightleak/defenses.h"
#include "weightleak/models.h"

namespace weightleak {

enum class ClientOptimizer { kSgd, kMomentum, kAdam };

struct ClientConfig {
  double learning_rate = 0.01;  // alpha
  ClientOptimizer optimizer = ClientOptimizer::kSgd;
  double momentum = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
  std::size_t local_epochs = 1;
  std::size_t batch_size = 1;

  void validate() const;
};

enum class PayloadKind { kWeights, kGradients };

const char* payload_kind_name(PayloadKind kind);

struct FederationConfig {
  std::size_t num_clients = 1;  // K
  double fraction = 1.0;        // share of the dataset handed out (IID)
  PayloadKind transmit = PayloadKind::kWeights;
  std::size_t rounds = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

// What the adversary sees of one transmission.
struct AttackView {
  PayloadKind kind;
  const ModelWeights& global_before;
  const ModelWeights& payload;
};

class TransmittedUpdate {
 public:
  TransmittedUpdate(std::size_t round, std::size_t client, PayloadKind kind,
                    ModelWeights global_before, ModelWeights payload,
                    std::vector<std::size_t> sample_ref, std::string defense = "none");

  std::size_t round() const { return round_; }
  std::size_t client() const { return client_; }
  PayloadKind kind() const { return kind_; }
  const std::string& defense() const { return defense_; }
  const ModelWeights& global_before() const { return global_before_; }
  const ModelWeights& payload() const { return payload_; }

  // The only input the attack code takes.
  AttackView attack_view() const { return {kind_, global_before_, payload_}; }

  // Ids of the training examples behind this payload. Ground truth for
  // scoring an attack; the attack path never receives it.
  const std::vector<std::size_t>& evaluation_sample_ref() const { return sample_ref_; }

  friend bool operator==(const TransmittedUpdate&, const TransmittedUpdate&) = default;

 private:
  std::size_t round_;
  std::size_t client_;
  PayloadKind kind_;
  ModelWeights global_before_;
  ModelWeights payload_;
  std::vector<std::size_t> sample_ref_;
  std::string defense_;
};

struct WiretapLog {
  std::uint64_t spec_fingerprint = 0;
  std::vector<TransmittedUpdate> updates;

  friend bool operator==(const WiretapLog&, const WiretapLog&) = default;
};

// Each of the K clients gets floor(fraction * n / K) distinct positions, drawn
// uniformly without replacement.
std::vector<std::vector<std::size_t>> partition_iid(std::size_t dataset_size, std::size_t num_clients,
                                                    double fraction, std::uint64_t seed);

// Gradient of the mean cross-entropy of `data` at `weights`.
ModelWeights loss_gradient(const ModelSpec& spec, const ModelWeights& weights, const Dataset& data);

// Runs E epochs of the client optimizer over `data` in order, batch by batch.
// Throws SimulationError on a non-finite loss.
ModelWeights client_local_train(const ModelSpec& spec, const ModelWeights& global,
                                const Dataset& data, const ClientConfig& cfg,
                                std::size_t round = 0);

// Unweighted elementwise mean, summed in list order.
ModelWeights server_aggregate(std::span<const ModelWeights> updates);

// All K clients take part in every round. In weights mode the server averages
// the uploaded weights; in gradients mode each client sends the gradient of
// its first batch and the server steps by the mean gradient. `initial`
// defaults to init_weights(spec, fed.seed).
WiretapLog run_simulation(const FederationConfig& fed, const ClientConfig& client,
                          const ModelSpec& spec, const Dataset& data,
                          const DefenseConfig& defense = NoDefense{},
                          const ModelWeights* initial = nullptr);

}  // namespace weightleak

#endif  // WEIGHTLEAK_FLSIM_H_
