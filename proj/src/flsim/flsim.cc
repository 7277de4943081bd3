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

#include "weightleak/flsim.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "weightleak/errors.h"
#include "weightleak/ops.h"
#include "weightleak/seed.h"

namespace weightleak {

void ClientConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ArgumentError("client learning rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ArgumentError("client momentum must lie in [0, 1)");
  if (local_epochs < 1) throw ArgumentError("client local_epochs must be >= 1");
  if (batch_size < 1) throw ArgumentError("client batch_size must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(eps > 0.0)) {
    throw ArgumentError("client adam parameters out of range");
  }
}

void FederationConfig::validate() const {
  if (num_clients < 1) throw ArgumentError("federation needs at least one client");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ArgumentError("partition fraction must lie in (0, 1]");
  if (rounds < 1) throw ArgumentError("federation needs at least one round");
}

const char* payload_kind_name(PayloadKind kind) {
  return kind == PayloadKind::kWeights ? "weights" : "gradients";
}

TransmittedUpdate::TransmittedUpdate(std::size_t round, std::size_t client, PayloadKind kind,
                                     ModelWeights global_before, ModelWeights payload,
                                     std::vector<std::size_t> sample_ref, std::string defense)
    : round_(round),
      client_(client),
      kind_(kind),
      global_before_(std::move(global_before)),
      payload_(std::move(payload)),
      sample_ref_(std::move(sample_ref)),
      defense_(std::move(defense)) {
  require_same_layout(global_before_, payload_, "transmitted update");
}

std::vector<std::vector<std::size_t>> partition_iid(std::size_t dataset_size, std::size_t num_clients,
                                                    double fraction, std::uint64_t seed) {
  if (num_clients < 1) throw ArgumentError("partition_iid: need at least one client");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ArgumentError("partition_iid: fraction must lie in (0, 1]");
  const auto share = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(dataset_size)));
  if (share < num_clients) {
    throw ArgumentError("partition_iid: " + std::to_string(share) + " samples cannot feed " +
                        std::to_string(num_clients) + " clients");
  }
  const std::size_t per_client = share / num_clients;
  std::vector<std::size_t> order(dataset_size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> parts(num_clients);
  for (std::size_t k = 0; k < num_clients; ++k) {
    parts[k].assign(order.begin() + static_cast<std::ptrdiff_t>(k * per_client),
                    order.begin() + static_cast<std::ptrdiff_t>((k + 1) * per_client));
  }
  return parts;
}

namespace {

Tensor one_hot(std::span<const int> labels, std::size_t num_classes) {
  Tensor t({labels.size(), num_classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    t[i * num_classes + static_cast<std::size_t>(labels[i])] = 1.0;
  }
  return t;
}

struct LossAndGrad {
  double loss;
  std::vector<Tensor> grads;
};

LossAndGrad evaluate(const ModelSpec& spec, const ModelWeights& weights, const Tensor& images,
                     std::span<const int> labels) {
  ad::Tape tape;
  std::vector<ad::Var> params = weight_variables(tape, weights);
  ad::Var logits = forward(spec, params, tape.constant(images));
  ad::Var loss = ad::cross_entropy_probs(logits, tape.constant(one_hot(labels, spec.num_classes())));
  return {loss.value().item(), ad::gradients(loss, params, false).tensors()};
}

class LocalOptimizer {
 public:
  LocalOptimizer(const ClientConfig& cfg, const ModelWeights& like) : cfg_(cfg) {
    if (cfg.optimizer != ClientOptimizer::kSgd) {
      for (const Tensor& t : like.tensors()) {
        first_.emplace_back(t.shape());
        second_.emplace_back(t.shape());
      }
    }
  }

  void step(ModelWeights& w, const std::vector<Tensor>& grads) {
    ++t_;
    const double lr = cfg_.learning_rate;
    for (std::size_t i = 0; i < grads.size(); ++i) {
      auto wd = w.mutable_tensors()[i].mutable_data();
      auto g = grads[i].data();
      switch (cfg_.optimizer) {
        case ClientOptimizer::kSgd:
          for (std::size_t j = 0; j < wd.size(); ++j) wd[j] -= lr * g[j];
          break;
        case ClientOptimizer::kMomentum: {
          auto v = first_[i].mutable_data();
          for (std::size_t j = 0; j < wd.size(); ++j) {
            v[j] = cfg_.momentum * v[j] + g[j];
            wd[j] -= lr * v[j];
          }
          break;
        }
        case ClientOptimizer::kAdam: {
          auto m = first_[i].mutable_data();
          auto v = second_[i].mutable_data();
          const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
          const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
          for (std::size_t j = 0; j < wd.size(); ++j) {
            m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
            v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
            wd[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg_.eps);
          }
          break;
        }
      }
    }
  }

 private:
  const ClientConfig& cfg_;
  std::vector<Tensor> first_;
  std::vector<Tensor> second_;
  std::size_t t_ = 0;
};

}  // namespace

ModelWeights loss_gradient(const ModelSpec& spec, const ModelWeights& weights, const Dataset& data) {
  if (data.size() == 0) throw ArgumentError("loss_gradient: empty data");
  return ModelWeights(evaluate(spec, weights, data.images, data.labels).grads, weights.fingerprint());
}

ModelWeights client_local_train(const ModelSpec& spec, const ModelWeights& global,
                                const Dataset& data, const ClientConfig& cfg, std::size_t round) {
  cfg.validate();
  if (data.size() == 0) throw ArgumentError("client_local_train: client has no data");
  if (global.fingerprint() != spec.fingerprint()) {
    throw ContractError("client_local_train: weights were not built for model '" + spec.name() + "'");
  }
  ModelWeights w = global;
  LocalOptimizer opt(cfg, w);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    for (std::size_t first = 0; first < data.size(); first += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, data.size() - first);
      const Tensor images = slice_leading(data.images, first, count);
      const std::span<const int> labels(data.labels.data() + first, count);
      LossAndGrad lg = evaluate(spec, w, images, labels);
      if (!std::isfinite(lg.loss)) {
        throw SimulationError("non-finite training loss in round " + std::to_string(round) +
                              ", epoch " + std::to_string(epoch) + ", step " + std::to_string(step));
      }
      opt.step(w, lg.grads);
      ++step;
    }
  }
  return w;
}

ModelWeights server_aggregate(std::span<const ModelWeights> updates) {
  if (updates.empty()) throw ArgumentError("server_aggregate: no updates");
  ModelWeights total = updates.front();
  for (std::size_t k = 1; k < updates.size(); ++k) {
    require_same_layout(total, updates[k], "server_aggregate");
    total = total + updates[k];
  }
  return (1.0 / static_cast<double>(updates.size())) * total;
}

WiretapLog run_simulation(const FederationConfig& fed, const ClientConfig& client,
                          const ModelSpec& spec, const Dataset& data, const DefenseConfig& defense,
                          const ModelWeights* initial) {
  fed.validate();
  client.validate();
  const auto shards = partition_iid(data.size(), fed.num_clients, fed.fraction,
                                    derive_seed(fed.seed, {0x9a27}));
  std::vector<Dataset> local;
  for (const auto& shard : shards) local.push_back(data.subset(shard));

  ModelWeights global = initial ? *initial : init_weights(spec, fed.seed);
  if (global.fingerprint() != spec.fingerprint()) {
    throw ContractError("run_simulation: initial weights were not built for model '" + spec.name() + "'");
  }
  const std::string defense_label = describe(defense);

  WiretapLog log;
  log.spec_fingerprint = spec.fingerprint();
  for (std::size_t t = 0; t < fed.rounds; ++t) {
    std::vector<ModelWeights> uploads;
    for (std::size_t k = 0; k < fed.num_clients; ++k) {
      const Dataset& d = local[k];
      ModelWeights payload;
      std::vector<std::size_t> used;
      if (fed.transmit == PayloadKind::kWeights) {
        payload = client_local_train(spec, global, d, client, t);
        used = d.ids;
      } else {
        std::vector<std::size_t> first(std::min(client.batch_size, d.size()));
        std::iota(first.begin(), first.end(), std::size_t{0});
        const Dataset batch = d.subset(first);
        payload = loss_gradient(spec, global, batch);
        if (!payload.all_finite()) {
          throw SimulationError("non-finite gradient in round " + std::to_string(t) + ", client " +
                                std::to_string(k));
        }
        used = batch.ids;
      }
      payload = apply_defense(defense, payload, derive_seed(fed.seed, {0xdef, t, k}));
      log.updates.emplace_back(t, k, fed.transmit, global, payload, std::move(used), defense_label);
      uploads.push_back(std::move(payload));
    }
    if (fed.transmit == PayloadKind::kWeights) {
      global = server_aggregate(uploads);
    } else {
      global = global - client.learning_rate * server_aggregate(uploads);
    }
  }
  return log;
}

}  // namespace weightleak
