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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "gtest/gtest.h"
#include "test_util.h"
#include "weightleak/data_io.h"
#include "weightleak/errors.h"
#include "weightleak/flsim.h"

namespace weightleak {
namespace {

using ::weightleak::testing::random_tensor;

// logits = [w0, w1] * x for a single scalar input x.
ModelSpec scalar_spec() {
  return ModelSpec("scalar", {1, 1, 1}, 2,
                   {LayerSpec{}, LayerSpec{.kind = LayerKind::kAffine, .in_features = 1, .out_features = 2}});
}

Dataset single(const Tensor& image, int label, std::size_t classes) {
  Dataset d;
  d.images = image;
  d.labels = {label};
  d.num_classes = classes;
  d.ids = {0};
  return d;
}

Dataset tiny_data(std::size_t n, std::uint64_t seed = 3) {
  return synthetic_dataset(n, {3, 8, 8}, 10, seed);
}

double max_abs_diff(const ModelWeights& a, const ModelWeights& b) {
  const auto x = a.flatten(), y = b.flatten();
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

TEST(ClientLocalTrain, ScalarSgdStep) {
  // w = [1, 1], x = 1, label 0: p = [0.5, 0.5], so dL/dw1 = 0.5.
  const ModelSpec spec = scalar_spec();
  const ModelWeights w = ModelWeights::unflatten(spec, std::vector<double>{1.0, 1.0});
  ClientConfig cfg;
  cfg.learning_rate = 0.1;
  const ModelWeights out = client_local_train(spec, w, single(Tensor({1, 1, 1, 1}, {1.0}), 0, 2), cfg);
  EXPECT_NEAR(out.tensors()[0][1], 0.95, 1e-15);
  EXPECT_NEAR(out.tensors()[0][0], 1.05, 1e-15);
}

TEST(ClientLocalTrain, ZeroMomentumIsSgd) {
  const ModelSpec spec = model_preset("tiny-mlp");
  const ModelWeights w = init_weights(spec, 1);
  const Dataset data = tiny_data(6);
  ClientConfig sgd;
  sgd.local_epochs = 3;
  sgd.batch_size = 2;
  ClientConfig momentum = sgd;
  momentum.optimizer = ClientOptimizer::kMomentum;
  momentum.momentum = 0.0;
  EXPECT_EQ(client_local_train(spec, w, data, momentum), client_local_train(spec, w, data, sgd));
}

TEST(ClientLocalTrain, TwoEpochsChainTwoSteps) {
  const ModelSpec spec = model_preset("tiny-mlp");
  const ModelWeights w0 = init_weights(spec, 2);
  const std::vector<std::size_t> pos = {4};
  const Dataset one = tiny_data(10).subset(pos);
  ClientConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.local_epochs = 2;
  const ModelWeights w1 = w0 - 0.05 * loss_gradient(spec, w0, one);
  const ModelWeights w2 = w1 - 0.05 * loss_gradient(spec, w1, one);
  EXPECT_LE(max_abs_diff(client_local_train(spec, w0, one, cfg), w2), 1e-15);
}

TEST(ClientLocalTrain, MomentumAccumulatesVelocity) {
  const ModelSpec spec = scalar_spec();
  const ModelWeights w0 = ModelWeights::unflatten(spec, std::vector<double>{0.3, -0.2});
  const Dataset one = single(Tensor({1, 1, 1, 1}, {1.0}), 1, 2);
  ClientConfig cfg;
  cfg.optimizer = ClientOptimizer::kMomentum;
  cfg.momentum = 0.9;
  cfg.learning_rate = 0.1;
  cfg.local_epochs = 2;
  const ModelWeights g0 = loss_gradient(spec, w0, one);
  const ModelWeights w1 = w0 - 0.1 * g0;
  const ModelWeights g1 = loss_gradient(spec, w1, one);
  const ModelWeights w2 = w1 - 0.1 * (0.9 * g0 + g1);
  EXPECT_LE(max_abs_diff(client_local_train(spec, w0, one, cfg), w2), 1e-15);
}

TEST(ClientLocalTrain, AdamFirstStepMovesByLearningRate) {
  // Bias-corrected Adam moves every coordinate with a nonzero gradient by
  // about lr on the first step. Label 1 pushes w0 down and w1 up.
  const ModelSpec spec = scalar_spec();
  const ModelWeights w0 = ModelWeights::unflatten(spec, std::vector<double>{0.3, -0.2});
  ClientConfig cfg;
  cfg.optimizer = ClientOptimizer::kAdam;
  cfg.learning_rate = 0.01;
  const ModelWeights out = client_local_train(spec, w0, single(Tensor({1, 1, 1, 1}, {1.0}), 1, 2), cfg);
  EXPECT_NEAR(out.tensors()[0][0], 0.3 - 0.01, 1e-8);
  EXPECT_NEAR(out.tensors()[0][1], -0.2 + 0.01, 1e-8);
}

TEST(ClientLocalTrain, NonFiniteLossReportsContext) {
  const ModelSpec spec = model_preset("tiny-mlp");
  ClientConfig cfg;
  cfg.learning_rate = 1e300;
  cfg.local_epochs = 4;
  try {
    client_local_train(spec, init_weights(spec, 1), tiny_data(1), cfg, 7);
    FAIL() << "expected SimulationError";
  } catch (const SimulationError& e) {
    EXPECT_NE(std::string(e.what()).find("round 7"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos) << e.what();
  }
}

TEST(ClientConfig, Validation) {
  ClientConfig cfg;
  cfg.learning_rate = 0.0;
  EXPECT_THROW(cfg.validate(), ArgumentError);
  cfg = ClientConfig{};
  cfg.momentum = 1.0;
  EXPECT_THROW(cfg.validate(), ArgumentError);
  cfg = ClientConfig{};
  cfg.local_epochs = 0;
  EXPECT_THROW(cfg.validate(), ArgumentError);
}

TEST(ServerAggregate, MeanOfTwo) {
  const std::vector<ModelWeights> ups = {ModelWeights({Tensor({1}, {1.0})}, 0),
                                         ModelWeights({Tensor({1}, {3.0})}, 0)};
  EXPECT_EQ(server_aggregate(ups).tensors()[0], Tensor({1}, {2.0}));
}

TEST(ServerAggregate, IdenticalInputsReturnedUnchanged) {
  const ModelSpec spec = model_preset("tiny-mlp");
  const ModelWeights w = init_weights(spec, 4);
  EXPECT_EQ(server_aggregate(std::vector<ModelWeights>(1, w)), w);
  EXPECT_EQ(server_aggregate(std::vector<ModelWeights>(2, w)), w);
  // Longer running sums round, so only a few ulps are promised.
  for (std::size_t k : {3u, 8u}) {
    const std::vector<ModelWeights> ups(k, w);
    EXPECT_LE(max_abs_diff(server_aggregate(ups), w), 1e-15) << k;
  }
}

TEST(ServerAggregate, MatchesMeanOracle) {
  const ModelSpec spec = model_preset("tiny-lenet");
  const std::vector<ModelWeights> ups = {init_weights(spec, 1), init_weights(spec, 2), init_weights(spec, 3)};
  const ModelWeights mean = server_aggregate(ups);
  const auto a = ups[0].flatten(), b = ups[1].flatten(), c = ups[2].flatten(), m = mean.flatten();
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_NEAR(m[i], (a[i] + b[i] + c[i]) / 3.0, 1e-15);
}

TEST(ServerAggregate, ShapeMismatchIsContractError) {
  const std::vector<ModelWeights> ups = {ModelWeights({Tensor({2})}, 0), ModelWeights({Tensor({3})}, 0)};
  EXPECT_THROW(server_aggregate(ups), ContractError);
  EXPECT_THROW(server_aggregate(std::vector<ModelWeights>{}), ArgumentError);
}

void expect_disjoint(const std::vector<std::vector<std::size_t>>& parts, std::size_t n) {
  std::set<std::size_t> seen;
  for (const auto& p : parts) {
    for (std::size_t i : p) {
      EXPECT_LT(i, n);
      EXPECT_TRUE(seen.insert(i).second) << "position " << i << " handed out twice";
    }
  }
}

TEST(PartitionIid, FullSplit) {
  const auto parts = partition_iid(100, 10, 1.0, 5);
  ASSERT_EQ(parts.size(), 10u);
  for (const auto& p : parts) EXPECT_EQ(p.size(), 10u);
  expect_disjoint(parts, 100);
}

TEST(PartitionIid, TenPercentOfFiveHundred) {
  const auto parts = partition_iid(500, 10, 0.1, 5);
  ASSERT_EQ(parts.size(), 10u);
  for (const auto& p : parts) EXPECT_EQ(p.size(), 5u);
  expect_disjoint(parts, 500);
}

TEST(PartitionIid, TooFewSamples) {
  EXPECT_THROW(partition_iid(5, 10, 1.0, 1), ArgumentError);
  EXPECT_THROW(partition_iid(100, 10, 0.05, 1), ArgumentError);
}

TEST(PartitionIid, SeededAndDeterministic) {
  EXPECT_EQ(partition_iid(200, 4, 0.5, 9), partition_iid(200, 4, 0.5, 9));
  EXPECT_NE(partition_iid(200, 4, 0.5, 9), partition_iid(200, 4, 0.5, 10));
}

TEST(PartitionIid, LabelHistogramRoughlyUniform) {
  // 2000 round-robin labels over 10 classes, 10 clients of 200. Chi-square
  // with 9 degrees of freedom; 27.88 is the 0.999 quantile.
  const auto parts = partition_iid(2000, 10, 1.0, 77);
  for (const auto& p : parts) {
    std::vector<double> counts(10, 0.0);
    for (std::size_t i : p) counts[i % 10] += 1.0;
    double chi2 = 0.0;
    for (double c : counts) chi2 += (c - 20.0) * (c - 20.0) / 20.0;
    EXPECT_LT(chi2, 27.88);
  }
}

TEST(RunSimulation, OneClientOneRound) {
  const ModelSpec spec = model_preset("tiny-mlp");
  const Dataset data = tiny_data(1);
  FederationConfig fed;
  fed.seed = 12;
  ClientConfig client;
  const WiretapLog log = run_simulation(fed, client, spec, data);
  ASSERT_EQ(log.updates.size(), 1u);
  const TransmittedUpdate& u = log.updates[0];
  EXPECT_EQ(u.kind(), PayloadKind::kWeights);
  EXPECT_EQ(u.global_before(), init_weights(spec, 12));
  EXPECT_EQ(u.payload(), client_local_train(spec, init_weights(spec, 12), data, client));
  EXPECT_EQ(u.evaluation_sample_ref(), std::vector<std::size_t>{0});
  EXPECT_EQ(log.spec_fingerprint, spec.fingerprint());
}

TEST(RunSimulation, WeightDeltaIsScaledGradient) {
  const ModelSpec spec = model_preset("tiny-mlp");
  const Dataset data = tiny_data(1);
  FederationConfig fed;
  fed.seed = 5;
  for (double alpha : {1e-3, 1e-2, 1e-1}) {
    ClientConfig client;
    client.learning_rate = alpha;
    const TransmittedUpdate u = run_simulation(fed, client, spec, data).updates[0];
    const ModelWeights delta = u.global_before() - u.payload();
    const ModelWeights grad = loss_gradient(spec, u.global_before(), data);
    EXPECT_LE(max_abs_diff(delta, alpha * grad), 1e-12) << alpha;
    const ModelWeights nd = (1.0 / delta.frobenius_norm()) * delta;
    const ModelWeights ng = (1.0 / grad.frobenius_norm()) * grad;
    EXPECT_LE(max_abs_diff(nd, ng), 1e-10) << alpha;
  }
}

TEST(RunSimulation, GradientModePayloadMatchesWeightDelta) {
  const ModelSpec spec = model_preset("tiny-lenet");
  const Dataset data = synthetic_dataset(1, {3, 16, 16}, 10, 4);
  FederationConfig fed;
  fed.seed = 8;
  ClientConfig client;
  client.learning_rate = 0.01;
  const TransmittedUpdate w = run_simulation(fed, client, spec, data).updates[0];
  fed.transmit = PayloadKind::kGradients;
  const TransmittedUpdate g = run_simulation(fed, client, spec, data).updates[0];
  EXPECT_EQ(g.kind(), PayloadKind::kGradients);
  const ModelWeights implied = (1.0 / 0.01) * (w.global_before() - w.payload());
  EXPECT_LE(max_abs_diff(g.payload(), implied), 1e-12);
}

TEST(RunSimulation, SparsifiedPayloadHasZeros) {
  const ModelSpec spec = model_preset("tiny-mlp");
  FederationConfig fed;
  const WiretapLog log = run_simulation(fed, ClientConfig{}, spec, tiny_data(1), SparsifyConfig{.rate = 0.5});
  const auto flat = log.updates[0].payload().flatten();
  const auto zeros = std::count(flat.begin(), flat.end(), 0.0);
  EXPECT_GE(static_cast<double>(zeros) / static_cast<double>(flat.size()), 0.5);
  EXPECT_EQ(log.updates[0].defense(), "sparsify(0.5)");
}

TEST(RunSimulation, LogLengthAndRoundChaining) {
  const ModelSpec spec = model_preset("tiny-mlp");
  FederationConfig fed;
  fed.num_clients = 3;
  fed.rounds = 4;
  fed.fraction = 0.6;
  fed.seed = 2;
  const Dataset data = tiny_data(20);
  const WiretapLog log = run_simulation(fed, ClientConfig{}, spec, data);
  ASSERT_EQ(log.updates.size(), 12u);
  for (std::size_t t = 0; t < 4; ++t) {
    std::vector<ModelWeights> ups;
    for (std::size_t k = 0; k < 3; ++k) {
      const TransmittedUpdate& u = log.updates[t * 3 + k];
      EXPECT_EQ(u.round(), t);
      EXPECT_EQ(u.client(), k);
      EXPECT_EQ(u.evaluation_sample_ref().size(), 4u);
      ups.push_back(u.payload());
    }
    if (t + 1 < 4) EXPECT_EQ(log.updates[(t + 1) * 3].global_before(), server_aggregate(ups));
  }
}

TEST(RunSimulation, Deterministic) {
  const ModelSpec spec = model_preset("tiny-mlp");
  FederationConfig fed;
  fed.num_clients = 2;
  fed.rounds = 2;
  fed.seed = 31;
  const Dataset data = tiny_data(10);
  const DPConfig dp{.clip = 10.0, .sigma = 1e-3};
  EXPECT_EQ(run_simulation(fed, ClientConfig{}, spec, data, dp),
            run_simulation(fed, ClientConfig{}, spec, data, dp));
}

TEST(TransmittedUpdate, AttackViewCarriesOnlyWeights) {
  const ModelSpec spec = model_preset("tiny-mlp");
  const WiretapLog log = run_simulation(FederationConfig{}, ClientConfig{}, spec, tiny_data(1));
  const TransmittedUpdate& u = log.updates[0];
  const AttackView view = u.attack_view();
  // Structured binding pins the view to exactly three members.
  const auto& [kind, before, payload] = view;
  EXPECT_EQ(kind, u.kind());
  EXPECT_EQ(&before, &u.global_before());
  EXPECT_EQ(&payload, &u.payload());
}

}  // namespace
}  // namespace weightleak
