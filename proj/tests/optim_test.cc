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

#include <cmath>
#include <random>
#include <vector>

#include "gtest/gtest.h"
#include "weightleak/errors.h"
#include "weightleak/optim.h"

namespace weightleak {
namespace {

// f(x) = 0.5 x'Ax - b'x with A = Q diag(eig) Q'.
struct Quadratic {
  std::size_t n;
  std::vector<double> a;
  std::vector<double> b;

  Quadratic(const std::vector<double>& eig, std::uint64_t seed) : n(eig.size()), a(n * n), b(n) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    // Gram-Schmidt on a random matrix for Q.
    std::vector<std::vector<double>> q(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      for (double& v : q[i]) v = normal(rng);
      for (std::size_t j = 0; j < i; ++j) {
        double d = 0.0;
        for (std::size_t k = 0; k < n; ++k) d += q[i][k] * q[j][k];
        for (std::size_t k = 0; k < n; ++k) q[i][k] -= d * q[j][k];
      }
      double norm = 0.0;
      for (double v : q[i]) norm += v * v;
      for (double& v : q[i]) v /= std::sqrt(norm);
    }
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t k = 0; k < n; ++k) a[r * n + c] += q[k][r] * eig[k] * q[k][c];
      }
    }
    for (double& v : b) v = normal(rng);
  }

  Evaluation operator()(const std::vector<Tensor>& params) const {
    const Tensor& x = params[0];
    Evaluation ev;
    Tensor g({n});
    double f = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      double ax = 0.0;
      for (std::size_t c = 0; c < n; ++c) ax += a[r * n + c] * x[c];
      g[r] = ax - b[r];
      f += 0.5 * x[r] * ax - b[r] * x[r];
    }
    ev.loss = f;
    ev.grads = {g};
    return ev;
  }
};

double grad_norm(const Quadratic& q, const std::vector<Tensor>& params) {
  return q(params).grads[0].norm();
}

TEST(Lbfgs, QuadraticConvergesWithin50Iterations) {
  const Quadratic q({0.5, 0.8, 1.0, 1.4, 1.9}, 11);
  Lbfgs opt(LbfgsOptions{.lr = 1.0, .history = 100, .max_iter = 1});
  std::vector<Tensor> x = {Tensor({5})};
  int used = 0;
  for (; used < 50 && grad_norm(q, x) >= 1e-8; ++used) opt.step(x, std::cref(q));
  EXPECT_LT(grad_norm(q, x), 1e-8) << "after " << used << " iterations";
}

TEST(Lbfgs, IllConditionedQuadraticWithBacktracking) {
  const Quadratic q({1.0, 3.0, 10.0, 30.0, 100.0}, 12);
  Lbfgs opt(LbfgsOptions{.lr = 1.0, .history = 100, .max_iter = 1, .backtracking = true});
  std::vector<Tensor> x = {Tensor({5})};
  for (int i = 0; i < 50 && grad_norm(q, x) >= 1e-8; ++i) opt.step(x, std::cref(q));
  EXPECT_LT(grad_norm(q, x), 1e-8);
}

TEST(Lbfgs, FirstStepIsScaledNegativeGradient) {
  const Quadratic q({1.0, 2.0, 3.0, 4.0, 5.0}, 13);
  Lbfgs opt(LbfgsOptions{.lr = 0.3, .history = 10, .max_iter = 1});
  std::vector<Tensor> x = {Tensor({5}, {0.1, -0.2, 0.3, 0.4, -0.5})};
  const Tensor x0 = x[0];
  const Tensor g0 = q(x).grads[0];
  const Evaluation first = opt.step(x, std::cref(q));
  EXPECT_EQ(first.grads[0], g0);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(x[0][i], x0[i] - 0.3 * g0[i], 1e-15);
}

TEST(Lbfgs, InnerIterationsShareOneCall) {
  const Quadratic q({0.5, 0.8, 1.0, 1.4, 1.9}, 14);
  Lbfgs opt(LbfgsOptions{.lr = 1.0, .history = 100, .max_iter = 20});
  std::vector<Tensor> x = {Tensor({5})};
  opt.step(x, std::cref(q));
  opt.step(x, std::cref(q));
  EXPECT_LT(grad_norm(q, x), 1e-8);
}

TEST(Lbfgs, HistoryIsCapped) {
  const Quadratic q({0.5, 0.8, 1.0, 1.4, 1.9}, 15);
  Lbfgs opt(LbfgsOptions{.lr = 0.5, .history = 3, .max_iter = 10});
  std::vector<Tensor> x = {Tensor({5})};
  opt.step(x, std::cref(q));
  EXPECT_EQ(opt.history_size(), 3u);
}

TEST(Lbfgs, NegativeCurvaturePairsAreSkipped) {
  // f = -x^2 / 2: s'y = -s^2 < 0 for every step.
  const Closure concave = [](const std::vector<Tensor>& p) {
    return Evaluation{-0.5 * p[0][0] * p[0][0], {Tensor({1}, {-p[0][0]})}};
  };
  Lbfgs opt(LbfgsOptions{.lr = 0.1, .history = 5, .max_iter = 3});
  std::vector<Tensor> x = {Tensor({1}, {1.0})};
  opt.step(x, concave);
  EXPECT_EQ(opt.history_size(), 0u);
  EXPECT_EQ(opt.skipped_pairs(), 3u);
}

TEST(Lbfgs, DirectionSatisfiesNewestSecantEquation) {
  // direction(-y) = H y must equal s for the last stored pair.
  const Quadratic q({1.0, 2.0, 4.0}, 16);
  Lbfgs opt(LbfgsOptions{.lr = 0.2, .history = 10, .max_iter = 1});
  std::vector<Tensor> x = {Tensor({3}, {1.0, 1.0, 1.0})};
  const Tensor x0 = x[0];
  const Tensor g0 = q(x).grads[0];
  opt.step(x, std::cref(q));
  opt.step(x, std::cref(q));
  // Replay the second pair: s = x2 - x1, y = A s.
  ASSERT_EQ(opt.history_size(), 2u);
  std::vector<double> x1(3), s2(3), neg_y(3);
  for (std::size_t i = 0; i < 3; ++i) x1[i] = x0[i] - 0.2 * g0[i];
  for (std::size_t i = 0; i < 3; ++i) s2[i] = x[0][i] - x1[i];
  for (std::size_t r = 0; r < 3; ++r) {
    double as = 0.0;
    for (std::size_t c = 0; c < 3; ++c) as += q.a[r * 3 + c] * s2[c];
    neg_y[r] = -as;
  }
  const std::vector<double> d = opt.direction(neg_y);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(d[i], s2[i], 1e-12);
}

TEST(Lbfgs, RejectsBadOptions) {
  EXPECT_THROW(Lbfgs(LbfgsOptions{.lr = 0.0}), ArgumentError);
  EXPECT_THROW(Lbfgs(LbfgsOptions{.history = 0}), ArgumentError);
  EXPECT_THROW(Lbfgs(LbfgsOptions{.max_iter = 0}), ArgumentError);
}

TEST(Adam, ZeroGradientOnFreshStateOnlyCountsTheStep) {
  Adam opt(AdamOptions{});
  std::vector<Tensor> p = {Tensor({3}, {1.0, -2.0, 3.0})};
  const Tensor before = p[0];
  opt.step(p, {Tensor({3})});
  EXPECT_EQ(p[0], before);
  EXPECT_EQ(opt.steps(), 1u);
}

TEST(Adam, MatchesScalarReference) {
  const AdamOptions o{.lr = 0.05, .beta1 = 0.8, .beta2 = 0.99, .eps = 1e-8};
  Adam opt(o);
  std::vector<Tensor> p = {Tensor({1}, {0.7})};
  double x = 0.7, m = 0.0, v = 0.0;
  for (int t = 1; t <= 30; ++t) {
    const double g = 2.0 * x - std::sin(x);
    m = o.beta1 * m + (1 - o.beta1) * g;
    v = o.beta2 * v + (1 - o.beta2) * g * g;
    x -= o.lr * (m / (1 - std::pow(o.beta1, t))) / (std::sqrt(v / (1 - std::pow(o.beta2, t))) + o.eps);
    opt.step(p, {Tensor({1}, {2.0 * p[0][0] - std::sin(p[0][0])})});
    EXPECT_NEAR(p[0][0], x, 1e-14) << t;
  }
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Adam opt(AdamOptions{.lr = 0.1});
  std::vector<Tensor> p = {Tensor({2}, {0.0, 0.0})};
  opt.step(p, {Tensor({2}, {3.0, -1e-3})});
  EXPECT_NEAR(p[0][0], -0.1, 1e-8);
  EXPECT_NEAR(p[0][1], 0.1, 1e-5);
}

TEST(Adam, ShapeMismatchIsContractError) {
  Adam opt(AdamOptions{});
  std::vector<Tensor> p = {Tensor({2})};
  EXPECT_THROW(opt.step(p, {Tensor({3})}), ContractError);
  EXPECT_THROW(opt.step(p, {}), ContractError);
}

}  // namespace
}  // namespace weightleak
