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

#ifndef WEIGHTLEAK_OPTIM_H_
#define WEIGHTLEAK_OPTIM_H_

#include <cstddef>
#include <functional>
#include <vector>

#include "weightleak/tensor.h"

namespace weightleak {

// Loss and gradient at a point; grads aligned with the parameter list.
struct Evaluation {
  double loss = 0.0;
  std::vector<Tensor> grads;
};

using Closure = std::function<Evaluation(const std::vector<Tensor>& params)>;

struct AdamOptions {
  double lr = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam.
class Adam {
 public:
  explicit Adam(AdamOptions options);

  void step(std::vector<Tensor>& params, const std::vector<Tensor>& grads);
  std::size_t steps() const { return steps_; }
  const std::vector<Tensor>& first_moment() const { return m_; }
  const std::vector<Tensor>& second_moment() const { return v_; }

 private:
  AdamOptions options_;
  std::size_t steps_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

struct LbfgsOptions {
  double lr = 1.0;             // constant step
  std::size_t history = 100;   // m
  std::size_t max_iter = 20;   // inner iterations per step()
  bool backtracking = false;   // Armijo, c = 1e-4, halving
};

// Two-loop-recursion L-BFGS over a flat view of all parameters. Each step()
// runs up to max_iter inner iterations.
class Lbfgs {
 public:
  explicit Lbfgs(LbfgsOptions options);

  // Returns the evaluation at the point the step started from.
  Evaluation step(std::vector<Tensor>& params, const Closure& closure);

  std::size_t history_size() const { return s_.size(); }
  std::size_t resets() const { return resets_; }
  // Pairs dropped because s'y <= 1e-10 |s| |y|.
  std::size_t skipped_pairs() const { return skipped_; }

  // Search direction -H g from the stored pairs (-g when empty).
  std::vector<double> direction(const std::vector<double>& grad) const;

 private:
  void push_pair(std::vector<double> s, std::vector<double> y);

  LbfgsOptions options_;
  std::vector<std::vector<double>> s_;
  std::vector<std::vector<double>> y_;
  std::vector<double> rho_;
  std::size_t resets_ = 0;
  std::size_t skipped_ = 0;
};

}  // namespace weightleak

#endif  // WEIGHTLEAK_OPTIM_H_
