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

// Reverse-mode differentiation over a recording tape.
//
// Every backward rule is written in terms of the same differentiable ops, so
// the gradient computation can itself be recorded (retain_graph) and
// differentiated again. The attack objectives depend on this: they contain
// dL/dW and are minimised over the dummy input.

#ifndef WEIGHTLEAK_AUTODIFF_H_
#define WEIGHTLEAK_AUTODIFF_H_

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "weightleak/tensor.h"

namespace weightleak::ad {

class Tape;
struct GradientsImpl;

// Handle to a node on a Tape. Cheap to copy; the node value never changes.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  friend class Tape;
  friend struct GradientsImpl;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Receives the node output and the incoming gradient; returns one gradient per
// input. Entries for inputs whose `needs` flag is false may be left invalid.
using BackwardFn = std::function<std::vector<Var>(const Var& output, const Var& grad,
                                                  std::span<const bool> needs)>;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var variable(Tensor value);

  // Records an op output. The node only keeps `inputs`/`backward` when some
  // input requires grad and recording is enabled.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward);

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  friend class Var;
  friend class NoGradGuard;
  friend struct GradientsImpl;

  struct Node {
    Tensor value;
    std::vector<Var> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };

  std::deque<Node> nodes_;
  bool grad_enabled_ = true;
};

// Disables recording on a tape for its lifetime.
class NoGradGuard {
 public:
  explicit NoGradGuard(Tape& tape) : tape_(tape), previous_(tape.grad_enabled_) {
    tape_.grad_enabled_ = false;
  }
  ~NoGradGuard() { tape_.grad_enabled_ = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape& tape_;
  bool previous_;
};

struct GradResult {
  std::vector<Var> grads;  // aligned with the requested variables
  bool graph_retained = false;

  const Tensor& tensor(std::size_t i) const { return grads.at(i).value(); }
  std::vector<Tensor> tensors() const;
};

// d(root)/d(wrt[i]) for every i. `root` must hold a single value (rank 0).
// Variables that `root` does not depend on get a zero gradient. With
// `retain_graph` the backward pass is recorded, so the returned grads are
// themselves differentiable.
GradResult gradients(const Var& root, std::span<const Var> wrt, bool retain_graph);

}  // namespace weightleak::ad

#endif  // WEIGHTLEAK_AUTODIFF_H_
