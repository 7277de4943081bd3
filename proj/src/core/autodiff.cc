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

#include "weightleak/autodiff.h"

#include <algorithm>
#include <array>
#include <optional>

#include "weightleak/errors.h"
#include "weightleak/ops.h"

namespace weightleak::ad {

const Tensor& Var::value() const { return tape_->nodes_[id_].value; }

bool Var::requires_grad() const { return tape_->nodes_[id_].requires_grad; }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  bool tracked = false;
  if (grad_enabled_) {
    for (const Var& in : inputs) {
      if (&in.tape() != this) throw ContractError("op inputs live on different tapes");
      tracked = tracked || in.requires_grad();
    }
  }
  if (!tracked) return constant(std::move(value));
  nodes_.push_back(Node{std::move(value), std::move(inputs), std::move(backward), true});
  return Var(this, nodes_.size() - 1);
}

std::vector<Tensor> GradResult::tensors() const {
  std::vector<Tensor> out;
  out.reserve(grads.size());
  for (const Var& g : grads) out.push_back(g.value());
  return out;
}

struct GradientsImpl {
  static GradResult run(const Var& root, std::span<const Var> wrt, bool retain_graph) {
    if (!root.valid()) throw ArgumentError("gradients: invalid root");
    if (root.value().size() != 1 || root.value().rank() != 0) {
      throw ArgumentError("gradients: root must be a scalar, got shape " +
                          shape_string(root.shape()));
    }
    Tape& tape = root.tape();
    for (const Var& w : wrt) {
      if (!w.valid() || &w.tape() != &tape) {
        throw ArgumentError("gradients: variable is not on the root's tape");
      }
    }
    const std::size_t n = root.id() + 1;

    // Only nodes that depend on a requested variable need a gradient.
    std::vector<char> relevant(n, 0);
    for (const Var& w : wrt) {
      if (w.id() < n) relevant[w.id()] = 1;
    }
    for (std::size_t id = 0; id < n; ++id) {
      if (relevant[id]) continue;
      const Tape::Node& node = tape.nodes_[id];
      for (const Var& in : node.inputs) {
        if (relevant[in.id()]) {
          relevant[id] = 1;
          break;
        }
      }
    }

    std::optional<NoGradGuard> guard;
    if (!retain_graph) guard.emplace(tape);

    std::vector<std::optional<Var>> grad(n);
    if (relevant[root.id()]) grad[root.id()] = tape.constant(Tensor::scalar(1.0));

    constexpr std::size_t kMaxInputs = 4;
    std::array<bool, kMaxInputs> needs{};
    for (std::size_t id = n; id-- > 0;) {
      if (!grad[id]) continue;
      // std::deque keeps element references valid across push_back, so the
      // node can be read while the backward rule records new nodes.
      const Tape::Node& node = tape.nodes_[id];
      if (!node.backward) continue;
      if (node.inputs.size() > kMaxInputs) throw ContractError("op has too many inputs");
      bool any = false;
      for (std::size_t i = 0; i < node.inputs.size(); ++i) {
        needs[i] = relevant[node.inputs[i].id()] != 0;
        any = any || needs[i];
      }
      if (!any) continue;
      const std::vector<Var> input_grads = node.backward(
          Var(&tape, id), *grad[id], std::span<const bool>(needs.data(), node.inputs.size()));
      for (std::size_t i = 0; i < node.inputs.size(); ++i) {
        if (!needs[i] || i >= input_grads.size() || !input_grads[i].valid()) continue;
        const std::size_t in_id = node.inputs[i].id();
        if (grad[in_id]) {
          grad[in_id] = add(*grad[in_id], input_grads[i]);
        } else {
          grad[in_id] = input_grads[i];
        }
      }
      // Intermediate gradients are no longer needed once propagated.
      if (id != root.id()) {
        bool is_requested = false;
        for (const Var& w : wrt) is_requested = is_requested || w.id() == id;
        if (!is_requested) grad[id].reset();
      }
    }

    GradResult result;
    result.graph_retained = retain_graph;
    for (const Var& w : wrt) {
      if (w.id() < n && grad[w.id()]) {
        result.grads.push_back(*grad[w.id()]);
      } else {
        result.grads.push_back(tape.constant(Tensor(w.shape())));
      }
    }
    return result;
  }
};

GradResult gradients(const Var& root, std::span<const Var> wrt, bool retain_graph) {
  return GradientsImpl::run(root, wrt, retain_graph);
}

}  // namespace weightleak::ad
