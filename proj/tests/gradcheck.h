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

// Finite-difference checks shared by the autodiff tests and the acceptance
// suite: a table of primitive ops and first/second-order error probes.

#ifndef WEIGHTLEAK_TESTS_GRADCHECK_H_
#define WEIGHTLEAK_TESTS_GRADCHECK_H_

#include <algorithm>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "test_util.h"
#include "weightleak/attacks.h"
#include "weightleak/autodiff.h"
#include "weightleak/flsim.h"
#include "weightleak/ops.h"

namespace weightleak::testing {

using ad::GradResult;
using ad::Tape;
using ad::Var;

using Builder = std::function<Var(const std::vector<Var>&)>;

// Scalar <c, f(inputs)> with a fixed random c, so the upstream gradient is
// not all ones.
inline double probe_value(const Builder& f, const std::vector<Tensor>& inputs, const Tensor* weights) {
  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& t : inputs) vars.push_back(tape.constant(t));
  Var out = f(vars);
  double s = 0.0;
  for (std::size_t i = 0; i < out.value().size(); ++i) s += (*weights)[i] * out.value()[i];
  return s;
}

inline Var probe(const Builder& f, const std::vector<Var>& vars, const Tensor& weights) {
  Var out = f(vars);
  return sum(mul(out, vars.front().tape().constant(weights)));
}

// Largest relative error of any input's gradient against central
// differences.
inline double first_order_error(const Builder& f, const std::vector<Tensor>& inputs, std::mt19937_64& rng) {
  Tape shape_tape;
  std::vector<Var> shape_vars;
  for (const Tensor& t : inputs) shape_vars.push_back(shape_tape.constant(t));
  const Tensor weights = random_tensor(f(shape_vars).shape(), rng);

  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& t : inputs) vars.push_back(tape.variable(t));
  GradResult g = gradients(probe(f, vars, weights), vars, false);
  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto fi = [&](const Tensor& xi) {
      std::vector<Tensor> in = inputs;
      in[i] = xi;
      return probe_value(f, in, &weights);
    };
    worst = std::max(worst, relative_error(g.tensor(i), finite_difference(fi, inputs[i])));
  }
  return worst;
}

// Second-order check: phi = sum_i ||d probe / d input_i||^2, differentiated
// through the recorded backward pass and compared with differences of phi.
// An input whose phi-gradient vanishes counts its absolute error.
inline double second_order_error(const Builder& f, const std::vector<Tensor>& inputs, std::mt19937_64& rng) {
  Tape shape_tape;
  std::vector<Var> shape_vars;
  for (const Tensor& t : inputs) shape_vars.push_back(shape_tape.constant(t));
  const Tensor weights = random_tensor(f(shape_vars).shape(), rng);

  auto phi_of = [&](const std::vector<Tensor>& in) {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& t : in) vars.push_back(tape.variable(t));
    GradResult g = gradients(probe(f, vars, weights), vars, false);
    double phi = 0.0;
    for (const Tensor& t : g.tensors()) phi += t.squared_norm();
    return phi;
  };

  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& t : inputs) vars.push_back(tape.variable(t));
  GradResult g = gradients(probe(f, vars, weights), vars, true);
  Var phi = squared_norm_all(g.grads);
  GradResult gg = gradients(phi, vars, false);
  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto fi = [&](const Tensor& xi) {
      std::vector<Tensor> in = inputs;
      in[i] = xi;
      return phi_of(in);
    };
    const Tensor fd = finite_difference(fi, inputs[i]);
    const double err = fd.norm() < 1e-9 ? gg.tensor(i).norm() : relative_error(gg.tensor(i), fd);
    worst = std::max(worst, err);
  }
  return worst;
}

struct OpCase {
  const char* name;
  Builder build;
  std::vector<Shape> shapes;
  bool kink = false;  // sample inputs away from zero
};

inline std::vector<OpCase> op_cases() {
  return {
      {"add", [](const auto& v) { return add(v[0], v[1]); }, {{2, 3}, {2, 3}}},
      {"sub", [](const auto& v) { return sub(v[0], v[1]); }, {{2, 3}, {2, 3}}},
      {"mul", [](const auto& v) { return mul(v[0], v[1]); }, {{2, 3}, {2, 3}}},
      {"scale", [](const auto& v) { return scale(v[0], -1.7); }, {{4}}},
      {"add_scalar", [](const auto& v) { return add_scalar(v[0], 0.3); }, {{4}}},
      {"reciprocal", [](const auto& v) { return reciprocal(add_scalar(v[0], 2.0)); }, {{5}}},
      {"sqrt", [](const auto& v) { return sqrt(add_scalar(v[0], 2.0)); }, {{5}}},
      {"abs", [](const auto& v) { return abs(v[0]); }, {{6}}, true},
      {"sigmoid", [](const auto& v) { return sigmoid(v[0]); }, {{2, 4}}},
      {"relu", [](const auto& v) { return relu(v[0]); }, {{2, 4}}, true},
      {"mul_scalar", [](const auto& v) { return mul_scalar(v[0], v[1]); }, {{3, 2}, {}}},
      {"sum", [](const auto& v) { return sum(mul(v[0], v[0])); }, {{3, 2}}},
      {"reshape", [](const auto& v) { return mul(reshape(v[0], {6}), v[1]); }, {{2, 3}, {6}}},
      {"matmul", [](const auto& v) { return matmul(v[0], v[1]); }, {{3, 4}, {4, 2}}},
      {"transpose", [](const auto& v) { return mul(transpose(v[0]), v[1]); }, {{2, 3}, {3, 2}}},
      {"sum_rows", [](const auto& v) { return mul(sum_rows(v[0]), v[1]); }, {{3, 4}, {4}}},
      {"broadcast_rows", [](const auto& v) { return mul(broadcast_rows(v[0], 3), v[1]); }, {{4}, {3, 4}}},
      {"row_sum", [](const auto& v) { return mul(row_sum(v[0]), v[1]); }, {{3, 4}, {3}}},
      {"broadcast_cols", [](const auto& v) { return mul(broadcast_cols(v[0], 4), v[1]); }, {{3}, {3, 4}}},
      {"softmax_rows", [](const auto& v) { return softmax_rows(v[0]); }, {{2, 5}}},
      {"log_softmax_rows", [](const auto& v) { return log_softmax_rows(v[0]); }, {{2, 5}}},
      {"conv2d", [](const auto& v) { return conv2d(v[0], v[1], {1, 1}); }, {{1, 2, 5, 5}, {3, 2, 3, 3}}},
      {"conv2d_strided", [](const auto& v) { return conv2d(v[0], v[1], {2, 2}); }, {{2, 2, 6, 6}, {2, 2, 5, 5}}},
      {"conv2d_input_grad",
       [](const auto& v) { return conv2d_input_grad(v[0], v[1], {1, 2, 6, 6}, {2, 2}); },
       {{1, 3, 3, 3}, {3, 2, 5, 5}}},
      {"conv2d_kernel_grad",
       [](const auto& v) { return conv2d_kernel_grad(v[0], v[1], {3, 2, 5, 5}, {2, 2}); },
       {{1, 2, 6, 6}, {1, 3, 3, 3}}},
      {"channel_bias", [](const auto& v) { return mul(add_channel_bias(v[0], v[1]), v[0]); }, {{2, 3, 2, 2}, {3}}},
      {"diff_h", [](const auto& v) { return mul(diff_h(v[0]), v[1]); }, {{1, 2, 4, 3}, {1, 2, 3, 3}}},
      {"diff_w", [](const auto& v) { return mul(diff_w(v[0]), v[1]); }, {{1, 2, 3, 4}, {1, 2, 3, 3}}},
      {"diff_h_adjoint", [](const auto& v) { return mul(diff_h_adjoint(v[0], {1, 1, 4, 3}), v[1]); }, {{1, 1, 3, 3}, {1, 1, 4, 3}}},
      {"diff_w_adjoint", [](const auto& v) { return mul(diff_w_adjoint(v[0], {1, 1, 3, 4}), v[1]); }, {{1, 1, 3, 3}, {1, 1, 3, 4}}},
      {"affine_bias", [](const auto& v) { return affine(v[0], v[1], v[2]); }, {{2, 3}, {3, 4}, {4}}},
      {"cross_entropy_soft", [](const auto& v) { return cross_entropy_soft(v[0], v[1]); }, {{2, 5}, {2, 5}}},
      {"frobenius_norm_all", [](const auto& v) { return frobenius_norm_all(v); }, {{2, 2}, {3}}},
      {"total_variation", [](const auto& v) { return total_variation(v[0]); }, {{1, 2, 4, 4}}, true},
  };
}

inline std::vector<Tensor> sample_inputs(const OpCase& c, std::mt19937_64& rng) {
  std::vector<Tensor> inputs;
  for (const Shape& s : c.shapes) {
    inputs.push_back(c.kink ? random_away_from_zero(s, rng, 0.02) : random_tensor(s, rng));
  }
  return inputs;
}

// Relative error of d(objective)/d(x) against central differences on a
// random dummy, everything else held fixed.
inline double objective_input_gradient_error(const ObjectiveConfig& cfg, const TransmittedUpdate& u,
                                             const ModelSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Tensor x0 = random_tensor(spec.batch_input_shape(1), rng);
  const Tensor y0 = random_tensor({1, spec.num_classes()}, rng);
  auto value_and_grad = [&](const Tensor& x, Tensor* grad) {
    ad::Tape tape;
    const auto weights = weight_variables(tape, u.global_before());
    const ad::Var vx = tape.variable(x);
    const ad::Var vy = tape.variable(y0);
    std::optional<ad::Var> gamma;
    if (cfg.kind == ObjectiveKind::kDlm) gamma = tape.variable(Tensor::scalar(cfg.gamma0));
    const auto g = dummy_gradient(spec, weights, vx, vy);
    const ad::Var obj = attack_objective(cfg, u.attack_view(), g, vx, gamma);
    if (grad != nullptr) {
      const ad::Var wrt[] = {vx};
      *grad = gradients(obj, wrt, false).tensor(0);
    }
    return obj.value().item();
  };
  Tensor analytic;
  value_and_grad(x0, &analytic);
  const Tensor numeric = finite_difference([&](const Tensor& x) { return value_and_grad(x, nullptr); }, x0);
  return relative_error(analytic, numeric);
}

}  // namespace weightleak::testing

#endif  // WEIGHTLEAK_TESTS_GRADCHECK_H_
