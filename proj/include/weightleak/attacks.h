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

#ifndef WEIGHTLEAK_ATTACKS_H_
#define WEIGHTLEAK_ATTACKS_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "weightleak/autodiff.h"
#include "weightleak/flsim.h"
#include "weightleak/models.h"
#include "weightleak/tensor.h"

namespace weightleak {

// Norm guard used by the normalized objectives.
inline constexpr double kNormEpsilon = 1e-12;

enum class ObjectiveKind { kDlg, kDlgK, kCosine, kDlm, kDlmPlus, kDlmPlusTv };

std::string objective_name(ObjectiveKind kind);
ObjectiveKind parse_objective(const std::string& name);
// True for objectives fed by transmitted weights (dlm, dlm-plus, dlm-plus-tv).
bool uses_weights(ObjectiveKind kind);

// How dlm-plus normalizes: one norm over all parameters, or one per tensor.
enum class NormScope { kGlobal, kPerLayer };

struct ObjectiveConfig {
  ObjectiveKind kind = ObjectiveKind::kDlmPlus;
  NormScope norm_scope = NormScope::kGlobal;
  double k = 1.0;        // dlg-k
  double gamma0 = 1.0;   // dlm
  double beta_tv = 0.0;  // cosine, dlm-plus-tv
};

enum class OptimizerKind { kAdam, kLbfgs };

std::string optimizer_name(OptimizerKind kind);
OptimizerKind parse_optimizer(const std::string& name);

struct AttackOptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double lr = 0.1;
  std::size_t history = 100;  // lbfgs
  std::size_t max_iter = 20;  // lbfgs inner iterations per outer iteration
  bool backtracking = false;  // lbfgs
};

struct AttackConfig {
  ObjectiveConfig objective;
  AttackOptimizerConfig optimizer;
  std::size_t iterations = 4000;  // N
  std::uint64_t seed = 0;
  double success_threshold_db = 30.0;
  std::size_t batch_size = 1;
  double stop_loss = 1e-10;
  // Record PSNR against the ground truth every this many iterations
  // (0 disables the trace).
  std::size_t psnr_every = 1;

  void validate() const;
};

// Ground truth handed to run_attack by the evaluation harness only.
struct GroundTruth {
  Tensor images;  // [B, C, H, W]
  std::vector<int> labels;
};

struct AttackResult {
  Tensor recovered;          // [B, C, H, W], clamped to [0, 1]
  std::vector<int> labels;   // argmax of each dummy label row
  std::vector<double> loss_trace;
  std::vector<double> psnr_trace;  // empty without ground truth
  std::size_t iterations_used = 0;
  double final_loss = 0.0;
  std::optional<double> alpha_estimate;
  std::optional<double> gamma;
  // Filled only when ground truth was supplied.
  bool evaluated = false;
  bool success = false;
  double psnr = 0.0;   // mean over the batch under best assignment
  double ssim = 0.0;
  std::vector<double> per_image_psnr;
  std::size_t labels_correct = 0;
};

// Objectives over the dummy gradient. Targets are constants; shapes must
// align with the dummy gradient or ContractError is thrown.
ad::Var objective_dlg(std::span<const ad::Var> dummy_grad, std::span<const Tensor> true_grad);
ad::Var objective_dlg_k(std::span<const ad::Var> dummy_grad, std::span<const Tensor> true_grad,
                        double k);
ad::Var objective_cosine(std::span<const ad::Var> dummy_grad, std::span<const Tensor> true_grad,
                         double beta_tv, const ad::Var& dummy_x);
ad::Var objective_dlm(std::span<const ad::Var> dummy_grad, std::span<const Tensor> before,
                      std::span<const Tensor> after, const ad::Var& gamma);
// Throws DegenerateError when before == after.
ad::Var objective_dlm_plus(std::span<const ad::Var> dummy_grad, std::span<const Tensor> before,
                           std::span<const Tensor> after, double beta_tv, const ad::Var& dummy_x,
                           NormScope scope = NormScope::kGlobal);

// ||before - after|| / ||dummy_grad||. Throws DegenerateError on a zero
// dummy gradient.
double estimate_alpha(std::span<const Tensor> dummy_grad, std::span<const Tensor> before,
                      std::span<const Tensor> after);

// Gradient of the soft-label loss at the dummy point, with the backward pass
// recorded so it can be differentiated again.
std::vector<ad::Var> dummy_gradient(const ModelSpec& spec, std::span<const ad::Var> weights,
                                    const ad::Var& dummy_x, const ad::Var& dummy_y);

// The attack objective for `cfg` as a function of the dummy variables.
ad::Var attack_objective(const ObjectiveConfig& cfg, const AttackView& view,
                         std::span<const ad::Var> dummy_grad, const ad::Var& dummy_x,
                         const std::optional<ad::Var>& gamma);

// Runs the recovery loop. Throws ContractError when the payload kind does not
// suit the objective and DivergedError on a non-finite objective.
AttackResult run_attack(const AttackView& view, const ModelSpec& spec, const AttackConfig& cfg,
                        const GroundTruth* truth = nullptr);

}  // namespace weightleak

#endif  // WEIGHTLEAK_ATTACKS_H_
