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

#include "weightleak/attacks.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "weightleak/errors.h"
#include "weightleak/metrics.h"
#include "weightleak/ops.h"
#include "weightleak/optim.h"

namespace weightleak {
namespace {

using ad::Var;

void require_aligned(std::span<const Var> dummy, std::span<const Tensor> target, const char* what) {
  if (dummy.empty()) throw ArgumentError(std::string(what) + ": empty gradient list");
  if (dummy.size() != target.size()) {
    throw ContractError(std::string(what) + ": " + std::to_string(dummy.size()) +
                        " dummy tensors vs " + std::to_string(target.size()) + " targets");
  }
  for (std::size_t i = 0; i < dummy.size(); ++i) {
    if (dummy[i].shape() != target[i].shape()) {
      throw ContractError(std::string(what) + ": tensor " + std::to_string(i) + " is " +
                          shape_string(dummy[i].shape()) + " but target is " +
                          shape_string(target[i].shape()));
    }
  }
}

double global_norm(std::span<const Tensor> ts) {
  double s = 0.0;
  for (const Tensor& t : ts) s += t.squared_norm();
  return std::sqrt(s);
}

std::vector<Tensor> difference(std::span<const Tensor> a, std::span<const Tensor> b) {
  if (a.size() != b.size()) throw ContractError("weight lists differ in length");
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].shape() != b[i].shape()) {
      throw ContractError("weight shapes differ: " + shape_string(a[i].shape()) + " vs " +
                          shape_string(b[i].shape()));
    }
    out.push_back(a[i] - b[i]);
  }
  return out;
}

// max(norm, eps): the guard only engages near zero, so normalized vectors
// have unit norm whenever it is inactive.
Var guarded(const Var& norm) {
  if (norm.value().item() > kNormEpsilon) return norm;
  return norm.tape().constant(Tensor::scalar(kNormEpsilon));
}

Var with_tv(const Var& base, double beta_tv, const Var& dummy_x) {
  if (beta_tv == 0.0) return base;
  return ad::add(base, ad::scale(ad::total_variation(dummy_x), beta_tv));
}

std::vector<int> row_argmax(const Tensor& logits) {
  std::vector<int> out;
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < cols; ++c) {
      if (logits[r * cols + c] > logits[r * cols + best]) best = c;
    }
    out.push_back(static_cast<int>(best));
  }
  return out;
}

}  // namespace

std::string objective_name(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::kDlg: return "dlg";
    case ObjectiveKind::kDlgK: return "dlg-k";
    case ObjectiveKind::kCosine: return "cosine";
    case ObjectiveKind::kDlm: return "dlm";
    case ObjectiveKind::kDlmPlus: return "dlm-plus";
    case ObjectiveKind::kDlmPlusTv: return "dlm-plus-tv";
  }
  return "?";
}

ObjectiveKind parse_objective(const std::string& name) {
  for (ObjectiveKind k : {ObjectiveKind::kDlg, ObjectiveKind::kDlgK, ObjectiveKind::kCosine,
                          ObjectiveKind::kDlm, ObjectiveKind::kDlmPlus, ObjectiveKind::kDlmPlusTv}) {
    if (objective_name(k) == name) return k;
  }
  throw ConfigError("unknown objective \"" + name +
                    "\" (expected dlg, dlg-k, cosine, dlm, dlm-plus or dlm-plus-tv)");
}

bool uses_weights(ObjectiveKind kind) {
  return kind == ObjectiveKind::kDlm || kind == ObjectiveKind::kDlmPlus ||
         kind == ObjectiveKind::kDlmPlusTv;
}

std::string optimizer_name(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam ? "adam" : "lbfgs";
}

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "lbfgs") return OptimizerKind::kLbfgs;
  throw ConfigError("unknown optimizer \"" + name + "\" (expected adam or lbfgs)");
}

void AttackConfig::validate() const {
  if (iterations < 1) throw ConfigError("attack: iterations must be >= 1");
  if (!(optimizer.lr > 0.0)) throw ConfigError("attack: optimizer lr must be > 0");
  if (optimizer.history < 1) throw ConfigError("attack: lbfgs history must be >= 1");
  if (optimizer.max_iter < 1) throw ConfigError("attack: lbfgs max_iter must be >= 1");
  if (!(objective.beta_tv >= 0.0)) throw ConfigError("attack: beta_tv must be >= 0");
  if (batch_size < 1) throw ConfigError("attack: batch_size must be >= 1");
  if (!std::isfinite(objective.k) || !std::isfinite(objective.gamma0)) {
    throw ConfigError("attack: k and gamma0 must be finite");
  }
}

Var objective_dlg(std::span<const Var> dummy_grad, std::span<const Tensor> true_grad) {
  return objective_dlg_k(dummy_grad, true_grad, 1.0);
}

Var objective_dlg_k(std::span<const Var> dummy_grad, std::span<const Tensor> true_grad, double k) {
  require_aligned(dummy_grad, true_grad, "dlg");
  ad::Tape& tape = dummy_grad[0].tape();
  std::vector<Var> diffs;
  for (std::size_t i = 0; i < dummy_grad.size(); ++i) {
    diffs.push_back(ad::sub(dummy_grad[i], tape.constant(k == 1.0 ? true_grad[i] : k * true_grad[i])));
  }
  return ad::squared_norm_all(diffs);
}

Var objective_cosine(std::span<const Var> dummy_grad, std::span<const Tensor> true_grad,
                     double beta_tv, const Var& dummy_x) {
  require_aligned(dummy_grad, true_grad, "cosine");
  ad::Tape& tape = dummy_grad[0].tape();
  Var inner;
  for (std::size_t i = 0; i < dummy_grad.size(); ++i) {
    Var term = ad::sum(ad::mul(dummy_grad[i], tape.constant(true_grad[i])));
    inner = inner.valid() ? ad::add(inner, term) : term;
  }
  const double target_norm = global_norm(true_grad);
  Var denom = guarded(ad::scale(ad::frobenius_norm_all(dummy_grad), target_norm));
  Var cos = ad::mul(inner, ad::reciprocal(denom));
  return with_tv(ad::add_scalar(ad::neg(cos), 1.0), beta_tv, dummy_x);
}

Var objective_dlm(std::span<const Var> dummy_grad, std::span<const Tensor> before,
                  std::span<const Tensor> after, const Var& gamma) {
  const std::vector<Tensor> delta = difference(before, after);
  require_aligned(dummy_grad, delta, "dlm");
  ad::Tape& tape = dummy_grad[0].tape();
  std::vector<Var> diffs;
  for (std::size_t i = 0; i < dummy_grad.size(); ++i) {
    diffs.push_back(ad::sub(dummy_grad[i], ad::mul_scalar(tape.constant(delta[i]), gamma)));
  }
  return ad::squared_norm_all(diffs);
}

Var objective_dlm_plus(std::span<const Var> dummy_grad, std::span<const Tensor> before,
                       std::span<const Tensor> after, double beta_tv, const Var& dummy_x,
                       NormScope scope) {
  std::vector<Tensor> delta = difference(before, after);
  require_aligned(dummy_grad, delta, "dlm-plus");
  if (global_norm(delta) == 0.0) {
    throw DegenerateError("dlm-plus: transmitted weights equal the global weights");
  }
  ad::Tape& tape = dummy_grad[0].tape();
  std::vector<Var> diffs;
  if (scope == NormScope::kGlobal) {
    const double inv_delta = 1.0 / std::max(global_norm(delta), kNormEpsilon);
    Var inv_dummy = ad::reciprocal(guarded(ad::frobenius_norm_all(dummy_grad)));
    for (std::size_t i = 0; i < dummy_grad.size(); ++i) {
      diffs.push_back(ad::sub(ad::mul_scalar(dummy_grad[i], inv_dummy),
                              tape.constant(inv_delta * delta[i])));
    }
  } else {
    for (std::size_t i = 0; i < dummy_grad.size(); ++i) {
      const double inv_delta = 1.0 / std::max(delta[i].norm(), kNormEpsilon);
      const Var layer[] = {dummy_grad[i]};
      Var inv_dummy = ad::reciprocal(guarded(ad::frobenius_norm_all(layer)));
      diffs.push_back(ad::sub(ad::mul_scalar(dummy_grad[i], inv_dummy),
                              tape.constant(inv_delta * delta[i])));
    }
  }
  return with_tv(ad::squared_norm_all(diffs), beta_tv, dummy_x);
}

double estimate_alpha(std::span<const Tensor> dummy_grad, std::span<const Tensor> before,
                      std::span<const Tensor> after) {
  const double g = global_norm(dummy_grad);
  if (g == 0.0) throw DegenerateError("estimate_alpha: dummy gradient is zero");
  return global_norm(difference(before, after)) / g;
}

std::vector<Var> dummy_gradient(const ModelSpec& spec, std::span<const Var> weights,
                                const Var& dummy_x, const Var& dummy_y) {
  Var loss = ad::cross_entropy_soft(forward(spec, weights, dummy_x), dummy_y);
  return gradients(loss, weights, /*retain_graph=*/true).grads;
}

Var attack_objective(const ObjectiveConfig& cfg, const AttackView& view,
                     std::span<const Var> dummy_grad, const Var& dummy_x,
                     const std::optional<Var>& gamma) {
  const auto before = view.global_before.tensors();
  const auto payload = view.payload.tensors();
  switch (cfg.kind) {
    case ObjectiveKind::kDlg: return objective_dlg(dummy_grad, payload);
    case ObjectiveKind::kDlgK: return objective_dlg_k(dummy_grad, payload, cfg.k);
    case ObjectiveKind::kCosine: return objective_cosine(dummy_grad, payload, cfg.beta_tv, dummy_x);
    case ObjectiveKind::kDlm:
      if (!gamma) throw ContractError("dlm: missing tuning factor");
      return objective_dlm(dummy_grad, before, payload, *gamma);
    case ObjectiveKind::kDlmPlus:
      return objective_dlm_plus(dummy_grad, before, payload, 0.0, dummy_x, cfg.norm_scope);
    case ObjectiveKind::kDlmPlusTv:
      return objective_dlm_plus(dummy_grad, before, payload, cfg.beta_tv, dummy_x, cfg.norm_scope);
  }
  throw ContractError("unhandled objective");
}

AttackResult run_attack(const AttackView& view, const ModelSpec& spec, const AttackConfig& cfg,
                        const GroundTruth* truth) {
  cfg.validate();
  const ObjectiveKind kind = cfg.objective.kind;
  if (uses_weights(kind) && view.kind != PayloadKind::kWeights) {
    throw ContractError(objective_name(kind) + " requires weights mode, got a " +
                        payload_kind_name(view.kind) + " payload");
  }
  if (!uses_weights(kind) && view.kind != PayloadKind::kGradients) {
    throw ContractError(objective_name(kind) + " requires gradients mode, got a " +
                        payload_kind_name(view.kind) + " payload");
  }
  if (view.global_before.fingerprint() != spec.fingerprint() ||
      view.payload.fingerprint() != spec.fingerprint()) {
    throw ContractError("run_attack: wiretap weights were not built for model " + spec.name());
  }
  if (kind == ObjectiveKind::kDlmPlus || kind == ObjectiveKind::kDlmPlusTv) {
    if ((view.global_before - view.payload).frobenius_norm() == 0.0) {
      throw DegenerateError("dlm-plus: transmitted weights equal the global weights");
    }
  }
  const std::size_t batch = cfg.batch_size;
  if (truth != nullptr && truth->images.shape() != spec.batch_input_shape(batch)) {
    throw ContractError("run_attack: ground truth shape " + shape_string(truth->images.shape()) +
                        " does not match batch " + shape_string(spec.batch_input_shape(batch)));
  }

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](Shape shape) {
    Tensor t(std::move(shape));
    for (double& v : t.mutable_data()) v = normal(rng);
    return t;
  };
  std::vector<Tensor> params;
  params.push_back(draw(spec.batch_input_shape(batch)));
  params.push_back(draw({batch, spec.num_classes()}));
  const bool has_gamma = kind == ObjectiveKind::kDlm;
  if (has_gamma) params.push_back(Tensor::scalar(cfg.objective.gamma0));

  auto evaluate = [&](const std::vector<Tensor>& p, std::vector<Tensor>* dummy_out) {
    ad::Tape tape;
    const std::vector<Var> weights = weight_variables(tape, view.global_before);
    std::vector<Var> wrt = {tape.variable(p[0]), tape.variable(p[1])};
    std::optional<Var> gamma;
    if (has_gamma) {
      gamma = tape.variable(p[2]);
      wrt.push_back(*gamma);
    }
    const std::vector<Var> g = dummy_gradient(spec, weights, wrt[0], wrt[1]);
    const Var objective = attack_objective(cfg.objective, view, g, wrt[0], gamma);
    if (dummy_out != nullptr) {
      dummy_out->clear();
      for (const Var& v : g) dummy_out->push_back(v.value());
    }
    Evaluation ev;
    ev.loss = objective.value().item();
    if (std::isfinite(ev.loss)) ev.grads = gradients(objective, wrt, false).tensors();
    return ev;
  };
  const Closure closure = [&](const std::vector<Tensor>& p) { return evaluate(p, nullptr); };

  AttackResult result;
  auto score = [&](const Tensor& x) { return psnr(clamp(x, 0.0, 1.0), truth->images); };
  const bool trace_psnr = truth != nullptr && cfg.psnr_every > 0;

  std::optional<Adam> adam;
  std::optional<Lbfgs> lbfgs;
  if (cfg.optimizer.kind == OptimizerKind::kAdam) {
    adam.emplace(AdamOptions{.lr = cfg.optimizer.lr});
  } else {
    lbfgs.emplace(LbfgsOptions{.lr = cfg.optimizer.lr,
                               .history = cfg.optimizer.history,
                               .max_iter = cfg.optimizer.max_iter,
                               .backtracking = cfg.optimizer.backtracking});
  }

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const Evaluation ev = adam ? closure(params) : lbfgs->step(params, closure);
    if (!std::isfinite(ev.loss)) {
      throw DivergedError("attack objective became non-finite", it);
    }
    result.loss_trace.push_back(ev.loss);
    result.iterations_used = it + 1;
    const bool done = ev.loss < cfg.stop_loss;
    if (adam && !done) adam->step(params, ev.grads);
    for (const Tensor& p : params) {
      if (!p.all_finite()) throw DivergedError("attack state became non-finite", it);
    }
    if (trace_psnr && (it % cfg.psnr_every == 0 || done)) result.psnr_trace.push_back(score(params[0]));
    if (done) break;
  }

  std::vector<Tensor> final_dummy;
  const Evaluation final_ev = evaluate(params, &final_dummy);
  result.final_loss = final_ev.loss;
  result.recovered = clamp(params[0], 0.0, 1.0);
  result.labels = row_argmax(params[1]);
  if (has_gamma) result.gamma = params[2].item();
  if (uses_weights(kind) && global_norm(final_dummy) > 0.0) {
    result.alpha_estimate =
        estimate_alpha(final_dummy, view.global_before.tensors(), view.payload.tensors());
  }

  if (truth != nullptr) {
    result.evaluated = true;
    const Shape& s = truth->images.shape();
    const SsimWindow window = fitted_ssim_window(s[2], s[3]);
    std::vector<std::size_t> match(batch);
    if (batch == 1) {
      result.per_image_psnr = {psnr(result.recovered, truth->images)};
    } else {
      const Assignment a = best_assignment(result.recovered, truth->images);
      match = a.truth_for_recovered;
      result.per_image_psnr = a.psnr;
    }
    double ssim_total = 0.0;
    bool all_pass = true;
    for (std::size_t b = 0; b < batch; ++b) {
      const Tensor rec = slice_leading(result.recovered, b, 1);
      const Tensor tru = slice_leading(truth->images, match[b], 1);
      ssim_total += ssim(rec, tru, window);
      all_pass = all_pass && result.per_image_psnr[b] > cfg.success_threshold_db;
      if (match[b] < truth->labels.size() && truth->labels[match[b]] == result.labels[b]) {
        ++result.labels_correct;
      }
    }
    double psnr_total = 0.0;
    for (double p : result.per_image_psnr) psnr_total += p;
    result.psnr = psnr_total / static_cast<double>(batch);
    result.ssim = ssim_total / static_cast<double>(batch);
    result.success = all_pass;
  }
  return result;
}

}  // namespace weightleak
