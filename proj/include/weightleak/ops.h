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

// Differentiable tensor ops. All inputs must live on the same Tape.

#ifndef WEIGHTLEAK_OPS_H_
#define WEIGHTLEAK_OPS_H_

#include <cstddef>
#include <optional>
#include <span>

#include "weightleak/autodiff.h"

namespace weightleak::ad {

// Elementwise, equal shapes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
Var reciprocal(const Var& a);
Var sqrt(const Var& a);
Var abs(const Var& a);
Var sigmoid(const Var& a);
Var relu(const Var& a);

// a * s for a rank-0 `s`.
Var mul_scalar(const Var& a, const Var& s);
// Sum of all elements, rank-0 result.
Var sum(const Var& a);
Var reshape(const Var& a, Shape shape);

// [m,k] x [k,n] -> [m,n]
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

// [B,n] -> [n] (sum over rows) and its adjoint [n] -> [B,n].
Var sum_rows(const Var& a);
Var broadcast_rows(const Var& v, std::size_t rows);
// [B,n] -> [B] (sum over columns) and its adjoint [B] -> [B,n].
Var row_sum(const Var& a);
Var broadcast_cols(const Var& v, std::size_t cols);

// Row-wise on [B,n].
Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);

struct Conv2dParams {
  std::size_t pad = 0;
  std::size_t stride = 1;
};

// input [B,Cin,H,W], kernel [Cout,Cin,kH,kW] -> [B,Cout,Ho,Wo]
Var conv2d(const Var& input, const Var& kernel, Conv2dParams params);
// Adjoint of conv2d with respect to the input, for a given output gradient.
Var conv2d_input_grad(const Var& grad_out, const Var& kernel, const Shape& input_shape,
                      Conv2dParams params);
// Adjoint of conv2d with respect to the kernel.
Var conv2d_kernel_grad(const Var& input, const Var& grad_out, const Shape& kernel_shape,
                       Conv2dParams params);
// Adds a per-channel bias [C] to [B,C,H,W].
Var add_channel_bias(const Var& input, const Var& bias);
// [B,C,H,W] -> [C], the adjoint of add_channel_bias's broadcast.
Var sum_channels(const Var& a);
Var broadcast_channels(const Var& bias, const Shape& shape);

// Vertical / horizontal forward differences on [B,C,H,W] and their adjoints.
Var diff_h(const Var& image);
Var diff_h_adjoint(const Var& d, const Shape& image_shape);
Var diff_w(const Var& image);
Var diff_w_adjoint(const Var& d, const Shape& image_shape);

// ---- composite layers and losses ----

// input [B,n_in] . weight [n_in,n_out] (+ bias [n_out])
Var affine(const Var& input, const Var& weight, const std::optional<Var>& bias = std::nullopt);

// Mean over the batch of -sum_j softmax(label_logits)_j * log softmax(logits)_j.
Var cross_entropy_soft(const Var& logits, const Var& label_logits);
// Same with explicit target probabilities (rows sum to one).
Var cross_entropy_probs(const Var& logits, const Var& target_probs);

Var squared_norm_all(std::span<const Var> tensors);
// Norm of the concatenation of all tensors.
Var frobenius_norm_all(std::span<const Var> tensors);

// Anisotropic TV: sum of |vertical| + |horizontal| neighbour differences.
Var total_variation(const Var& image);

}  // namespace weightleak::ad

#endif  // WEIGHTLEAK_OPS_H_
