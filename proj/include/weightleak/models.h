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

#ifndef WEIGHTLEAK_MODELS_H_
#define WEIGHTLEAK_MODELS_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "weightleak/autodiff.h"
#include "weightleak/tensor.h"

namespace weightleak {

enum class LayerKind { kAffine, kConv2d, kSigmoid, kRelu, kFlatten };

struct LayerSpec {
  LayerKind kind = LayerKind::kFlatten;
  // kAffine
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  // kConv2d
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::size_t pad = 0;
  std::size_t stride = 1;
  // kAffine and kConv2d
  bool use_bias = false;
};

// [C, H, W]
using ImageShape = std::array<std::size_t, 3>;

class ModelSpec {
 public:
  // Validates that the layers chain from `input_shape` to [num_classes].
  // Throws DimensionError naming the failing layer.
  ModelSpec(std::string name, ImageShape input_shape, std::size_t num_classes,
            std::vector<LayerSpec> layers);

  const std::string& name() const { return name_; }
  const ImageShape& input_shape() const { return input_shape_; }
  std::size_t num_classes() const { return num_classes_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }

  // Per-sample activation shape after each layer.
  const std::vector<Shape>& activation_shapes() const { return activation_shapes_; }
  // Shapes of the trainable tensors in order: for each parameterised layer,
  // its weight followed by its bias if enabled.
  const std::vector<Shape>& parameter_shapes() const { return parameter_shapes_; }
  std::size_t parameter_count() const;
  // Fan-in of each parameter tensor, aligned with parameter_shapes().
  const std::vector<std::size_t>& parameter_fan_in() const { return fan_in_; }
  std::uint64_t fingerprint() const { return fingerprint_; }

  Shape batch_input_shape(std::size_t batch) const {
    return {batch, input_shape_[0], input_shape_[1], input_shape_[2]};
  }

 private:
  std::string name_;
  ImageShape input_shape_;
  std::size_t num_classes_;
  std::vector<LayerSpec> layers_;
  std::vector<Shape> activation_shapes_;
  std::vector<Shape> parameter_shapes_;
  std::vector<std::size_t> fan_in_;
  std::uint64_t fingerprint_ = 0;
};

// Flatten -> Affine(in, hidden) -> ReLU -> Affine(hidden, classes)
ModelSpec build_mlp(ImageShape input_shape, std::size_t hidden, std::size_t num_classes,
                    bool use_bias = false);
// Three 5x5 conv + sigmoid blocks (pad 2 / stride 2, 2, 1), then an affine head.
ModelSpec build_lenet(ImageShape input_shape, std::size_t num_classes, bool use_bias = false);

// "paper-mlp", "paper-lenet", "tiny-mlp", "tiny-lenet". `num_classes` of 0
// keeps the preset default.
ModelSpec model_preset(const std::string& name, std::size_t num_classes = 0);
std::vector<std::string> model_preset_names();

class ModelWeights {
 public:
  ModelWeights() = default;
  ModelWeights(std::vector<Tensor> tensors, std::uint64_t fingerprint)
      : tensors_(std::move(tensors)), fingerprint_(fingerprint) {}

  // Checks the tensor count and shapes against `spec`.
  static ModelWeights for_spec(const ModelSpec& spec, std::vector<Tensor> tensors);
  static ModelWeights zeros(const ModelSpec& spec);
  static ModelWeights unflatten(const ModelSpec& spec, std::span<const double> flat);

  const std::vector<Tensor>& tensors() const { return tensors_; }
  std::vector<Tensor>& mutable_tensors() { return tensors_; }
  std::size_t size() const { return tensors_.size(); }
  const Tensor& operator[](std::size_t i) const { return tensors_[i]; }
  std::uint64_t fingerprint() const { return fingerprint_; }

  std::vector<double> flatten() const;
  std::size_t element_count() const;
  double frobenius_norm() const;
  bool all_finite() const;

  friend bool operator==(const ModelWeights&, const ModelWeights&) = default;

 private:
  std::vector<Tensor> tensors_;
  std::uint64_t fingerprint_ = 0;
};

// Shape-checked elementwise arithmetic over weight collections.
ModelWeights operator-(const ModelWeights& a, const ModelWeights& b);
ModelWeights operator+(const ModelWeights& a, const ModelWeights& b);
ModelWeights operator*(double c, const ModelWeights& a);

// Throws ContractError unless both collections have identical tensor shapes.
void require_same_layout(const ModelWeights& a, const ModelWeights& b, const char* what);

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), deterministic per (spec, seed).
ModelWeights init_weights(const ModelSpec& spec, std::uint64_t seed);

// Records the forward pass; `params` aligned with spec.parameter_shapes(),
// `x` of shape [B, C, H, W]. Returns logits [B, num_classes].
ad::Var forward(const ModelSpec& spec, std::span<const ad::Var> params, const ad::Var& x);
// Plain evaluation. Throws ContractError if `weights` was not built for `spec`.
Tensor forward(const ModelSpec& spec, const ModelWeights& weights, const Tensor& x);

// Puts every weight tensor on `tape` as a differentiable leaf.
std::vector<ad::Var> weight_variables(ad::Tape& tape, const ModelWeights& weights);

}  // namespace weightleak

#endif  // WEIGHTLEAK_MODELS_H_
