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

#include "weightleak/models.h"

#include <cmath>
#include <random>

#include "weightleak/errors.h"
#include "weightleak/ops.h"

namespace weightleak {
namespace {

const char* kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::kAffine: return "affine";
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kSigmoid: return "sigmoid";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kFlatten: return "flatten";
  }
  return "?";
}

std::string layer_label(std::size_t index, LayerKind kind) {
  return "layer " + std::to_string(index + 1) + " (" + kind_name(kind) + ")";
}

// FNV-1a
class Fingerprint {
 public:
  void mix(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      hash_ ^= (v >> (8 * i)) & 0xff;
      hash_ *= 0x100000001b3ULL;
    }
  }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

LayerSpec affine_layer(std::size_t in, std::size_t out, bool bias) {
  LayerSpec l;
  l.kind = LayerKind::kAffine;
  l.in_features = in;
  l.out_features = out;
  l.use_bias = bias;
  return l;
}

LayerSpec conv_layer(std::size_t in, std::size_t out, std::size_t k, std::size_t pad,
                     std::size_t stride, bool bias) {
  LayerSpec l;
  l.kind = LayerKind::kConv2d;
  l.in_channels = in;
  l.out_channels = out;
  l.kernel = k;
  l.pad = pad;
  l.stride = stride;
  l.use_bias = bias;
  return l;
}

LayerSpec plain_layer(LayerKind kind) {
  LayerSpec l;
  l.kind = kind;
  return l;
}

}  // namespace

ModelSpec::ModelSpec(std::string name, ImageShape input_shape, std::size_t num_classes,
                     std::vector<LayerSpec> layers)
    : name_(std::move(name)),
      input_shape_(input_shape),
      num_classes_(num_classes),
      layers_(std::move(layers)) {
  if (num_classes_ == 0) throw ArgumentError("model needs at least one class");
  for (std::size_t d : input_shape_) {
    if (d == 0) throw DimensionError("model input extents must be positive");
  }
  Fingerprint fp;
  fp.mix(input_shape_[0]);
  fp.mix(input_shape_[1]);
  fp.mix(input_shape_[2]);
  fp.mix(num_classes_);

  Shape current{input_shape_[0], input_shape_[1], input_shape_[2]};
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& l = layers_[i];
    fp.mix(static_cast<std::uint64_t>(l.kind));
    switch (l.kind) {
      case LayerKind::kFlatten:
        current = {shape_size(current)};
        break;
      case LayerKind::kSigmoid:
      case LayerKind::kRelu:
        break;
      case LayerKind::kAffine: {
        if (current.size() != 1 || current[0] != l.in_features || l.out_features == 0) {
          throw DimensionError(layer_label(i, l.kind) + ": expects [" +
                               std::to_string(l.in_features) + "] input, got " +
                               shape_string(current));
        }
        parameter_shapes_.push_back({l.in_features, l.out_features});
        fan_in_.push_back(l.in_features);
        if (l.use_bias) {
          parameter_shapes_.push_back({l.out_features});
          fan_in_.push_back(l.in_features);
        }
        current = {l.out_features};
        fp.mix(l.in_features);
        fp.mix(l.out_features);
        fp.mix(l.use_bias);
        break;
      }
      case LayerKind::kConv2d: {
        if (current.size() != 3 || current[0] != l.in_channels) {
          throw DimensionError(layer_label(i, l.kind) + ": expects " +
                               std::to_string(l.in_channels) + " input channels, got " +
                               shape_string(current));
        }
        if (l.stride == 0 || l.kernel == 0 || l.out_channels == 0) {
          throw ArgumentError(layer_label(i, l.kind) + ": kernel, stride and channels must be positive");
        }
        if (current[1] + 2 * l.pad < l.kernel || current[2] + 2 * l.pad < l.kernel) {
          throw DimensionError(layer_label(i, l.kind) + ": input " + shape_string(current) +
                               " too small for a " + std::to_string(l.kernel) + "x" +
                               std::to_string(l.kernel) + " kernel with pad " +
                               std::to_string(l.pad));
        }
        const std::size_t h = (current[1] + 2 * l.pad - l.kernel) / l.stride + 1;
        const std::size_t w = (current[2] + 2 * l.pad - l.kernel) / l.stride + 1;
        parameter_shapes_.push_back({l.out_channels, l.in_channels, l.kernel, l.kernel});
        fan_in_.push_back(l.in_channels * l.kernel * l.kernel);
        if (l.use_bias) {
          parameter_shapes_.push_back({l.out_channels});
          fan_in_.push_back(l.in_channels * l.kernel * l.kernel);
        }
        current = {l.out_channels, h, w};
        for (std::size_t v : {l.in_channels, l.out_channels, l.kernel, l.pad, l.stride}) fp.mix(v);
        fp.mix(l.use_bias);
        break;
      }
    }
    activation_shapes_.push_back(current);
  }
  if (current != Shape{num_classes_}) {
    throw DimensionError("model '" + name_ + "' ends in " + shape_string(current) +
                         ", expected [" + std::to_string(num_classes_) + "]");
  }
  fingerprint_ = fp.value();
}

std::size_t ModelSpec::parameter_count() const {
  std::size_t n = 0;
  for (const Shape& s : parameter_shapes_) n += shape_size(s);
  return n;
}

ModelSpec build_mlp(ImageShape input_shape, std::size_t hidden, std::size_t num_classes,
                    bool use_bias) {
  if (hidden == 0) throw ArgumentError("build_mlp: hidden width must be >= 1");
  const std::size_t in = input_shape[0] * input_shape[1] * input_shape[2];
  return ModelSpec("mlp", input_shape, num_classes,
                   {plain_layer(LayerKind::kFlatten), affine_layer(in, hidden, use_bias),
                    plain_layer(LayerKind::kRelu), affine_layer(hidden, num_classes, use_bias)});
}

ModelSpec build_lenet(ImageShape input_shape, std::size_t num_classes, bool use_bias) {
  const std::size_t c = input_shape[0];
  auto out_extent = [](std::size_t x, std::size_t pad, std::size_t stride) {
    return (x + 2 * pad - 5) / stride + 1;
  };
  std::vector<LayerSpec> layers{
      conv_layer(c, 12, 5, 2, 2, use_bias),  plain_layer(LayerKind::kSigmoid),
      conv_layer(12, 12, 5, 2, 2, use_bias), plain_layer(LayerKind::kSigmoid),
      conv_layer(12, 12, 5, 2, 1, use_bias), plain_layer(LayerKind::kSigmoid),
      plain_layer(LayerKind::kFlatten)};
  // Work out the head's fan-in; the ModelSpec constructor re-validates.
  std::size_t h = input_shape[1], w = input_shape[2];
  const std::size_t pads_strides[3][2] = {{2, 2}, {2, 2}, {2, 1}};
  for (int i = 0; i < 3; ++i) {
    if (h + 2 * pads_strides[i][0] < 5 || w + 2 * pads_strides[i][0] < 5) {
      throw DimensionError(layer_label(static_cast<std::size_t>(2 * i), LayerKind::kConv2d) +
                           ": input " + std::to_string(h) + "x" + std::to_string(w) +
                           " too small for a 5x5 kernel");
    }
    h = out_extent(h, pads_strides[i][0], pads_strides[i][1]);
    w = out_extent(w, pads_strides[i][0], pads_strides[i][1]);
  }
  layers.push_back(affine_layer(12 * h * w, num_classes, use_bias));
  return ModelSpec("lenet", input_shape, num_classes, std::move(layers));
}

std::vector<std::string> model_preset_names() {
  return {"paper-mlp", "paper-lenet", "tiny-mlp", "tiny-lenet"};
}

ModelSpec model_preset(const std::string& name, std::size_t num_classes) {
  auto classes = [num_classes](std::size_t fallback) {
    return num_classes == 0 ? fallback : num_classes;
  };
  ModelSpec spec = [&]() {
    if (name == "paper-mlp") return build_mlp({3, 224, 224}, 32, classes(200));
    if (name == "paper-lenet") return build_lenet({3, 224, 224}, classes(200));
    // Biases on the tiny MLP: a biasless ReLU net is positively homogeneous in
    // its input, which leaves the input scale unidentifiable from gradients.
    if (name == "tiny-mlp") return build_mlp({3, 8, 8}, 32, classes(10), /*use_bias=*/true);
    if (name == "tiny-lenet") return build_lenet({3, 16, 16}, classes(10));
    throw ConfigError("unknown model preset '" + name + "'");
  }();
  return ModelSpec(name, spec.input_shape(), spec.num_classes(), spec.layers());
}

ModelWeights ModelWeights::for_spec(const ModelSpec& spec, std::vector<Tensor> tensors) {
  const auto& shapes = spec.parameter_shapes();
  if (tensors.size() != shapes.size()) {
    throw ContractError("model '" + spec.name() + "' has " + std::to_string(shapes.size()) +
                        " parameter tensors, got " + std::to_string(tensors.size()));
  }
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (tensors[i].shape() != shapes[i]) {
      throw ContractError("parameter " + std::to_string(i) + " of model '" + spec.name() +
                          "' must be " + shape_string(shapes[i]) + ", got " +
                          shape_string(tensors[i].shape()));
    }
  }
  return ModelWeights(std::move(tensors), spec.fingerprint());
}

ModelWeights ModelWeights::zeros(const ModelSpec& spec) {
  std::vector<Tensor> tensors;
  for (const Shape& s : spec.parameter_shapes()) tensors.emplace_back(s);
  return ModelWeights(std::move(tensors), spec.fingerprint());
}

ModelWeights ModelWeights::unflatten(const ModelSpec& spec, std::span<const double> flat) {
  if (flat.size() != spec.parameter_count()) {
    throw ContractError("unflatten: model '" + spec.name() + "' has " +
                        std::to_string(spec.parameter_count()) + " parameters, got " +
                        std::to_string(flat.size()));
  }
  std::vector<Tensor> tensors;
  std::size_t offset = 0;
  for (const Shape& s : spec.parameter_shapes()) {
    const std::size_t n = shape_size(s);
    tensors.emplace_back(s, std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(offset),
                                                flat.begin() + static_cast<std::ptrdiff_t>(offset + n)));
    offset += n;
  }
  return ModelWeights(std::move(tensors), spec.fingerprint());
}

std::vector<double> ModelWeights::flatten() const {
  std::vector<double> flat;
  flat.reserve(element_count());
  for (const Tensor& t : tensors_) flat.insert(flat.end(), t.values().begin(), t.values().end());
  return flat;
}

std::size_t ModelWeights::element_count() const {
  std::size_t n = 0;
  for (const Tensor& t : tensors_) n += t.size();
  return n;
}

double ModelWeights::frobenius_norm() const {
  double s = 0.0;
  for (const Tensor& t : tensors_) s += t.squared_norm();
  return std::sqrt(s);
}

bool ModelWeights::all_finite() const {
  for (const Tensor& t : tensors_) {
    if (!t.all_finite()) return false;
  }
  return true;
}

void require_same_layout(const ModelWeights& a, const ModelWeights& b, const char* what) {
  if (a.size() != b.size()) {
    throw ContractError(std::string(what) + ": tensor counts differ (" + std::to_string(a.size()) +
                        " vs " + std::to_string(b.size()) + ")");
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].shape() != b[i].shape()) {
      throw ContractError(std::string(what) + ": tensor " + std::to_string(i) + " shape " +
                          shape_string(a[i].shape()) + " vs " + shape_string(b[i].shape()));
    }
  }
}

ModelWeights operator-(const ModelWeights& a, const ModelWeights& b) {
  require_same_layout(a, b, "weights subtraction");
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < a.size(); ++i) out.push_back(a[i] - b[i]);
  return ModelWeights(std::move(out), a.fingerprint());
}

ModelWeights operator+(const ModelWeights& a, const ModelWeights& b) {
  require_same_layout(a, b, "weights addition");
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < a.size(); ++i) out.push_back(a[i] + b[i]);
  return ModelWeights(std::move(out), a.fingerprint());
}

ModelWeights operator*(double c, const ModelWeights& a) {
  std::vector<Tensor> out;
  for (const Tensor& t : a.tensors()) out.push_back(c * t);
  return ModelWeights(std::move(out), a.fingerprint());
}

ModelWeights init_weights(const ModelSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Tensor> tensors;
  const auto& shapes = spec.parameter_shapes();
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(spec.parameter_fan_in()[i]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t(shapes[i]);
    for (double& v : t.mutable_data()) v = dist(rng);
    tensors.push_back(std::move(t));
  }
  return ModelWeights(std::move(tensors), spec.fingerprint());
}

ad::Var forward(const ModelSpec& spec, std::span<const ad::Var> params, const ad::Var& x) {
  if (params.size() != spec.parameter_shapes().size()) {
    throw ContractError("forward: expected " + std::to_string(spec.parameter_shapes().size()) +
                        " parameter tensors, got " + std::to_string(params.size()));
  }
  const Shape& xs = x.shape();
  const ImageShape& in = spec.input_shape();
  if (xs.size() != 4 || xs[1] != in[0] || xs[2] != in[1] || xs[3] != in[2]) {
    throw DimensionError("forward: input " + shape_string(xs) + " does not match model input [B," +
                         std::to_string(in[0]) + "," + std::to_string(in[1]) + "," +
                         std::to_string(in[2]) + "]");
  }
  const std::size_t batch = xs[0];
  ad::Var h = x;
  std::size_t p = 0;
  for (const LayerSpec& l : spec.layers()) {
    switch (l.kind) {
      case LayerKind::kFlatten:
        h = ad::reshape(h, {batch, h.value().size() / batch});
        break;
      case LayerKind::kSigmoid:
        h = ad::sigmoid(h);
        break;
      case LayerKind::kRelu:
        h = ad::relu(h);
        break;
      case LayerKind::kAffine: {
        const ad::Var& w = params[p++];
        if (l.use_bias) {
          h = ad::affine(h, w, params[p++]);
        } else {
          h = ad::affine(h, w);
        }
        break;
      }
      case LayerKind::kConv2d: {
        h = ad::conv2d(h, params[p++], {l.pad, l.stride});
        if (l.use_bias) h = ad::add_channel_bias(h, params[p++]);
        break;
      }
    }
  }
  return h;
}

Tensor forward(const ModelSpec& spec, const ModelWeights& weights, const Tensor& x) {
  if (weights.fingerprint() != spec.fingerprint()) {
    throw ContractError("forward: weights were not built for model '" + spec.name() + "'");
  }
  ad::Tape tape;
  ad::NoGradGuard no_grad(tape);
  std::vector<ad::Var> params;
  for (const Tensor& t : weights.tensors()) params.push_back(tape.constant(t));
  return forward(spec, params, tape.constant(x)).value();
}

std::vector<ad::Var> weight_variables(ad::Tape& tape, const ModelWeights& weights) {
  std::vector<ad::Var> vars;
  vars.reserve(weights.size());
  for (const Tensor& t : weights.tensors()) vars.push_back(tape.variable(t));
  return vars;
}

}  // namespace weightleak
