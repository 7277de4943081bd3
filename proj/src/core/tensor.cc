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

#include "weightleak/tensor.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "weightleak/errors.h"

namespace weightleak {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {
  for (std::size_t d : shape_) {
    if (d == 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape_));
  }
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (std::size_t d : shape_) {
    if (d == 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape_));
  }
  if (shape_size(shape_) != data_.size()) {
    throw DimensionError("shape " + shape_string(shape_) + " needs " +
                         std::to_string(shape_size(shape_)) + " values, got " +
                         std::to_string(data_.size()));
  }
}

Tensor Tensor::filled(Shape shape, double value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

Tensor Tensor::from_external(Shape shape, std::vector<double> data) {
  Tensor t(std::move(shape), std::move(data));
  if (!t.all_finite()) throw ArgumentError("tensor input contains NaN or Inf");
  return t;
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw DimensionError("item() needs a single-element tensor, got " + shape_string(shape_));
  }
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::squared_norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return s;
}

double Tensor::norm() const { return std::sqrt(squared_norm()); }

namespace {
void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}
}  // namespace

Tensor operator+(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

Tensor operator*(double c, const Tensor& a) {
  Tensor out = a;
  for (double& v : out.mutable_data()) v *= c;
  return out;
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  Tensor out = a;
  for (double& v : out.mutable_data()) v = std::clamp(v, lo, hi);
  return out;
}

Tensor slice_leading(const Tensor& a, std::size_t first, std::size_t count) {
  if (a.rank() == 0 || first + count > a.dim(0) || count == 0) {
    throw DimensionError("slice_leading: range [" + std::to_string(first) + ", " +
                         std::to_string(first + count) + ") outside " + shape_string(a.shape()));
  }
  Shape shape = a.shape();
  const std::size_t stride = a.size() / shape[0];
  shape[0] = count;
  auto begin = a.values().begin() + static_cast<std::ptrdiff_t>(first * stride);
  return Tensor(std::move(shape),
                std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(count * stride)));
}

Tensor stack_leading(std::span<const Tensor> parts) {
  if (parts.empty()) throw ArgumentError("stack_leading: no tensors");
  Shape shape = parts.front().shape();
  if (shape.empty()) throw DimensionError("stack_leading: rank-0 tensors");
  std::vector<double> data;
  std::size_t lead = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != shape.size() ||
        !std::equal(shape.begin() + 1, shape.end(), p.shape().begin() + 1)) {
      throw DimensionError("stack_leading: trailing shapes differ " + shape_string(shape) +
                           " vs " + shape_string(p.shape()));
    }
    lead += p.dim(0);
    data.insert(data.end(), p.values().begin(), p.values().end());
  }
  shape[0] = lead;
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace weightleak
