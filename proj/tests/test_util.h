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

// Test-only oracles: finite differences and random inputs.

#ifndef WEIGHTLEAK_TESTS_TEST_UTIL_H_
#define WEIGHTLEAK_TESTS_TEST_UTIL_H_

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "weightleak/tensor.h"

namespace weightleak::testing {

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(shape);
  for (double& v : t.mutable_data()) v = dist(rng);
  return t;
}

// Values with |v| >= margin, for ops with a kink at zero.
inline Tensor random_away_from_zero(const Shape& shape, std::mt19937_64& rng, double margin = 0.05) {
  Tensor t = random_tensor(shape, rng);
  for (double& v : t.mutable_data()) {
    if (std::abs(v) < margin) v = v < 0 ? v - margin : v + margin;
  }
  return t;
}

// Central differences of a scalar function.
inline Tensor finite_difference(const std::function<double(const Tensor&)>& f, const Tensor& x,
                                double step = 1e-5) {
  Tensor grad(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + step;
    const double up = f(probe);
    probe[i] = orig - step;
    const double down = f(probe);
    probe[i] = orig;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

inline double relative_error(const Tensor& got, const Tensor& want) {
  double diff = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) diff += (got[i] - want[i]) * (got[i] - want[i]);
  return std::sqrt(diff) / std::max(want.norm(), 1e-12);
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Straight 2-D window SSIM over [C,H,W]; no separable filtering.
inline double reference_ssim(const Tensor& a, const Tensor& b, std::size_t size, double sigma) {
  const std::size_t c = a.shape()[0], h = a.shape()[1], w = a.shape()[2];
  std::vector<double> k(size * size);
  const double half = static_cast<double>(size - 1) / 2.0;
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t j = 0; j < size; ++j) {
      const double di = static_cast<double>(i) - half, dj = static_cast<double>(j) - half;
      k[i * size + j] = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
      total += k[i * size + j];
    }
  }
  for (double& v : k) v /= total;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t r = 0; r + size <= h; ++r) {
      for (std::size_t s = 0; s + size <= w; ++s) {
        double ma = 0, mb = 0, aa = 0, bb = 0, ab = 0;
        for (std::size_t i = 0; i < size; ++i) {
          for (std::size_t j = 0; j < size; ++j) {
            const std::size_t at = (ch * h + r + i) * w + s + j;
            const double wt = k[i * size + j];
            ma += wt * a[at];
            mb += wt * b[at];
            aa += wt * a[at] * a[at];
            bb += wt * b[at] * b[at];
            ab += wt * a[at] * b[at];
          }
        }
        const double va = aa - ma * ma, vb = bb - mb * mb, cov = ab - ma * mb;
        sum += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
    }
  }
  return sum / static_cast<double>(count);
}

}  // namespace weightleak::testing

#endif  // WEIGHTLEAK_TESTS_TEST_UTIL_H_
