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

#include "weightleak/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "weightleak/errors.h"

namespace weightleak {
namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ContractError(std::string(op) + ": image shapes differ " + shape_string(a.shape()) +
                        " vs " + shape_string(b.shape()));
  }
}

std::vector<double> gaussian_kernel(const SsimWindow& window) {
  std::vector<double> k(window.size);
  const double centre = static_cast<double>(window.size - 1) / 2.0;
  double total = 0.0;
  for (std::size_t i = 0; i < window.size; ++i) {
    const double d = static_cast<double>(i) - centre;
    k[i] = std::exp(-d * d / (2.0 * window.sigma * window.sigma));
    total += k[i];
  }
  for (double& v : k) v /= total;
  return k;
}

// Valid-mode separable filtering of one h x w plane.
std::vector<double> filter_valid(const double* plane, std::size_t h, std::size_t w,
                                 const std::vector<double>& k) {
  const std::size_t n = k.size(), oh = h - n + 1, ow = w - n + 1;
  std::vector<double> rows(h * ow, 0.0);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += k[i] * plane[y * w + x + i];
      rows[y * ow + x] = s;
    }
  }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += k[i] * rows[(y + i) * ow + x];
      out[y * ow + x] = s;
    }
  }
  return out;
}

double ssim_plane(const double* a, const double* b, std::size_t h, std::size_t w,
                  const std::vector<double>& k, double c1, double c2) {
  std::vector<double> aa(h * w), bb(h * w), ab(h * w);
  for (std::size_t i = 0; i < h * w; ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto mu_a = filter_valid(a, h, w, k);
  const auto mu_b = filter_valid(b, h, w, k);
  const auto e_aa = filter_valid(aa.data(), h, w, k);
  const auto e_bb = filter_valid(bb.data(), h, w, k);
  const auto e_ab = filter_valid(ab.data(), h, w, k);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double va = e_aa[i] - mu_a[i] * mu_a[i];
    const double vb = e_bb[i] - mu_b[i] * mu_b[i];
    const double cov = e_ab[i] - mu_a[i] * mu_b[i];
    total += ((2 * mu_a[i] * mu_b[i] + c1) * (2 * cov + c2)) /
             ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

}  // namespace

double mean_squared_error(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

double psnr_from_mse(double mse, double peak) {
  if (mse <= 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(peak * peak / mse));
}

double psnr(const Tensor& a, const Tensor& b, double peak) {
  if (!(peak > 0.0)) throw ArgumentError("psnr: peak must be > 0");
  return psnr_from_mse(mean_squared_error(a, b), peak);
}

SsimWindow fitted_ssim_window(std::size_t h, std::size_t w) {
  std::size_t size = std::min<std::size_t>({11, h, w});
  if (size % 2 == 0) --size;
  return {std::max<std::size_t>(size, 1), 1.5};
}

double ssim(const Tensor& a, const Tensor& b, SsimWindow window, double peak) {
  require_same_shape(a, b, "ssim");
  if (a.rank() < 2) throw ArgumentError("ssim: images need at least two dimensions");
  const std::size_t h = a.dim(a.rank() - 2), w = a.dim(a.rank() - 1);
  if (window.size == 0 || h < window.size || w < window.size) {
    throw ArgumentError("ssim: " + std::to_string(h) + "x" + std::to_string(w) +
                        " image is smaller than the " + std::to_string(window.size) + "-pixel window");
  }
  const auto k = gaussian_kernel(window);
  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);
  const std::size_t planes = a.size() / (h * w);
  double total = 0.0;
  for (std::size_t p = 0; p < planes; ++p) {
    total += ssim_plane(&a.data()[p * h * w], &b.data()[p * h * w], h, w, k, c1, c2);
  }
  return total / static_cast<double>(planes);
}

Assignment best_assignment(const Tensor& recovered, const Tensor& truth, double peak) {
  require_same_shape(recovered, truth, "best_assignment");
  const std::size_t batch = recovered.dim(0);
  if (batch > 8) throw ArgumentError("best_assignment: exhaustive matching supports B <= 8");
  std::vector<std::vector<double>> table(batch, std::vector<double>(batch));
  for (std::size_t r = 0; r < batch; ++r) {
    const Tensor rec = slice_leading(recovered, r, 1);
    for (std::size_t t = 0; t < batch; ++t) table[r][t] = psnr(rec, slice_leading(truth, t, 1), peak);
  }
  std::vector<std::size_t> perm(batch);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Assignment best;
  double best_total = -1.0;
  do {
    double total = 0.0;
    for (std::size_t r = 0; r < batch; ++r) total += table[r][perm[r]];
    if (total > best_total) {
      best_total = total;
      best.truth_for_recovered = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  for (std::size_t r = 0; r < batch; ++r) best.psnr.push_back(table[r][best.truth_for_recovered[r]]);
  return best;
}

SuccessSummary success_rate(std::span<const TrialScore> trials, double threshold_db) {
  if (trials.empty()) throw ArgumentError("success_rate: no trials");
  SuccessSummary s;
  s.n_trials = trials.size();
  std::size_t hits = 0;
  for (const TrialScore& t : trials) {
    if (t.psnr > threshold_db) ++hits;
    s.mean_psnr += t.psnr;
    s.mean_ssim += t.ssim;
  }
  const double n = static_cast<double>(trials.size());
  s.acc = static_cast<double>(hits) / n;
  s.mean_psnr /= n;
  s.mean_ssim /= n;
  return s;
}

}  // namespace weightleak
