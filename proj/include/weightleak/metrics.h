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

#ifndef WEIGHTLEAK_METRICS_H_
#define WEIGHTLEAK_METRICS_H_

#include <cstddef>
#include <span>
#include <vector>

#include "weightleak/tensor.h"

namespace weightleak {

// Returned by psnr() for identical images.
inline constexpr double kPsnrCapDb = 100.0;

// 10 log10(peak^2 / MSE) over all elements; kPsnrCapDb when MSE is 0.
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);
double psnr_from_mse(double mse, double peak = 1.0);
double mean_squared_error(const Tensor& a, const Tensor& b);

struct SsimWindow {
  std::size_t size = 11;
  double sigma = 1.5;
};

// Mean SSIM over all fully contained Gaussian windows, averaged over every
// [H, W] plane of a [..., H, W] tensor. Throws ArgumentError when a plane is
// smaller than the window.
double ssim(const Tensor& a, const Tensor& b, SsimWindow window = {}, double peak = 1.0);
// Largest odd window <= 11 that fits an h x w plane.
SsimWindow fitted_ssim_window(std::size_t h, std::size_t w);

// Optimal recovered-to-truth pairing for a batch of images ([B, ...] each),
// chosen to maximise total PSNR by exhaustive search (B <= 8).
struct Assignment {
  std::vector<std::size_t> truth_for_recovered;
  std::vector<double> psnr;  // per recovered image
};
Assignment best_assignment(const Tensor& recovered, const Tensor& truth, double peak = 1.0);

struct TrialScore {
  double psnr = 0.0;
  double ssim = 0.0;
};

struct SuccessSummary {
  double acc = 0.0;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  std::size_t n_trials = 0;
};

// acc = share of trials with PSNR strictly above threshold_db.
SuccessSummary success_rate(std::span<const TrialScore> trials, double threshold_db);

}  // namespace weightleak

#endif  // WEIGHTLEAK_METRICS_H_
