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

// Experiment records: one JSON line per attack trial, CSV summaries.

#ifndef WEIGHTLEAK_RESULTS_H_
#define WEIGHTLEAK_RESULTS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace weightleak {

struct TrialRecord {
  std::string algorithm;        // objective name
  std::string parameter;        // swept field, empty outside sweeps
  double value = 0.0;           // swept value
  std::size_t trial = 0;
  std::uint64_t seed = 0;       // seed_base + trial
  std::size_t update = 0;       // index into the wiretap
  std::string status = "ok";    // "ok" or "diverged"
  std::string detail;           // error text for diverged trials
  bool success = false;
  double psnr = 0.0;
  double ssim = 0.0;
  std::vector<double> per_image_psnr;
  std::vector<int> labels;
  std::vector<int> true_labels;
  std::size_t labels_correct = 0;
  std::size_t iterations = 0;
  double final_loss = 0.0;
  std::optional<double> alpha_estimate;
  std::optional<double> gamma;
  std::vector<double> loss_trace;
  std::vector<double> psnr_trace;
  double elapsed_seconds = 0.0;

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

nlohmann::json to_json(const TrialRecord& r);
TrialRecord record_from_json(const nlohmann::json& j);

// Appends one line per record and flushes.
void append_results(const std::vector<TrialRecord>& records, const std::filesystem::path& path);
// Reads every complete line. A final line without its newline is a write that
// was cut short and is skipped; a malformed complete line is a FormatError.
std::vector<TrialRecord> read_results(const std::filesystem::path& path);

struct SummaryRow {
  std::string algorithm;
  std::string parameter;
  double value = 0.0;
  double acc = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  std::size_t n_trials = 0;
  std::uint64_t seed_base = 0;

  friend bool operator==(const SummaryRow&, const SummaryRow&) = default;
};

// Groups records by (algorithm, parameter, value) in order of first
// appearance. Diverged trials count as failures with PSNR 0 and SSIM 0.
std::vector<SummaryRow> summarize(const std::vector<TrialRecord>& records, double threshold_db);

// Columns: algorithm, acc, psnr, ssim, n_trials, seed_base, plus parameter
// and value when any row carries a swept parameter.
std::string summary_csv(const std::vector<SummaryRow>& rows);
std::string summary_markdown(const std::vector<SummaryRow>& rows);
void write_text(const std::string& text, const std::filesystem::path& path);

}  // namespace weightleak

#endif  // WEIGHTLEAK_RESULTS_H_
