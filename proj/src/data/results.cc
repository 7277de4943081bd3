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

#include "weightleak/results.h"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <tuple>

#include "weightleak/errors.h"
#include "weightleak/metrics.h"

namespace weightleak {
namespace {

std::string fmt(double v, const char* spec) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

bool any_parameter(const std::vector<SummaryRow>& rows) {
  for (const auto& r : rows) {
    if (!r.parameter.empty()) return true;
  }
  return false;
}

}  // namespace

nlohmann::json to_json(const TrialRecord& r) {
  nlohmann::json j = {{"algorithm", r.algorithm},
                      {"trial", r.trial},
                      {"seed", r.seed},
                      {"update", r.update},
                      {"status", r.status},
                      {"success", r.success},
                      {"psnr", r.psnr},
                      {"ssim", r.ssim},
                      {"per_image_psnr", r.per_image_psnr},
                      {"labels", r.labels},
                      {"true_labels", r.true_labels},
                      {"labels_correct", r.labels_correct},
                      {"iterations", r.iterations},
                      {"final_loss", r.final_loss},
                      {"loss_trace", r.loss_trace},
                      {"psnr_trace", r.psnr_trace},
                      {"elapsed_seconds", r.elapsed_seconds}};
  if (!r.parameter.empty()) {
    j["parameter"] = r.parameter;
    j["value"] = r.value;
  }
  if (!r.detail.empty()) j["detail"] = r.detail;
  j["alpha_estimate"] = r.alpha_estimate ? nlohmann::json(*r.alpha_estimate) : nlohmann::json(nullptr);
  j["gamma"] = r.gamma ? nlohmann::json(*r.gamma) : nlohmann::json(nullptr);
  return j;
}

TrialRecord record_from_json(const nlohmann::json& j) {
  TrialRecord r;
  r.algorithm = j.at("algorithm").get<std::string>();
  r.parameter = j.value("parameter", std::string());
  r.value = j.value("value", 0.0);
  r.trial = j.at("trial").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.update = j.value("update", std::size_t{0});
  r.status = j.at("status").get<std::string>();
  r.detail = j.value("detail", std::string());
  r.success = j.at("success").get<bool>();
  r.psnr = j.at("psnr").get<double>();
  r.ssim = j.at("ssim").get<double>();
  r.per_image_psnr = j.at("per_image_psnr").get<std::vector<double>>();
  r.labels = j.at("labels").get<std::vector<int>>();
  r.true_labels = j.at("true_labels").get<std::vector<int>>();
  r.labels_correct = j.at("labels_correct").get<std::size_t>();
  r.iterations = j.at("iterations").get<std::size_t>();
  r.final_loss = j.at("final_loss").get<double>();
  r.loss_trace = j.at("loss_trace").get<std::vector<double>>();
  r.psnr_trace = j.at("psnr_trace").get<std::vector<double>>();
  r.elapsed_seconds = j.value("elapsed_seconds", 0.0);
  if (j.contains("alpha_estimate") && !j["alpha_estimate"].is_null()) r.alpha_estimate = j["alpha_estimate"].get<double>();
  if (j.contains("gamma") && !j["gamma"].is_null()) r.gamma = j["gamma"].get<double>();
  return r;
}

void append_results(const std::vector<TrialRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot append to " + path.string());
  for (const TrialRecord& r : records) out << to_json(r).dump() << '\n';
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<TrialRecord> read_results(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  std::vector<TrialRecord> out;
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t end = text.find('\n', start);
    if (end == std::string::npos) break;  // cut-off final line
    const std::string line = text.substr(start, end - start);
    if (!line.empty()) {
      try {
        out.push_back(record_from_json(nlohmann::json::parse(line)));
      } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": bad result line: " + e.what(), start);
      }
    }
    start = end + 1;
  }
  return out;
}

std::vector<SummaryRow> summarize(const std::vector<TrialRecord>& records, double threshold_db) {
  struct Group {
    SummaryRow row;
    std::vector<TrialScore> scores;
  };
  std::vector<Group> groups;
  for (const TrialRecord& r : records) {
    auto key = std::tie(r.algorithm, r.parameter, r.value);
    Group* g = nullptr;
    for (auto& candidate : groups) {
      if (std::tie(candidate.row.algorithm, candidate.row.parameter, candidate.row.value) == key) {
        g = &candidate;
        break;
      }
    }
    if (g == nullptr) {
      groups.push_back({SummaryRow{.algorithm = r.algorithm, .parameter = r.parameter, .value = r.value,
                                   .seed_base = r.seed},
                        {}});
      g = &groups.back();
    }
    g->row.seed_base = std::min(g->row.seed_base, r.seed);
    if (r.status == "ok") {
      g->scores.push_back({r.psnr, r.ssim});
    } else {
      g->scores.push_back({0.0, 0.0});
    }
  }
  std::vector<SummaryRow> rows;
  for (auto& g : groups) {
    const SuccessSummary s = success_rate(g.scores, threshold_db);
    g.row.acc = s.acc;
    g.row.psnr = s.mean_psnr;
    g.row.ssim = s.mean_ssim;
    g.row.n_trials = s.n_trials;
    rows.push_back(g.row);
  }
  return rows;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  const bool swept = any_parameter(rows);
  std::string out = "algorithm,acc,psnr,ssim,n_trials,seed_base";
  if (swept) out += ",parameter,value";
  out += '\n';
  for (const SummaryRow& r : rows) {
    out += r.algorithm + ',' + fmt(r.acc, "%.4f") + ',' + fmt(r.psnr, "%.4f") + ',' + fmt(r.ssim, "%.4f") + ',' +
           std::to_string(r.n_trials) + ',' + std::to_string(r.seed_base);
    if (swept) out += ',' + r.parameter + ',' + fmt(r.value, "%.17g");
    out += '\n';
  }
  return out;
}

std::string summary_markdown(const std::vector<SummaryRow>& rows) {
  const bool swept = any_parameter(rows);
  std::string out = swept ? "| algorithm | parameter | value | acc | psnr (dB) | ssim | n |\n|---|---|---|---|---|---|---|\n"
                          : "| algorithm | acc | psnr (dB) | ssim | n |\n|---|---|---|---|---|\n";
  for (const SummaryRow& r : rows) {
    out += "| " + r.algorithm + " | ";
    if (swept) out += r.parameter + " | " + fmt(r.value, "%g") + " | ";
    out += fmt(100.0 * r.acc, "%.1f%%") + " | " + fmt(r.psnr, "%.2f") + " | " + fmt(r.ssim, "%.3f") + " | " +
           std::to_string(r.n_trials) + " |\n";
  }
  return out;
}

void write_text(const std::string& text, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace weightleak
