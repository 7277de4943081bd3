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

#include "cli.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "weightleak/config.h"
#include "weightleak/data_io.h"
#include "weightleak/errors.h"
#include "weightleak/experiment.h"
#include "weightleak/results.h"
#include "weightleak/wiretap_io.h"

namespace weightleak::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::optional<std::size_t> jobs;
  std::optional<std::size_t> iterations;
};

std::size_t resolve_jobs(const Common& c) {
  if (c.jobs) return std::max<std::size_t>(1, *c.jobs);
  if (const char* env = std::getenv("WEIGHTLEAK_JOBS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("WEIGHTLEAK_JOBS must be a positive integer, got '") + env + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Flags only override scalar fields.
RunConfig load(const Common& c) {
  RunConfig cfg = read_config(c.config);
  if (c.seed) {
    cfg.seed_base = *c.seed;
    cfg.federation.seed = *c.seed;
  }
  if (c.iterations) cfg.attack.iterations = *c.iterations;
  cfg.validate();
  return cfg;
}

void write_manifest(const fs::path& dir, const std::string& command, const RunConfig& cfg,
                    const std::vector<std::string>& outputs) {
  const json manifest = {{"tool", "weightleak"},
                         {"version", kVersion},
                         {"command", command},
                         {"seed", cfg.seed_base},
                         {"federation_seed", cfg.federation.seed},
                         {"config_hash", config_hash(cfg)},
                         {"config", config_to_json(cfg)},
                         {"outputs", outputs}};
  write_text(manifest.dump(2) + "\n", dir / "manifest.json");
}

fs::path prepare_dir(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + out + ": " + ec.message());
  return dir;
}

// Fresh results file for this run; records are appended in trial order.
void store_results(const fs::path& dir, const std::vector<TrialRecord>& records) {
  const fs::path path = dir / "results.jsonl";
  std::error_code ec;
  fs::remove(path, ec);
  append_results(records, path);
}

bool any_diverged(const std::vector<TrialRecord>& records, std::ostream& err) {
  bool diverged = false;
  for (const auto& r : records) {
    if (r.status != "ok") {
      err << "trial " << r.trial << " (" << r.algorithm << ") diverged: " << r.detail << "\n";
      diverged = true;
    }
  }
  return diverged;
}

int cmd_simulate(const Common& c, bool with_json, std::ostream& out) {
  const RunConfig cfg = load(c);
  const ModelSpec spec = cfg.model_spec();
  const Dataset data = load_data(cfg);
  const WiretapLog log = run_simulation(cfg.federation, cfg.client, spec, data, cfg.defense);
  const fs::path dir = prepare_dir(c.out);
  write_wiretap(log, dir / "wiretap.bin");
  std::vector<std::string> outputs = {"wiretap.bin"};
  if (with_json) {
    write_text(wiretap_to_json(log).dump() + "\n", dir / "wiretap.json");
    outputs.push_back("wiretap.json");
  }
  write_manifest(dir, "simulate", cfg, outputs);
  out << "wrote " << log.updates.size() << " update(s) to " << (dir / "wiretap.bin").string() << "\n";
  return kExitOk;
}

int cmd_attack(const Common& c, const std::string& wiretap_path, bool blind, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = load(c);
  const WiretapLog log = read_wiretap(wiretap_path);
  std::optional<Dataset> pool;
  if (!blind) pool = load_data(cfg);
  std::vector<Tensor> recovered;
  const auto records = attack_wiretap(cfg, log, pool ? &*pool : nullptr, resolve_jobs(c), &recovered);

  const fs::path dir = prepare_dir(c.out);
  store_results(dir, records);
  std::vector<std::string> outputs = {"results.jsonl"};
  fs::create_directories(dir / "images");
  for (std::size_t i = 0; i < recovered.size(); ++i) {
    const Tensor& batch = recovered[i];
    if (batch.rank() == 0) continue;  // diverged
    for (std::size_t b = 0; b < batch.dim(0); ++b) {
      const Tensor img = slice_leading(batch, b, 1);
      const bool rgb = img.dim(1) == 3;
      const std::string name = "images/update" + std::to_string(i) + "_img" + std::to_string(b) + (rgb ? ".ppm" : ".pgm");
      export_image(img, dir / name, rgb ? ImageFormat::kPpm : ImageFormat::kPgm);
      outputs.push_back(name);
    }
  }
  if (!blind) {
    const auto rows = summarize(records, cfg.attack.success_threshold_db);
    write_text(summary_csv(rows), dir / "summary.csv");
    outputs.push_back("summary.csv");
    out << summary_markdown(rows);
  }
  write_manifest(dir, "attack", cfg, outputs);
  for (const auto& r : records) {
    out << "update " << r.update << ": " << r.algorithm << " loss " << r.final_loss;
    if (!blind && r.status == "ok") out << " psnr " << r.psnr << " dB" << (r.success ? " (success)" : "");
    out << "\n";
  }
  return any_diverged(records, err) ? kExitDiverged : kExitOk;
}

// Rows per grid point and seed, plus a per-grid-point summary.
int cmd_sweep(const Common& c, const std::string& kind, std::ostream& out, std::ostream& err) {
  RunConfig cfg = load(c);
  if (!kind.empty()) {
    json doc = config_to_json(cfg);
    doc["sweep"]["kind"] = kind;
    const bool inverse = cfg.gamma0_inverse_lr;
    cfg = parse_config(doc);
    cfg.gamma0_inverse_lr = inverse;
  }
  const Dataset pool = load_data(cfg);
  const auto records = run_sweep(cfg, pool, resolve_jobs(c));
  const fs::path dir = prepare_dir(c.out);
  store_results(dir, records);
  std::vector<SummaryRow> per_seed;
  for (const auto& r : records) {
    const auto row = summarize({r}, cfg.attack.success_threshold_db);
    per_seed.insert(per_seed.end(), row.begin(), row.end());
  }
  const auto rows = summarize(records, cfg.attack.success_threshold_db);
  write_text(summary_csv(per_seed), dir / "sweep.csv");
  write_text(summary_csv(rows), dir / "sweep_summary.csv");
  write_manifest(dir, "sweep " + sweep_kind_name(cfg.sweep.kind), cfg,
                 {"results.jsonl", "sweep.csv", "sweep_summary.csv"});
  out << summary_markdown(rows);
  return any_diverged(records, err) ? kExitDiverged : kExitOk;
}

int cmd_compare(const Common& c, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = load(c);
  const Dataset pool = load_data(cfg);
  const auto records = run_compare(cfg, pool, resolve_jobs(c));
  const fs::path dir = prepare_dir(c.out);
  store_results(dir, records);
  const auto rows = summarize(records, cfg.attack.success_threshold_db);
  write_text(summary_csv(rows), dir / "compare.csv");
  write_text(summary_markdown(rows), dir / "compare.md");
  write_manifest(dir, "compare", cfg, {"results.jsonl", "compare.csv", "compare.md"});
  out << summary_markdown(rows);
  return any_diverged(records, err) ? kExitDiverged : kExitOk;
}

int cmd_report(const std::string& results, double threshold, const std::string& out_dir, std::ostream& out) {
  const auto records = read_results(results);
  if (records.empty()) throw ConfigError(results + " holds no complete result lines");
  const auto rows = summarize(records, threshold);
  if (!out_dir.empty()) {
    const fs::path dir = prepare_dir(out_dir);
    write_text(summary_csv(rows), dir / "report.csv");
    write_text(summary_markdown(rows), dir / "report.md");
  }
  out << summary_markdown(rows);
  return kExitOk;
}

void add_common(CLI::App* cmd, Common& c, bool needs_config = true) {
  auto* opt = cmd->add_option("--config", c.config, "run configuration (JSON)")->check(CLI::ExistingFile);
  if (needs_config) opt->required();
  cmd->add_option("--seed", c.seed, "override the run seed");
  cmd->add_option("--out", c.out, "output directory")->capture_default_str();
  cmd->add_option("--jobs", c.jobs, "worker threads (default: WEIGHTLEAK_JOBS, then all cores)");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reconstruct federated-learning training data from transmitted weights", "weightleak"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Common sim, atk, swp, cmp;
  bool sim_json = false;
  auto* simulate = app.add_subcommand("simulate", "run a federation and record the wiretap");
  add_common(simulate, sim);
  simulate->add_flag("--json", sim_json, "also write wiretap.json");

  std::string wiretap;
  bool blind = false;
  auto* attack = app.add_subcommand("attack", "attack every update of a recorded wiretap");
  add_common(attack, atk);
  attack->add_option("--wiretap", wiretap, "wiretap.bin from simulate")->required()->check(CLI::ExistingFile);
  attack->add_option("--iterations", atk.iterations, "override attack.iterations");
  attack->add_flag("--no-truth", blind, "skip scoring against the data set");

  std::string sweep_kind;
  auto* sweep = app.add_subcommand("sweep", "seeded trials over a parameter grid");
  add_common(sweep, swp);
  sweep->add_option("kind", sweep_kind, "gamma | epochs | defense | tuning-k (default: sweep.kind)")
      ->check(CLI::IsMember({"gamma", "epochs", "defense", "tuning-k"}));
  sweep->add_option("--iterations", swp.iterations, "override attack.iterations");

  auto* compare = app.add_subcommand("compare", "compare objectives on shared seeds");
  add_common(compare, cmp);
  compare->add_option("--iterations", cmp.iterations, "override attack.iterations");

  std::string results, report_out;
  double threshold = 30.0;
  auto* report = app.add_subcommand("report", "rebuild the summary table from results.jsonl");
  report->add_option("--results", results, "results.jsonl")->required()->check(CLI::ExistingFile);
  report->add_option("--threshold", threshold, "success threshold in dB")->capture_default_str();
  report->add_option("--out", report_out, "also write report.csv and report.md here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*simulate) return cmd_simulate(sim, sim_json, out);
    if (*attack) return cmd_attack(atk, wiretap, blind, out, err);
    if (*sweep) return cmd_sweep(swp, sweep_kind, out, err);
    if (*compare) return cmd_compare(cmp, out, err);
    if (*report) return cmd_report(results, threshold, report_out, out);
  } catch (const DivergedError& e) {
    err << "error: " << e.what() << " at iteration " << e.iteration() << "\n";
    return kExitDiverged;
  } catch (const SimulationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace weightleak::cli
