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

#include "weightleak/config.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "weightleak/errors.h"

namespace weightleak {
namespace {

using nlohmann::json;

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

void collect_paths(const json& j, const std::string& prefix, std::vector<std::string>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    out.push_back(path);
    if (it->is_object()) collect_paths(*it, path, out);
  }
}

std::string leaf(const std::string& path) {
  const auto dot = path.rfind('.');
  return dot == std::string::npos ? path : path.substr(dot + 1);
}

// Closest known key: same section first, then anywhere in the schema.
std::string suggestion(const std::string& section, const std::string& key) {
  std::vector<std::string> paths;
  collect_paths(config_to_json(RunConfig{}), "", paths);
  const std::size_t limit = std::max<std::size_t>(2, key.size() / 3);
  std::string best;
  std::size_t best_d = limit + 1;
  for (int pass = 0; pass < 2 && best.empty(); ++pass) {
    for (const std::string& p : paths) {
      const auto dot = p.rfind('.');
      const std::string parent = dot == std::string::npos ? "" : p.substr(0, dot);
      if (pass == 0 && parent != section) continue;
      const std::size_t d = edit_distance(key, leaf(p));
      if (d < best_d) {
        best_d = d;
        best = pass == 0 ? leaf(p) : p;
      }
    }
  }
  return best;
}

class Section {
 public:
  Section(const json& doc, std::string path) : path_(std::move(path)) {
    if (!doc.is_object()) throw ConfigError(where() + "must be an object");
    doc_ = &doc;
  }

  bool has(const char* key) {
    seen_.insert(key);
    return doc_->contains(key);
  }

  const json& at(const char* key) const { return doc_->at(key); }

  void number(const char* key, double& out) {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_number()) throw ConfigError(name(key) + ": expected a number");
    out = v.get<double>();
  }
  template <typename Int>
  void count(const char* key, Int& out) {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      throw ConfigError(name(key) + ": expected a non-negative integer");
    }
    out = static_cast<Int>(v.get<std::uint64_t>());
  }
  void boolean(const char* key, bool& out) {
    if (!has(key)) return;
    if (!at(key).is_boolean()) throw ConfigError(name(key) + ": expected true or false");
    out = at(key).get<bool>();
  }
  void text(const char* key, std::string& out) {
    if (!has(key)) return;
    if (!at(key).is_string()) throw ConfigError(name(key) + ": expected a string");
    out = at(key).get<std::string>();
  }
  template <typename Enum>
  void choice(const char* key, Enum& out, std::initializer_list<std::pair<const char*, Enum>> options) {
    std::string s;
    text(key, s);
    if (s.empty() && !doc_->contains(key)) return;
    std::string names;
    for (const auto& [n, v] : options) {
      if (s == n) {
        out = v;
        return;
      }
      names += names.empty() ? n : std::string(", ") + n;
    }
    throw ConfigError(name(key) + ": unknown value '" + s + "' (expected one of " + names + ")");
  }

  // Rejects keys nobody asked for.
  void finish() const {
    for (auto it = doc_->begin(); it != doc_->end(); ++it) {
      if (seen_.count(it.key())) continue;
      std::string msg = "unknown config key '" + name(it.key().c_str()) + "'";
      const std::string hint = suggestion(path_, it.key());
      if (!hint.empty()) msg += "; did you mean '" + hint + "'?";
      throw ConfigError(msg);
    }
  }

  std::string name(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? "config " : "config section '" + path_ + "' "; }

  const json* doc_ = nullptr;
  std::string path_;
  std::set<std::string> seen_;
};

std::string noise_name(NoiseKind k) { return k == NoiseKind::kGaussian ? "gaussian" : "laplacian"; }

std::string client_optimizer_name(ClientOptimizer o) {
  switch (o) {
    case ClientOptimizer::kSgd: return "sgd";
    case ClientOptimizer::kMomentum: return "sgd-momentum";
    case ClientOptimizer::kAdam: return "adam";
  }
  return "sgd";
}

void rethrow_as_config(const std::exception& e) { throw ConfigError(e.what()); }

}  // namespace

std::string sweep_kind_name(SweepKind kind) {
  switch (kind) {
    case SweepKind::kNone: return "none";
    case SweepKind::kGamma: return "gamma";
    case SweepKind::kEpochs: return "epochs";
    case SweepKind::kDefense: return "defense";
    case SweepKind::kTuningK: return "tuning-k";
  }
  return "none";
}

std::string data_source_name(DataSource source) {
  switch (source) {
    case DataSource::kSynthetic: return "synthetic";
    case DataSource::kIdx: return "idx";
    case DataSource::kCifar10: return "cifar10";
    case DataSource::kCifar100: return "cifar100";
  }
  return "synthetic";
}

AttackConfig RunConfig::resolved_attack() const {
  AttackConfig a = attack;
  if (gamma0_inverse_lr) a.objective.gamma0 = 1.0 / client.learning_rate;
  return a;
}

void RunConfig::validate() const {
  try {
    model_preset(model);
    federation.validate();
    client.validate();
    attack.validate();
    if (const auto* dp = std::get_if<DPConfig>(&defense)) dp->validate();
    if (const auto* sp = std::get_if<SparsifyConfig>(&defense)) sp->validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    rethrow_as_config(e);
  }
  if (trials < 1) throw ConfigError("trials.count must be >= 1");
  if (data.source == DataSource::kSynthetic && data.n < 1) throw ConfigError("data.n must be >= 1");
  if (data.source == DataSource::kIdx && (data.images.empty() || data.labels.empty())) {
    throw ConfigError("data.images and data.labels are required for idx data");
  }
  if ((data.source == DataSource::kCifar10 || data.source == DataSource::kCifar100) && data.path.empty()) {
    throw ConfigError("data.path is required for cifar data");
  }
  if (sweep.kind != SweepKind::kNone && sweep.values.empty()) throw ConfigError("sweep.values must not be empty");
  if (compare.empty()) throw ConfigError("compare.algorithms must not be empty");
}

RunConfig parse_config(const json& doc) {
  RunConfig cfg;
  Section top(doc, "");
  if (!top.has("schema_version")) throw ConfigError("config is missing 'schema_version'");
  if (!top.at("schema_version").is_number_integer() || top.at("schema_version").get<int>() != kSchemaVersion) {
    throw ConfigError("schema_version: expected " + std::to_string(kSchemaVersion));
  }
  top.text("model", cfg.model);

  if (top.has("data")) {
    Section s(top.at("data"), "data");
    s.choice("source", cfg.data.source,
             {{"synthetic", DataSource::kSynthetic}, {"idx", DataSource::kIdx}, {"cifar10", DataSource::kCifar10},
              {"cifar100", DataSource::kCifar100}});
    s.count("n", cfg.data.n);
    s.count("seed", cfg.data.seed);
    s.text("images", cfg.data.images);
    s.text("labels", cfg.data.labels);
    s.text("path", cfg.data.path);
    s.boolean("replicate_rgb", cfg.data.replicate_rgb);
    s.finish();
  }

  if (top.has("federation")) {
    Section s(top.at("federation"), "federation");
    s.count("clients", cfg.federation.num_clients);
    s.count("rounds", cfg.federation.rounds);
    s.number("fraction", cfg.federation.fraction);
    s.choice("transmit", cfg.federation.transmit,
             {{"weights", PayloadKind::kWeights}, {"gradients", PayloadKind::kGradients}});
    s.count("seed", cfg.federation.seed);
    s.finish();
  }

  if (top.has("client")) {
    Section s(top.at("client"), "client");
    s.choice("optimizer", cfg.client.optimizer,
             {{"sgd", ClientOptimizer::kSgd}, {"sgd-momentum", ClientOptimizer::kMomentum},
              {"adam", ClientOptimizer::kAdam}});
    s.number("learning_rate", cfg.client.learning_rate);
    s.number("momentum", cfg.client.momentum);
    s.number("beta1", cfg.client.beta1);
    s.number("beta2", cfg.client.beta2);
    s.number("eps", cfg.client.eps);
    s.count("local_epochs", cfg.client.local_epochs);
    s.count("batch_size", cfg.client.batch_size);
    s.finish();
  }

  if (top.has("defense")) {
    Section s(top.at("defense"), "defense");
    enum class Kind { kNone, kDp, kSparsify } kind = Kind::kNone;
    s.choice("kind", kind, {{"none", Kind::kNone}, {"dp", Kind::kDp}, {"sparsify", Kind::kSparsify}});
    DPConfig dp;
    SparsifyConfig sp;
    s.choice("noise", dp.noise, {{"gaussian", NoiseKind::kGaussian}, {"laplacian", NoiseKind::kLaplacian}});
    s.number("clip", dp.clip);
    s.number("sigma", dp.sigma);
    s.count("group_size", dp.group_size);
    s.number("rate", sp.rate);
    s.choice("scope", sp.scope, {{"global", SparsifyScope::kGlobal}, {"per-layer", SparsifyScope::kPerLayer}});
    s.finish();
    if (kind == Kind::kDp) cfg.defense = dp;
    if (kind == Kind::kSparsify) cfg.defense = sp;
  }

  if (top.has("attack")) {
    Section s(top.at("attack"), "attack");
    AttackConfig& a = cfg.attack;
    std::string objective;
    s.text("objective", objective);
    if (!objective.empty()) {
      try {
        a.objective.kind = parse_objective(objective);
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("attack.objective: ") + e.what());
      }
    }
    s.number("k", a.objective.k);
    if (s.has("gamma0")) {
      const json& g = s.at("gamma0");
      if (g.is_string() && g.get<std::string>() == "1/lr") {
        cfg.gamma0_inverse_lr = true;
      } else if (g.is_number()) {
        a.objective.gamma0 = g.get<double>();
      } else {
        throw ConfigError("attack.gamma0: expected a number or \"1/lr\"");
      }
    }
    s.number("beta_tv", a.objective.beta_tv);
    s.choice("norm_scope", a.objective.norm_scope, {{"global", NormScope::kGlobal}, {"per-layer", NormScope::kPerLayer}});
    std::string optimizer;
    s.text("optimizer", optimizer);
    if (!optimizer.empty()) {
      try {
        a.optimizer.kind = parse_optimizer(optimizer);
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("attack.optimizer: ") + e.what());
      }
    }
    s.number("lr", a.optimizer.lr);
    s.count("history", a.optimizer.history);
    s.count("max_iter", a.optimizer.max_iter);
    s.boolean("backtracking", a.optimizer.backtracking);
    s.count("iterations", a.iterations);
    s.count("batch_size", a.batch_size);
    s.number("success_threshold_db", a.success_threshold_db);
    s.number("stop_loss", a.stop_loss);
    s.count("psnr_every", a.psnr_every);
    s.finish();
  }

  if (top.has("trials")) {
    Section s(top.at("trials"), "trials");
    s.count("count", cfg.trials);
    s.count("seed_base", cfg.seed_base);
    s.finish();
  }

  if (top.has("sweep")) {
    Section s(top.at("sweep"), "sweep");
    s.choice("kind", cfg.sweep.kind,
             {{"none", SweepKind::kNone}, {"gamma", SweepKind::kGamma}, {"epochs", SweepKind::kEpochs},
              {"defense", SweepKind::kDefense}, {"tuning-k", SweepKind::kTuningK}});
    if (s.has("values")) {
      const json& v = s.at("values");
      if (!v.is_array()) throw ConfigError("sweep.values: expected an array of numbers");
      cfg.sweep.values.clear();
      for (const json& x : v) {
        if (!x.is_number()) throw ConfigError("sweep.values: expected an array of numbers");
        cfg.sweep.values.push_back(x.get<double>());
      }
    }
    s.finish();
  }

  if (top.has("compare")) {
    Section s(top.at("compare"), "compare");
    if (s.has("algorithms")) {
      const json& v = s.at("algorithms");
      if (!v.is_array()) throw ConfigError("compare.algorithms: expected an array of objective names");
      cfg.compare.clear();
      for (const json& x : v) {
        if (!x.is_string()) throw ConfigError("compare.algorithms: expected an array of objective names");
        try {
          cfg.compare.push_back(parse_objective(x.get<std::string>()));
        } catch (const ConfigError& e) {
          throw ConfigError(std::string("compare.algorithms: ") + e.what());
        }
      }
    }
    s.finish();
  }

  top.finish();
  cfg.validate();
  return cfg;
}

RunConfig read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

json config_to_json(const RunConfig& cfg) {
  const AttackConfig& a = cfg.attack;
  DPConfig dp;
  SparsifyConfig sp;
  std::string kind = "none";
  if (const auto* d = std::get_if<DPConfig>(&cfg.defense)) {
    dp = *d;
    kind = "dp";
  }
  if (const auto* s = std::get_if<SparsifyConfig>(&cfg.defense)) {
    sp = *s;
    kind = "sparsify";
  }
  json compare = json::array();
  for (ObjectiveKind k : cfg.compare) compare.push_back(objective_name(k));
  return {
      {"schema_version", kSchemaVersion},
      {"model", cfg.model},
      {"data",
       {{"source", data_source_name(cfg.data.source)},
        {"n", cfg.data.n},
        {"seed", cfg.data.seed},
        {"images", cfg.data.images},
        {"labels", cfg.data.labels},
        {"path", cfg.data.path},
        {"replicate_rgb", cfg.data.replicate_rgb}}},
      {"federation",
       {{"clients", cfg.federation.num_clients},
        {"rounds", cfg.federation.rounds},
        {"fraction", cfg.federation.fraction},
        {"transmit", payload_kind_name(cfg.federation.transmit)},
        {"seed", cfg.federation.seed}}},
      {"client",
       {{"optimizer", client_optimizer_name(cfg.client.optimizer)},
        {"learning_rate", cfg.client.learning_rate},
        {"momentum", cfg.client.momentum},
        {"beta1", cfg.client.beta1},
        {"beta2", cfg.client.beta2},
        {"eps", cfg.client.eps},
        {"local_epochs", cfg.client.local_epochs},
        {"batch_size", cfg.client.batch_size}}},
      {"defense",
       {{"kind", kind},
        {"noise", noise_name(dp.noise)},
        {"clip", dp.clip},
        {"sigma", dp.sigma},
        {"group_size", dp.group_size},
        {"rate", sp.rate},
        {"scope", sp.scope == SparsifyScope::kGlobal ? "global" : "per-layer"}}},
      {"attack",
       {{"objective", objective_name(a.objective.kind)},
        {"k", a.objective.k},
        {"gamma0", cfg.gamma0_inverse_lr ? json("1/lr") : json(a.objective.gamma0)},
        {"beta_tv", a.objective.beta_tv},
        {"norm_scope", a.objective.norm_scope == NormScope::kGlobal ? "global" : "per-layer"},
        {"optimizer", optimizer_name(a.optimizer.kind)},
        {"lr", a.optimizer.lr},
        {"history", a.optimizer.history},
        {"max_iter", a.optimizer.max_iter},
        {"backtracking", a.optimizer.backtracking},
        {"iterations", a.iterations},
        {"batch_size", a.batch_size},
        {"success_threshold_db", a.success_threshold_db},
        {"stop_loss", a.stop_loss},
        {"psnr_every", a.psnr_every}}},
      {"trials", {{"count", cfg.trials}, {"seed_base", cfg.seed_base}}},
      {"sweep", {{"kind", sweep_kind_name(cfg.sweep.kind)}, {"values", cfg.sweep.values}}},
      {"compare", {{"algorithms", compare}}},
  };
}

std::string config_hash(const RunConfig& cfg) {
  const std::string text = config_to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace weightleak
