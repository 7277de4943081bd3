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

#include "weightleak/wiretap_io.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "weightleak/data_io.h"
#include "weightleak/errors.h"

namespace weightleak {
namespace {

constexpr char kMagic[8] = {'W', 'L', 'W', 'I', 'R', 'E', '0', '1'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void weights(const ModelWeights& w) {
    u64(w.fingerprint());
    u32(static_cast<std::uint32_t>(w.size()));
    for (const Tensor& t : w.tensors()) {
      u32(static_cast<std::uint32_t>(t.rank()));
      for (std::size_t d : t.shape()) u64(d);
      for (double v : t.data()) f64(v);
    }
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  void need(std::size_t n, const char* what) const {
    if (in_.size() - pos_ < n) throw FormatError(std::string("wiretap: truncated ") + what, pos_);
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return in_[pos_++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    need(n, what);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  // Guards counts read from the file against absurd allocations.
  std::size_t count(std::uint64_t n, std::size_t min_bytes_each, const char* what) const {
    if (min_bytes_each > 0 && n > (in_.size() - pos_) / min_bytes_each) {
      throw FormatError(std::string("wiretap: implausible ") + what + " count", pos_);
    }
    return static_cast<std::size_t>(n);
  }
  ModelWeights weights() {
    const std::uint64_t fp = u64("weights fingerprint");
    const std::size_t n = count(u32("tensor count"), 4, "tensor");
    std::vector<Tensor> tensors;
    tensors.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t rank = count(u32("tensor rank"), 8, "dimension");
      Shape shape(rank);
      std::uint64_t total = 1;
      for (std::size_t& d : shape) {
        d = static_cast<std::size_t>(u64("tensor shape"));
        total *= d;
      }
      count(total, 8, "element");
      Tensor t(shape);
      for (double& v : t.mutable_data()) v = f64("tensor data");
      tensors.push_back(std::move(t));
    }
    return ModelWeights(std::move(tensors), fp);
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

nlohmann::json weights_json(const ModelWeights& w) {
  nlohmann::json tensors = nlohmann::json::array();
  for (const Tensor& t : w.tensors()) {
    tensors.push_back({{"shape", t.shape()}, {"data", std::vector<double>(t.data().begin(), t.data().end())}});
  }
  return {{"fingerprint", w.fingerprint()}, {"tensors", std::move(tensors)}};
}

ModelWeights weights_from_json(const nlohmann::json& j) {
  std::vector<Tensor> tensors;
  for (const auto& t : j.at("tensors")) {
    tensors.emplace_back(t.at("shape").get<Shape>(), t.at("data").get<std::vector<double>>());
  }
  return ModelWeights(std::move(tensors), j.at("fingerprint").get<std::uint64_t>());
}

}  // namespace

std::vector<std::uint8_t> encode_wiretap(const WiretapLog& log) {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.u64(log.spec_fingerprint);
  w.u64(log.updates.size());
  for (const TransmittedUpdate& u : log.updates) {
    w.u64(u.round());
    w.u64(u.client());
    w.u8(u.kind() == PayloadKind::kWeights ? 0 : 1);
    w.str(u.defense());
    w.u64(u.evaluation_sample_ref().size());
    for (std::size_t id : u.evaluation_sample_ref()) w.u64(id);
    w.weights(u.global_before());
    w.weights(u.payload());
  }
  return w.take();
}

WiretapLog decode_wiretap(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.need(sizeof(kMagic), "magic");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) throw FormatError("wiretap: bad magic", 0);
  for (std::size_t i = 0; i < sizeof(kMagic); ++i) r.u8("magic");
  WiretapLog log;
  log.spec_fingerprint = r.u64("spec fingerprint");
  const std::size_t n = r.count(r.u64("update count"), 16, "update");
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t round = static_cast<std::size_t>(r.u64("round"));
    const std::size_t client = static_cast<std::size_t>(r.u64("client"));
    const std::size_t kind_at = r.pos();
    const std::uint8_t kind = r.u8("payload kind");
    if (kind > 1) throw FormatError("wiretap: unknown payload kind " + std::to_string(kind), kind_at);
    std::string defense = r.str("defense label");
    std::vector<std::size_t> refs(r.count(r.u64("sample count"), 8, "sample"));
    for (std::size_t& id : refs) id = static_cast<std::size_t>(r.u64("sample ref"));
    ModelWeights before = r.weights();
    ModelWeights payload = r.weights();
    log.updates.emplace_back(round, client, kind == 0 ? PayloadKind::kWeights : PayloadKind::kGradients,
                             std::move(before), std::move(payload), std::move(refs), std::move(defense));
  }
  if (!r.done()) throw FormatError("wiretap: trailing bytes", r.pos());
  return log;
}

void write_wiretap(const WiretapLog& log, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = encode_wiretap(log);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

WiretapLog read_wiretap(const std::filesystem::path& path) { return decode_wiretap(read_file(path)); }

nlohmann::json wiretap_to_json(const WiretapLog& log) {
  nlohmann::json updates = nlohmann::json::array();
  for (const TransmittedUpdate& u : log.updates) {
    updates.push_back({{"round", u.round()},
                       {"client", u.client()},
                       {"kind", payload_kind_name(u.kind())},
                       {"defense", u.defense()},
                       {"sample_ref", u.evaluation_sample_ref()},
                       {"global_before", weights_json(u.global_before())},
                       {"payload", weights_json(u.payload())}});
  }
  return {{"spec_fingerprint", log.spec_fingerprint}, {"updates", std::move(updates)}};
}

WiretapLog wiretap_from_json(const nlohmann::json& doc) {
  try {
    WiretapLog log;
    log.spec_fingerprint = doc.at("spec_fingerprint").get<std::uint64_t>();
    for (const auto& u : doc.at("updates")) {
      const std::string kind = u.at("kind").get<std::string>();
      if (kind != "weights" && kind != "gradients") throw ConfigError("wiretap: unknown payload kind " + kind);
      log.updates.emplace_back(u.at("round").get<std::size_t>(), u.at("client").get<std::size_t>(),
                               kind == "weights" ? PayloadKind::kWeights : PayloadKind::kGradients,
                               weights_from_json(u.at("global_before")), weights_from_json(u.at("payload")),
                               u.at("sample_ref").get<std::vector<std::size_t>>(), u.at("defense").get<std::string>());
    }
    return log;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("wiretap json: ") + e.what());
  }
}

}  // namespace weightleak
