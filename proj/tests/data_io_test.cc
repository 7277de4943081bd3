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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "test_util.h"
#include "weightleak/config.h"
#include "weightleak/data_io.h"
#include "weightleak/errors.h"
#include "weightleak/results.h"
#include "weightleak/wiretap_io.h"

namespace weightleak {
namespace {

namespace fs = std::filesystem;
using ::weightleak::testing::random_tensor;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("weightleak_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

// Four 2x3 images with pixel bytes i*6 + j*40 and labels 3, 1, 4, 1.
std::vector<std::uint8_t> idx_images() {
  std::vector<std::uint8_t> b;
  put_be32(b, 0x803);
  put_be32(b, 4);
  put_be32(b, 2);
  put_be32(b, 3);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 6; ++j) b.push_back(static_cast<std::uint8_t>(i * 6 + j * 40));
  }
  return b;
}

std::vector<std::uint8_t> idx_labels(std::uint32_t n = 4) {
  std::vector<std::uint8_t> b;
  put_be32(b, 0x801);
  put_be32(b, n);
  const std::uint8_t labels[] = {3, 1, 4, 1, 5};
  for (std::uint32_t i = 0; i < n; ++i) b.push_back(labels[i]);
  return b;
}

TEST(Idx, HandcraftedFixture) {
  const Dataset d = parse_idx(idx_images(), idx_labels());
  ASSERT_EQ(d.images.shape(), (Shape{4, 1, 2, 3}));
  EXPECT_EQ(d.labels, (std::vector<int>{3, 1, 4, 1}));
  EXPECT_EQ(d.num_classes, 10u);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 6; ++j) EXPECT_EQ(d.images[i * 6 + j], (i * 6 + j * 40) / 255.0);
  }
  const Dataset rgb = parse_idx(idx_images(), idx_labels(), true);
  ASSERT_EQ(rgb.images.shape(), (Shape{4, 3, 2, 3}));
  for (int c = 0; c < 3; ++c) EXPECT_EQ(rgb.images[1 * 18 + c * 6 + 2], d.images[1 * 6 + 2]);
}

TEST(Idx, LoadsFromFiles) {
  TempDir dir;
  auto write = [&](const std::string& name, const std::vector<std::uint8_t>& bytes) {
    std::ofstream(dir / name, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                                       static_cast<std::streamsize>(bytes.size()));
  };
  write("img", idx_images());
  write("lbl", idx_labels());
  EXPECT_EQ(load_idx(dir / "img", dir / "lbl").images, parse_idx(idx_images(), idx_labels()).images);
  EXPECT_THROW(load_idx(dir / "missing", dir / "lbl"), IoError);
}

TEST(Idx, Errors) {
  EXPECT_THROW(parse_idx({}, idx_labels()), FormatError);
  EXPECT_THROW(parse_idx(idx_images(), idx_labels(3)), FormatError);
  auto bad_magic = idx_images();
  bad_magic[3] = 0x01;
  try {
    parse_idx(bad_magic, idx_labels());
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
  auto truncated = idx_images();
  truncated.pop_back();
  EXPECT_THROW(parse_idx(truncated, idx_labels()), FormatError);
  auto label_range = idx_labels();
  label_range[8] = 10;
  try {
    parse_idx(idx_images(), label_range);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 8u);
  }
}

std::vector<std::uint8_t> cifar_record(std::uint8_t label, std::uint8_t fine, bool hundred) {
  std::vector<std::uint8_t> r = {label};
  if (hundred) r.push_back(fine);
  for (int i = 0; i < 3072; ++i) r.push_back(static_cast<std::uint8_t>((i * 7) % 256));
  return r;
}

TEST(Cifar, SingleRecordRoundTrip) {
  const Dataset d = parse_cifar_binary(cifar_record(6, 0, false), CifarVariant::kCifar10);
  ASSERT_EQ(d.images.shape(), (Shape{1, 3, 32, 32}));
  EXPECT_EQ(d.labels, std::vector<int>{6});
  for (int i = 0; i < 3072; ++i) ASSERT_EQ(d.images[i], ((i * 7) % 256) / 255.0);
  // Channel-major layout: red plane first.
  EXPECT_EQ(d.images[1024], ((1024 * 7) % 256) / 255.0);
}

TEST(Cifar, HundredUsesFineLabel) {
  auto bytes = cifar_record(3, 87, true);
  const auto second = cifar_record(19, 2, true);
  bytes.insert(bytes.end(), second.begin(), second.end());
  const Dataset d = parse_cifar_binary(bytes, CifarVariant::kCifar100);
  EXPECT_EQ(d.labels, (std::vector<int>{87, 2}));
  EXPECT_EQ(d.num_classes, 100u);
}

TEST(Cifar, Errors) {
  auto truncated = cifar_record(1, 0, false);
  truncated.pop_back();
  EXPECT_THROW(parse_cifar_binary(truncated, CifarVariant::kCifar10), FormatError);
  EXPECT_THROW(parse_cifar_binary({}, CifarVariant::kCifar10), FormatError);
  EXPECT_THROW(parse_cifar_binary(cifar_record(10, 0, false), CifarVariant::kCifar10), FormatError);
  EXPECT_THROW(parse_cifar_binary(cifar_record(1, 100, true), CifarVariant::kCifar100), FormatError);
  // A cifar100 record read as cifar10 has the wrong size.
  EXPECT_THROW(parse_cifar_binary(cifar_record(1, 1, true), CifarVariant::kCifar10), FormatError);
}

TEST(Synthetic, DeterministicAndRoundRobin) {
  const Dataset a = synthetic_dataset(10, {3, 8, 8}, 10, 5);
  EXPECT_EQ(a.images, synthetic_dataset(10, {3, 8, 8}, 10, 5).images);
  EXPECT_NE(a.images, synthetic_dataset(10, {3, 8, 8}, 10, 6).images);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.labels[i], i);
  for (double v : a.images.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Synthetic, ClassMeansAreDistinct) {
  const std::size_t classes = 10, per = 20, pixels = 3 * 8 * 8;
  const Dataset d = synthetic_dataset(classes * per, {3, 8, 8}, classes, 9);
  std::vector<std::vector<double>> mean(classes, std::vector<double>(pixels, 0.0));
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t p = 0; p < pixels; ++p) mean[d.labels[i]][p] += d.images[i * pixels + p] / per;
  }
  double min_mse = 1e9;
  for (std::size_t a = 0; a < classes; ++a) {
    for (std::size_t b = a + 1; b < classes; ++b) {
      double mse = 0.0;
      for (std::size_t p = 0; p < pixels; ++p) mse += (mean[a][p] - mean[b][p]) * (mean[a][p] - mean[b][p]);
      min_mse = std::min(min_mse, mse / pixels);
    }
  }
  EXPECT_GT(min_mse, 0.01);
}

TEST(ExportImage, WhitePixelAndHalfUp) {
  TempDir dir;
  export_image(Tensor({1, 1, 1}, {1.0}), dir / "w.pgm", ImageFormat::kPgm);
  const auto white = read_file(dir / "w.pgm");
  EXPECT_EQ(std::string(white.begin(), white.begin() + 2), "P5");
  EXPECT_EQ(white.back(), 255);
  export_image(Tensor({1, 1, 1}, {0.5}), dir / "h.pgm", ImageFormat::kPgm);
  EXPECT_EQ(read_file(dir / "h.pgm").back(), 128);
}

TEST(ExportImage, RandomRoundTrip) {
  TempDir dir;
  std::mt19937_64 rng(3);
  const Tensor img = random_tensor({3, 5, 7}, rng, 0.0, 1.0);
  export_image(img, dir / "r.ppm", ImageFormat::kPpm);
  const Tensor back = read_pnm(dir / "r.ppm");
  ASSERT_EQ(back.shape(), img.shape());
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_EQ(back[i], std::floor(255.0 * img[i] + 0.5) / 255.0);
  const Tensor gray = random_tensor({1, 1, 4, 4}, rng, 0.0, 1.0);
  export_image(gray, dir / "g.pgm", ImageFormat::kPgm);
  EXPECT_EQ(read_pnm(dir / "g.pgm").shape(), (Shape{1, 4, 4}));
}

TEST(ExportImage, Errors) {
  TempDir dir;
  EXPECT_THROW(export_image(Tensor({3, 2, 2}), dir / "x.pgm", ImageFormat::kPgm), ArgumentError);
  EXPECT_THROW(export_image(Tensor({1, 1, 1}, {1.5}), dir / "x.pgm", ImageFormat::kPgm), ArgumentError);
  EXPECT_THROW(export_image(Tensor({1, 1, 1}), dir / "no" / "such" / "x.pgm", ImageFormat::kPgm), IoError);
}

TEST(Config, MinimalConfigFillsDefaults) {
  const RunConfig cfg =
      parse_config(nlohmann::json::parse(R"({"schema_version": 1, "model": "tiny-mlp", "attack": {"objective": "dlm"}})"));
  EXPECT_EQ(cfg.attack.objective.kind, ObjectiveKind::kDlm);
  const nlohmann::json dump = config_to_json(cfg);
  EXPECT_EQ(dump["attack"]["optimizer"], "adam");
  EXPECT_EQ(dump["attack"]["lr"], 0.1);
  EXPECT_EQ(dump["attack"]["iterations"], 4000);
  EXPECT_EQ(dump["attack"]["success_threshold_db"], 30.0);
  EXPECT_EQ(dump["attack"]["gamma0"], 1.0);
  EXPECT_EQ(dump["attack"]["history"], 100);
  EXPECT_EQ(dump["client"]["learning_rate"], 0.01);
  EXPECT_EQ(dump["client"]["local_epochs"], 1);
  EXPECT_EQ(dump["federation"]["clients"], 1);
  EXPECT_EQ(dump["federation"]["transmit"], "weights");
  EXPECT_EQ(dump["defense"]["kind"], "none");
  EXPECT_EQ(dump["trials"]["count"], 20);
  EXPECT_EQ(dump["data"]["source"], "synthetic");
  // Echo-dump parses back to the same document.
  EXPECT_EQ(config_to_json(parse_config(dump)), dump);
}

TEST(Config, UnknownKeySuggestsClosest) {
  try {
    parse_config(nlohmann::json::parse(R"({"schema_version": 1, "attack": {"optimiser": "adam"}})"));
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("attack.optimiser"), std::string::npos) << msg;
    EXPECT_NE(msg.find("did you mean 'optimizer'"), std::string::npos) << msg;
  }
  try {
    parse_config(nlohmann::json::parse(R"({"schema_version": 1, "learning_rate": 0.1})"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("client.learning_rate"), std::string::npos) << e.what();
  }
}

TEST(Config, SchemaViolationsNameTheKey) {
  auto error_of = [](const char* text) {
    try {
      parse_config(nlohmann::json::parse(text));
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(error_of(R"({"model": "tiny-mlp"})").find("schema_version"), std::string::npos);
  EXPECT_NE(error_of(R"({"schema_version": 2})").find("schema_version"), std::string::npos);
  EXPECT_NE(error_of(R"({"schema_version": 1, "attack": {"lr": "fast"}})").find("attack.lr"), std::string::npos);
  EXPECT_NE(error_of(R"({"schema_version": 1, "attack": {"iterations": -1}})").find("attack.iterations"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"schema_version": 1, "attack": {"objective": "dlm+"}})").find("attack.objective"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"schema_version": 1, "model": "resnet"})").find("resnet"), std::string::npos);
  EXPECT_NE(error_of(R"({"schema_version": 1, "client": {"learning_rate": 0}})").find("learning"), std::string::npos);
  EXPECT_NE(error_of(R"({"schema_version": 1, "sweep": {"kind": "gamma"}})").find("sweep.values"), std::string::npos);
}

TEST(Config, InverseLearningRateGamma) {
  const RunConfig cfg = parse_config(nlohmann::json::parse(
      R"({"schema_version": 1, "client": {"learning_rate": 0.02}, "attack": {"objective": "dlm", "gamma0": "1/lr"}})"));
  EXPECT_DOUBLE_EQ(cfg.resolved_attack().objective.gamma0, 50.0);
  EXPECT_EQ(config_to_json(cfg)["attack"]["gamma0"], "1/lr");
}

TEST(Config, DefenseSections) {
  const RunConfig dp = parse_config(nlohmann::json::parse(
      R"({"schema_version": 1, "defense": {"kind": "dp", "noise": "laplacian", "clip": 10, "sigma": 0.001}})"));
  const auto& d = std::get<DPConfig>(dp.defense);
  EXPECT_EQ(d.noise, NoiseKind::kLaplacian);
  EXPECT_EQ(d.clip, 10.0);
  const RunConfig sp = parse_config(
      nlohmann::json::parse(R"({"schema_version": 1, "defense": {"kind": "sparsify", "rate": 0.2}})"));
  EXPECT_EQ(std::get<SparsifyConfig>(sp.defense).rate, 0.2);
}

TEST(Config, HashTracksContent) {
  RunConfig a;
  RunConfig b;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.attack.iterations = 10;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
}

TrialRecord sample_record(std::size_t trial) {
  TrialRecord r;
  r.algorithm = "dlm-plus";
  r.trial = trial;
  r.seed = 40 + trial;
  r.success = trial % 2 == 0;
  r.psnr = 31.25 + 0.1 / 3.0;
  r.ssim = 0.9123456789;
  r.per_image_psnr = {r.psnr};
  r.labels = {3};
  r.true_labels = {3};
  r.labels_correct = 1;
  r.iterations = 4000;
  r.final_loss = 1.0 / 7.0 * 1e-9;
  r.alpha_estimate = 0.0101;
  r.loss_trace = {2.0, 1.5, 1.0 / 3.0};
  r.psnr_trace = {5.0, 6.0, 7.0};
  r.elapsed_seconds = 0.5;
  return r;
}

TEST(Results, RoundTripIsFieldEqual) {
  TempDir dir;
  std::vector<TrialRecord> recs = {sample_record(0), sample_record(1)};
  recs[1].status = "diverged";
  recs[1].detail = "objective became non-finite at iteration 12";
  recs[1].gamma = 99.5;
  recs[1].parameter = "sigma";
  recs[1].value = 1e-3;
  append_results(recs, dir / "r.jsonl");
  EXPECT_EQ(read_results(dir / "r.jsonl"), recs);
}

TEST(Results, AppendOnlyAndPartialLineSkipped) {
  TempDir dir;
  append_results({sample_record(0)}, dir / "r.jsonl");
  append_results({sample_record(1)}, dir / "r.jsonl");
  {
    std::ofstream out(dir / "r.jsonl", std::ios::app);
    out << R"({"algorithm":"dlm-plus","tri)";
  }
  const auto back = read_results(dir / "r.jsonl");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1], sample_record(1));
}

TEST(Results, MalformedCompleteLineIsFormatError) {
  TempDir dir;
  {
    std::ofstream out(dir / "r.jsonl");
    out << "not json\n";
  }
  EXPECT_THROW(read_results(dir / "r.jsonl"), FormatError);
}

TEST(Results, SummaryRowsAndCsv) {
  std::vector<TrialRecord> recs;
  for (std::size_t t = 0; t < 4; ++t) recs.push_back(sample_record(t));
  recs[0].psnr = 29.0;
  recs[1].psnr = 31.0;
  recs[2].psnr = 40.0;
  recs[3].status = "diverged";
  const auto rows = summarize(recs, 30.0);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_DOUBLE_EQ(rows[0].acc, 0.5);
  EXPECT_DOUBLE_EQ(rows[0].psnr, 25.0);
  EXPECT_EQ(rows[0].n_trials, 4u);
  EXPECT_EQ(rows[0].seed_base, 40u);
  const std::string csv = summary_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "algorithm,acc,psnr,ssim,n_trials,seed_base");
  EXPECT_NE(csv.find("dlm-plus,0.5000,25.0000,"), std::string::npos) << csv;
}

TEST(Results, SweepColumnsAppearWithParameters) {
  auto a = sample_record(0), b = sample_record(1);
  a.parameter = b.parameter = "sigma";
  a.value = 1e-5;
  b.value = 1e-2;
  const auto rows = summarize({a, b}, 30.0);
  ASSERT_EQ(rows.size(), 2u);
  const std::string csv = summary_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "algorithm,acc,psnr,ssim,n_trials,seed_base,parameter,value");
}

WiretapLog sample_log() {
  std::mt19937_64 rng(5);
  WiretapLog log;
  log.spec_fingerprint = 0x0123456789abcdefULL;
  for (std::size_t i = 0; i < 2; ++i) {
    ModelWeights before({random_tensor({3, 4}, rng), random_tensor({5}, rng)}, log.spec_fingerprint);
    ModelWeights payload({random_tensor({3, 4}, rng), random_tensor({5}, rng)}, log.spec_fingerprint);
    payload.mutable_tensors()[1][0] = -0.0;
    payload.mutable_tensors()[1][1] = 5e-324;
    log.updates.emplace_back(i, 1 - i, i == 0 ? PayloadKind::kWeights : PayloadKind::kGradients, before, payload,
                             std::vector<std::size_t>{7, i}, i == 0 ? "none" : "sparsify(0.2)");
  }
  return log;
}

bool bit_equal(const WiretapLog& a, const WiretapLog& b) { return encode_wiretap(a) == encode_wiretap(b); }

TEST(Wiretap, BinaryRoundTripIsBitExact) {
  TempDir dir;
  const WiretapLog log = sample_log();
  write_wiretap(log, dir / "w.bin");
  const WiretapLog back = read_wiretap(dir / "w.bin");
  EXPECT_EQ(back, log);
  EXPECT_TRUE(bit_equal(back, log));
  EXPECT_TRUE(std::signbit(back.updates[0].payload()[1][0]));
}

TEST(Wiretap, JsonRoundTripIsBitExact) {
  const WiretapLog log = sample_log();
  const WiretapLog back = wiretap_from_json(nlohmann::json::parse(wiretap_to_json(log).dump()));
  EXPECT_TRUE(bit_equal(back, log));
}

TEST(Wiretap, CorruptInputsReportOffsets) {
  auto bytes = encode_wiretap(sample_log());
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_wiretap(bad), FormatError);
  for (std::size_t cut : {std::size_t{4}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
    std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    EXPECT_THROW(decode_wiretap(truncated), FormatError) << cut;
  }
  auto trailing = bytes;
  trailing.push_back(0);
  try {
    decode_wiretap(trailing);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), bytes.size());
  }
}

}  // namespace
}  // namespace weightleak
