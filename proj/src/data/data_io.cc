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

#include "weightleak/data_io.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>

#include "weightleak/errors.h"
#include "weightleak/seed.h"

namespace weightleak {
namespace {

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
constexpr std::size_t kCifarPixels = 3 * 32 * 32;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset, const char* what) {
  if (offset + 4 > bytes.size()) {
    throw FormatError(std::string(what) + ": truncated header", bytes.size());
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::vector<std::size_t> sequential_ids(std::size_t n) {
  std::vector<std::size_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i;
  return ids;
}

}  // namespace

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Dataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels,
                  bool replicate_to_rgb) {
  if (images.empty()) throw FormatError("idx images: empty file", 0);
  if (labels.empty()) throw FormatError("idx labels: empty file", 0);
  if (read_be32(images, 0, "idx images") != kIdxImageMagic) {
    throw FormatError("idx images: bad magic (expected 0x00000803)", 0);
  }
  if (read_be32(labels, 0, "idx labels") != kIdxLabelMagic) {
    throw FormatError("idx labels: bad magic (expected 0x00000801)", 0);
  }
  const std::size_t n = read_be32(images, 4, "idx images");
  const std::size_t rows = read_be32(images, 8, "idx images");
  const std::size_t cols = read_be32(images, 12, "idx images");
  const std::size_t n_labels = read_be32(labels, 4, "idx labels");
  if (n == 0 || rows == 0 || cols == 0) throw FormatError("idx images: zero extent", 4);
  if (n != n_labels) {
    throw FormatError("idx: " + std::to_string(n) + " images but " + std::to_string(n_labels) +
                          " labels",
                      4);
  }
  const std::size_t pixels = rows * cols;
  if (images.size() < 16 + n * pixels) throw FormatError("idx images: truncated pixel data", images.size());
  if (labels.size() < 8 + n) throw FormatError("idx labels: truncated label data", labels.size());

  const std::size_t channels = replicate_to_rgb ? 3 : 1;
  Tensor data({n, channels, rows, cols});
  auto out = data.mutable_data();
  Dataset ds;
  ds.num_classes = 10;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t p = 0; p < pixels; ++p) {
        out[(i * channels + c) * pixels + p] = images[16 + i * pixels + p] / 255.0;
      }
    }
    const std::uint8_t label = labels[8 + i];
    if (label >= ds.num_classes) {
      throw FormatError("idx labels: label " + std::to_string(label) + " out of range", 8 + i);
    }
    ds.labels.push_back(label);
  }
  ds.images = std::move(data);
  ds.ids = sequential_ids(n);
  return ds;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 bool replicate_to_rgb) {
  const auto img = read_file(images);
  const auto lab = read_file(labels);
  return parse_idx(img, lab, replicate_to_rgb);
}

Dataset parse_cifar_binary(std::span<const std::uint8_t> bytes, CifarVariant variant) {
  const std::size_t label_bytes = variant == CifarVariant::kCifar10 ? 1 : 2;
  const std::size_t record = label_bytes + kCifarPixels;
  if (bytes.empty()) throw FormatError("cifar: empty file", 0);
  if (bytes.size() % record != 0) {
    throw FormatError("cifar: size " + std::to_string(bytes.size()) + " is not a multiple of the " +
                          std::to_string(record) + "-byte record",
                      bytes.size() - bytes.size() % record);
  }
  const std::size_t n = bytes.size() / record;
  Dataset ds;
  ds.num_classes = variant == CifarVariant::kCifar10 ? 10 : 100;
  Tensor data({n, 3, 32, 32});
  auto out = data.mutable_data();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t base = i * record;
    if (variant == CifarVariant::kCifar100 && bytes[base] >= 20) {
      throw FormatError("cifar100: coarse label " + std::to_string(bytes[base]) + " out of range", base);
    }
    const std::size_t label_at = base + label_bytes - 1;
    if (bytes[label_at] >= ds.num_classes) {
      throw FormatError("cifar: label " + std::to_string(bytes[label_at]) + " out of range", label_at);
    }
    ds.labels.push_back(bytes[label_at]);
    for (std::size_t p = 0; p < kCifarPixels; ++p) {
      out[i * kCifarPixels + p] = bytes[base + label_bytes + p] / 255.0;
    }
  }
  ds.images = std::move(data);
  ds.ids = sequential_ids(n);
  return ds;
}

Dataset load_cifar_binary(const std::filesystem::path& path, CifarVariant variant) {
  return parse_cifar_binary(read_file(path), variant);
}

Dataset synthetic_dataset(std::size_t n, const Shape& image_shape, std::size_t num_classes,
                          std::uint64_t seed) {
  if (n < 1) throw ArgumentError("synthetic_dataset: n must be >= 1");
  if (num_classes < 1) throw ArgumentError("synthetic_dataset: num_classes must be >= 1");
  if (image_shape.size() != 3) throw ArgumentError("synthetic_dataset: shape must be [C, H, W]");
  const std::size_t channels = image_shape[0], h = image_shape[1], w = image_shape[2];
  const std::size_t plane = h * w, per_image = channels * plane;

  std::vector<std::vector<double>> patterns(num_classes, std::vector<double>(per_image));
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::mt19937_64 rng(derive_seed(seed, {0x5a7, c}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> freq(0, 2);
    for (std::size_t ch = 0; ch < channels; ++ch) {
      const double base = 0.3 + 0.4 * unit(rng);
      double* out = &patterns[c][ch * plane];
      std::fill(out, out + plane, base);
      for (int m = 0; m < 3; ++m) {
        int fy = freq(rng), fx = freq(rng);
        if (fy == 0 && fx == 0) fx = 1;
        const double amp = 0.1 + 0.1 * unit(rng);
        const double phase = 2.0 * std::numbers::pi * unit(rng);
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            out[y * w + x] += amp * std::cos(2.0 * std::numbers::pi *
                                                 (fy * static_cast<double>(y) / h +
                                                  fx * static_cast<double>(x) / w) +
                                             phase);
          }
        }
      }
    }
  }

  Dataset ds;
  ds.num_classes = num_classes;
  Tensor images({n, channels, h, w});
  auto out = images.mutable_data();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % num_classes;
    std::mt19937_64 rng(derive_seed(seed, {0x7015e, i}));
    std::normal_distribution<double> noise(0.0, 0.05);
    for (std::size_t p = 0; p < per_image; ++p) {
      out[i * per_image + p] = std::clamp(patterns[label][p] + noise(rng), 0.0, 1.0);
    }
    ds.labels.push_back(static_cast<int>(label));
  }
  ds.images = std::move(images);
  ds.ids = sequential_ids(n);
  return ds;
}

void export_image(const Tensor& image, const std::filesystem::path& path, ImageFormat format) {
  Shape s = image.shape();
  if (s.size() == 4 && s[0] == 1) s.erase(s.begin());
  if (s.size() != 3) throw ArgumentError("export_image: expected [C,H,W], got " + shape_string(image.shape()));
  const std::size_t channels = s[0], h = s[1], w = s[2];
  const std::size_t want = format == ImageFormat::kPgm ? 1 : 3;
  if (channels != want) {
    throw ArgumentError("export_image: " + std::string(format == ImageFormat::kPgm ? "pgm" : "ppm") +
                        " needs " + std::to_string(want) + " channel(s), got " + std::to_string(channels));
  }
  std::string bytes = (format == ImageFormat::kPgm ? "P5\n" : "P6\n") + std::to_string(w) + " " +
                      std::to_string(h) + "\n255\n";
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        const double v = image[(c * h + y) * w + x];
        if (!(v >= 0.0 && v <= 1.0)) throw ArgumentError("export_image: pixel outside [0, 1]");
        bytes.push_back(static_cast<char>(static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5))));
      }
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Tensor read_pnm(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    if (t.empty()) throw FormatError("pnm: truncated header", pos);
    return t;
  };
  const std::string magic = token();
  if (magic != "P5" && magic != "P6") throw FormatError("pnm: unsupported magic " + magic, 0);
  const std::size_t channels = magic == "P5" ? 1 : 3;
  const std::size_t w = std::stoul(token()), h = std::stoul(token()), maxval = std::stoul(token());
  if (maxval != 255) throw FormatError("pnm: only 8-bit files are supported", pos);
  ++pos;  // single whitespace after maxval
  if (bytes.size() < pos + channels * h * w) throw FormatError("pnm: truncated pixel data", bytes.size());
  Tensor out({channels, h, w});
  auto d = out.mutable_data();
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < channels; ++c) d[(c * h + y) * w + x] = bytes[pos++] / 255.0;
    }
  }
  return out;
}

}  // namespace weightleak
