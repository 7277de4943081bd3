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

#ifndef WEIGHTLEAK_DATA_IO_H_
#define WEIGHTLEAK_DATA_IO_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "weightleak/dataset.h"
#include "weightleak/tensor.h"

namespace weightleak {

// IDX image/label pair (MNIST layout). Pixels are scaled to [0, 1]; with
// `replicate_to_rgb` the single channel is copied into three.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 bool replicate_to_rgb = false);
// The same from in-memory buffers.
Dataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels,
                  bool replicate_to_rgb = false);

enum class CifarVariant { kCifar10, kCifar100 };

// CIFAR binary batches: one label byte (two for cifar100, fine label second)
// then 3072 pixel bytes per record.
Dataset load_cifar_binary(const std::filesystem::path& path, CifarVariant variant);
Dataset parse_cifar_binary(std::span<const std::uint8_t> bytes, CifarVariant variant);

// Class-conditional smooth images: each class owns a random low-frequency
// pattern per channel; samples add seeded pixel noise and are clamped to
// [0, 1]. Labels are assigned round-robin.
Dataset synthetic_dataset(std::size_t n, const Shape& image_shape, std::size_t num_classes,
                          std::uint64_t seed);

enum class ImageFormat { kPgm, kPpm };

// Writes a binary P5 (1 channel) or P6 (3 channels) file; accepts [C, H, W]
// or [1, C, H, W]. Values are quantized as floor(255 v + 0.5).
void export_image(const Tensor& image, const std::filesystem::path& path, ImageFormat format);
// Reads a binary P5/P6 file back into [C, H, W] with values byte / 255.
Tensor read_pnm(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace weightleak

#endif  // WEIGHTLEAK_DATA_IO_H_
