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

#ifndef WEIGHTLEAK_DATASET_H_
#define WEIGHTLEAK_DATASET_H_

#include <cstddef>
#include <span>
#include <vector>

#include "weightleak/tensor.h"

namespace weightleak {

// Labelled images in [0,1], stored as one [N, C, H, W] tensor.
struct Dataset {
  Tensor images;
  std::vector<int> labels;
  std::size_t num_classes = 0;
  // Identifier of each example in the dataset it was first loaded from.
  std::vector<std::size_t> ids;

  std::size_t size() const { return labels.size(); }
  Shape image_shape() const { return {images.dim(1), images.dim(2), images.dim(3)}; }

  // [1, C, H, W]
  Tensor image(std::size_t i) const { return slice_leading(images, i, 1); }
  // Examples at the given positions (not ids), keeping their ids.
  Dataset subset(std::span<const std::size_t> positions) const;
  // Position of the example with identifier `id`; throws ArgumentError if absent.
  std::size_t position_of(std::size_t id) const;
  // Stacked images for a list of ids, [n, C, H, W].
  Tensor images_for_ids(std::span<const std::size_t> sample_ids) const;
};

}  // namespace weightleak

#endif  // WEIGHTLEAK_DATASET_H_
