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

#include "weightleak/dataset.h"

#include <algorithm>

#include "weightleak/errors.h"

namespace weightleak {

Dataset Dataset::subset(std::span<const std::size_t> positions) const {
  Dataset out;
  out.num_classes = num_classes;
  std::vector<Tensor> parts;
  parts.reserve(positions.size());
  for (std::size_t p : positions) {
    if (p >= size()) throw ArgumentError("subset: position " + std::to_string(p) + " out of range");
    parts.push_back(image(p));
    out.labels.push_back(labels[p]);
    out.ids.push_back(ids[p]);
  }
  out.images = stack_leading(parts);
  return out;
}

std::size_t Dataset::position_of(std::size_t id) const {
  auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) throw ArgumentError("no example with id " + std::to_string(id));
  return static_cast<std::size_t>(it - ids.begin());
}

Tensor Dataset::images_for_ids(std::span<const std::size_t> sample_ids) const {
  std::vector<Tensor> parts;
  for (std::size_t id : sample_ids) parts.push_back(image(position_of(id)));
  return stack_leading(parts);
}

}  // namespace weightleak
