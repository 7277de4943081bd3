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

// Persistence for wiretap logs.
//
// Binary layout (all integers little-endian, doubles as their IEEE-754 bits):
//   "WLWIRE01"            8 bytes
//   spec fingerprint      u64
//   update count          u64
//   per update:
//     round, client       u64, u64
//     payload kind        u8 (0 weights, 1 gradients)
//     defense label       u32 length + bytes
//     sample refs         u64 count + u64 each
//     global_before       weights block
//     payload             weights block
//   weights block: u64 fingerprint, u32 tensor count, then per tensor
//   u32 rank, u64 per dim, f64 per element.

#ifndef WEIGHTLEAK_WIRETAP_IO_H_
#define WEIGHTLEAK_WIRETAP_IO_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"
#include "weightleak/flsim.h"

namespace weightleak {

std::vector<std::uint8_t> encode_wiretap(const WiretapLog& log);
// Throws FormatError with the failing offset.
WiretapLog decode_wiretap(std::span<const std::uint8_t> bytes);

void write_wiretap(const WiretapLog& log, const std::filesystem::path& path);
WiretapLog read_wiretap(const std::filesystem::path& path);

// Human-readable form. Doubles survive the round trip exactly.
nlohmann::json wiretap_to_json(const WiretapLog& log);
WiretapLog wiretap_from_json(const nlohmann::json& doc);

}  // namespace weightleak

#endif  // WEIGHTLEAK_WIRETAP_IO_H_
