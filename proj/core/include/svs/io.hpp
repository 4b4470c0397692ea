// Copyright Contributors to the svs project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "svs/image.hpp"

namespace svs {

// Writes an 8-bit binary PPM (P6). The grid must have 3 channels; values are
// clamped to [0,1] and quantized to 0..255. When `seed` is set, a
// "# seed=<value>" comment line is emitted between the magic and dimensions.
void write_ppm(const std::string& path, const Grid& rgb,
               std::optional<std::uint64_t> seed = std::nullopt);

struct PpmImage {
  Grid image;
  std::optional<std::uint64_t> seed;
};

PpmImage read_ppm(const std::string& path);

// Writes a single-channel PFM ("Pf"), little-endian (scale -1.0), rows stored
// bottom-up as the format requires.
void write_pfm(const std::string& path, const Grid& gray);

Grid read_pfm(const std::string& path);

}  // namespace svs
