// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mdbpe/grid.hpp"

namespace mdbpe {

enum class IngestMode { kGreyscale, kQuantizedColor, kVoxelOccupancy, kRawIndices };

struct IngestSpec {
  IngestMode mode = IngestMode::kGreyscale;
  // Quantized color: each channel becomes channel / color_divisor.
  std::uint32_t color_divisor = 26;
  // Raw indices: exclusive upper bound on the stored classes.
  TokenClass raw_base_size = 0;

  void validate() const;
  // Size of the base vocabulary the mode produces.
  TokenClass base_size() const;
};

IngestMode parse_ingest_mode(std::string_view name);

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
};

// 8-bit image, one or three channels, row-major.
struct Image {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t channels = 1;
  std::vector<std::uint8_t> pixels;
};

// class = intensity, base size 256.
TokenGrid greyscale_to_grid(std::uint32_t height, std::uint32_t width,
                            std::span<const int> intensities);
// class = (R/d)·L² + (G/d)·L + B/d with L = 255/d + 1 levels per channel;
// the default divisor 26 gives 10 levels and base size 1000.
TokenGrid quantize_color_to_grid(std::uint32_t height, std::uint32_t width,
                                 std::span<const Rgb> pixels,
                                 std::uint32_t divisor = 26);
// Occupied cells become class 1, empty ones class 0.
TokenGrid voxels_to_grid(const Dims& dims, std::span<const std::uint8_t> occupancy);
TokenGrid raw_indices_to_grid(const Dims& dims, std::span<const TokenClass> indices,
                              TokenClass base_size);

// Binary PGM (P5) or PPM (P6), maxval <= 255.
Image read_pnm(std::string_view bytes);
std::string write_pnm(const Image& image);

// MDVX: magic, version 0x01, three u32 extents (depth, rows, cols), then
// occupancy bit-packed LSB-first in scan order.
std::string write_voxels(const Dims& dims, std::span<const std::uint8_t> occupancy);
std::vector<std::uint8_t> read_voxels(std::string_view bytes, Dims& dims);

// Turns one input file into a grid according to `spec`. Accepts PGM/PPM for
// the image modes, MDVX for voxels and MDTG for raw indices.
TokenGrid ingest_bytes(std::string_view bytes, const IngestSpec& spec);

}  // namespace mdbpe
