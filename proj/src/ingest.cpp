// SPDX-License-Identifier: Apache-2.0

#include "mdbpe/ingest.hpp"

#include <cctype>

#include "mdbpe/binary_io.hpp"
#include "mdbpe/error.hpp"

namespace mdbpe {

void IngestSpec::validate() const {
  if (mode == IngestMode::kQuantizedColor && (color_divisor < 1 || color_divisor > 256)) {
    throw Error(ErrorCategory::kInvalidArgument, "color divisor must be in [1, 256]");
  }
  if (mode == IngestMode::kRawIndices && raw_base_size == 0) {
    throw Error(ErrorCategory::kInvalidArgument, "raw indices need a positive base size");
  }
}

TokenClass IngestSpec::base_size() const {
  switch (mode) {
    case IngestMode::kGreyscale:
      return 256;
    case IngestMode::kQuantizedColor: {
      const TokenClass levels = 255 / color_divisor + 1;
      return levels * levels * levels;
    }
    case IngestMode::kVoxelOccupancy:
      return 2;
    case IngestMode::kRawIndices:
      return raw_base_size;
  }
  return 0;
}

IngestMode parse_ingest_mode(std::string_view name) {
  if (name == "greyscale") return IngestMode::kGreyscale;
  if (name == "quantized-color") return IngestMode::kQuantizedColor;
  if (name == "voxel-occupancy") return IngestMode::kVoxelOccupancy;
  if (name == "raw-indices") return IngestMode::kRawIndices;
  throw Error(ErrorCategory::kInvalidArgument, "unknown ingest mode '" + std::string(name) + "'");
}

TokenGrid greyscale_to_grid(std::uint32_t height, std::uint32_t width,
                            std::span<const int> intensities) {
  const Dims dims{height, width};
  if (intensities.size() != dims.cell_count()) {
    throw Error(ErrorCategory::kInvalidArgument, "pixel count does not match image size");
  }
  std::vector<TokenClass> classes(intensities.size());
  for (std::size_t i = 0; i < intensities.size(); ++i) {
    if (intensities[i] < 0 || intensities[i] > 255) {
      throw Error(ErrorCategory::kOutOfRange,
                  "intensity " + std::to_string(intensities[i]) + " outside [0, 255]");
    }
    classes[i] = static_cast<TokenClass>(intensities[i]);
  }
  return TokenGrid::from_classes(dims, classes, 256);
}

TokenGrid quantize_color_to_grid(std::uint32_t height, std::uint32_t width,
                                 std::span<const Rgb> pixels, std::uint32_t divisor) {
  IngestSpec spec{IngestMode::kQuantizedColor, divisor, 0};
  spec.validate();
  const Dims dims{height, width};
  if (pixels.size() != dims.cell_count()) {
    throw Error(ErrorCategory::kInvalidArgument, "pixel count does not match image size");
  }
  const TokenClass levels = 255 / divisor + 1;
  std::vector<TokenClass> classes(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const auto& p = pixels[i];
    classes[i] = (p.r / divisor) * levels * levels + (p.g / divisor) * levels + p.b / divisor;
  }
  return TokenGrid::from_classes(dims, classes, spec.base_size());
}

TokenGrid voxels_to_grid(const Dims& dims, std::span<const std::uint8_t> occupancy) {
  if (dims.ndim() != 3) {
    throw Error(ErrorCategory::kInvalidArgument, "voxel volumes need three axes");
  }
  if (occupancy.size() != dims.cell_count()) {
    throw Error(ErrorCategory::kInvalidArgument, "occupancy size does not match volume");
  }
  std::vector<TokenClass> classes(occupancy.size());
  for (std::size_t i = 0; i < occupancy.size(); ++i) classes[i] = occupancy[i] != 0 ? 1 : 0;
  return TokenGrid::from_classes(dims, classes, 2);
}

TokenGrid raw_indices_to_grid(const Dims& dims, std::span<const TokenClass> indices,
                              TokenClass base_size) {
  return TokenGrid::from_classes(dims, indices, base_size);
}

namespace {

// Reads the next whitespace-separated header integer, skipping comments.
std::uint32_t pnm_header_int(std::string_view bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
  std::uint64_t v = 0;
  const std::size_t start = pos;
  while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
    v = v * 10 + static_cast<std::uint64_t>(bytes[pos] - '0');
    if (v > 0xFFFFFFFFull) throw Error(ErrorCategory::kFormat, "PNM header value too large");
    ++pos;
  }
  if (pos == start) throw Error(ErrorCategory::kFormat, "malformed PNM header");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

Image read_pnm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw Error(ErrorCategory::kFormat, "not a binary PGM/PPM file");
  }
  Image img;
  img.channels = bytes[1] == '5' ? 1 : 3;
  std::size_t pos = 2;
  img.width = pnm_header_int(bytes, pos);
  img.height = pnm_header_int(bytes, pos);
  const std::uint32_t maxval = pnm_header_int(bytes, pos);
  if (maxval == 0 || maxval > 255) {
    throw Error(ErrorCategory::kFormat, "only 8-bit PNM files are supported");
  }
  if (img.width == 0 || img.height == 0) throw Error(ErrorCategory::kFormat, "empty image");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw Error(ErrorCategory::kFormat, "malformed PNM header");
  }
  ++pos;
  const std::size_t n = std::size_t{img.width} * img.height * img.channels;
  if (bytes.size() - pos < n) throw Error(ErrorCategory::kFormat, "PNM pixel data truncated");
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                    bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
  return img;
}

std::string write_pnm(const Image& image) {
  std::string out = (image.channels == 1 ? "P5\n" : "P6\n") + std::to_string(image.width) +
                    " " + std::to_string(image.height) + "\n255\n";
  out.append(image.pixels.begin(), image.pixels.end());
  return out;
}

std::string write_voxels(const Dims& dims, std::span<const std::uint8_t> occupancy) {
  if (dims.ndim() != 3 || occupancy.size() != dims.cell_count()) {
    throw Error(ErrorCategory::kInvalidArgument, "voxel volume needs three axes");
  }
  ByteWriter out;
  out.magic("MDVX");
  out.u8(0x01);
  for (auto e : dims.extents()) out.u32(e);
  std::uint8_t byte = 0;
  for (std::size_t i = 0; i < occupancy.size(); ++i) {
    if (occupancy[i] != 0) byte |= static_cast<std::uint8_t>(1u << (i % 8));
    if (i % 8 == 7) {
      out.u8(byte);
      byte = 0;
    }
  }
  if (occupancy.size() % 8 != 0) out.u8(byte);
  return std::move(out).bytes();
}

std::vector<std::uint8_t> read_voxels(std::string_view bytes, Dims& dims) {
  ByteReader in(bytes);
  in.expect_magic("MDVX");
  if (in.u8() != 0x01) throw Error(ErrorCategory::kFormat, "unsupported voxel version");
  std::array<std::uint32_t, 3> extents{in.u32(), in.u32(), in.u32()};
  try {
    dims = Dims(extents);
  } catch (const Error& e) {
    throw Error(ErrorCategory::kFormat, e.what());
  }
  const std::size_t n = dims.cell_count();
  const auto packed = in.take((n + 7) / 8);
  in.expect_done();
  std::vector<std::uint8_t> occupancy(n);
  for (std::size_t i = 0; i < n; ++i) {
    occupancy[i] = (static_cast<unsigned char>(packed[i / 8]) >> (i % 8)) & 1u;
  }
  return occupancy;
}

TokenGrid ingest_bytes(std::string_view bytes, const IngestSpec& spec) {
  spec.validate();
  switch (spec.mode) {
    case IngestMode::kGreyscale: {
      const Image img = read_pnm(bytes);
      if (img.channels != 1) throw Error(ErrorCategory::kFormat, "greyscale mode needs a PGM");
      std::vector<int> v(img.pixels.begin(), img.pixels.end());
      return greyscale_to_grid(img.height, img.width, v);
    }
    case IngestMode::kQuantizedColor: {
      const Image img = read_pnm(bytes);
      if (img.channels != 3) throw Error(ErrorCategory::kFormat, "color mode needs a PPM");
      std::vector<Rgb> px(img.pixels.size() / 3);
      for (std::size_t i = 0; i < px.size(); ++i) {
        px[i] = {img.pixels[3 * i], img.pixels[3 * i + 1], img.pixels[3 * i + 2]};
      }
      return quantize_color_to_grid(img.height, img.width, px, spec.color_divisor);
    }
    case IngestMode::kVoxelOccupancy: {
      Dims dims;
      const auto occ = read_voxels(bytes, dims);
      return voxels_to_grid(dims, occ);
    }
    case IngestMode::kRawIndices: {
      const TokenGrid g = read_grid(bytes);
      return raw_indices_to_grid(g.dims(), g.classes(), spec.raw_base_size);
    }
  }
  throw Error(ErrorCategory::kInvalidArgument, "unknown ingest mode");
}

}  // namespace mdbpe
