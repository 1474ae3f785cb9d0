// SPDX-License-Identifier: Apache-2.0

#include "mdbpe/grid.hpp"

#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "mdbpe/binary_io.hpp"
#include "mdbpe/error.hpp"

namespace mdbpe {

std::string_view to_string(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kInvalidArgument:
      return "invalid_argument";
    case ErrorCategory::kOutOfRange:
      return "out_of_range";
    case ErrorCategory::kFormat:
      return "format";
    case ErrorCategory::kConsistency:
      return "consistency";
    case ErrorCategory::kDecode:
      return "decode";
    case ErrorCategory::kIo:
      return "io";
  }
  return "unknown";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCategory::kIo, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCategory::kIo, "write failed for " + path);
}

Dims::Dims(std::initializer_list<std::uint32_t> extents)
    : Dims(std::span<const std::uint32_t>(extents.begin(), extents.size())) {}

Dims::Dims(std::span<const std::uint32_t> extents) {
  if (extents.empty() || extents.size() > kMaxAxes) {
    throw Error(ErrorCategory::kInvalidArgument,
                "grid must have 1 to 3 axes, got " +
                    std::to_string(extents.size()));
  }
  ndim_ = extents.size();
  for (std::size_t k = 0; k < ndim_; ++k) {
    if (extents[k] == 0) {
      throw Error(ErrorCategory::kInvalidArgument, "grid extent must be > 0");
    }
    extent_[k] = extents[k];
  }
  if (cell_count() > (std::size_t{1} << 30)) {
    throw Error(ErrorCategory::kInvalidArgument, "grid too large");
  }
}

std::size_t Dims::cell_count() const {
  if (ndim_ == 0) return 0;
  std::size_t n = 1;
  for (std::size_t k = 0; k < ndim_; ++k) n *= extent_[k];
  return n;
}

std::size_t Dims::stride(std::size_t axis) const {
  std::size_t s = 1;
  for (std::size_t k = axis + 1; k < ndim_; ++k) s *= extent_[k];
  return s;
}

std::size_t Dims::flat_index(const Position& pos) const {
  std::size_t flat = 0;
  for (std::size_t k = 0; k < ndim_; ++k) flat = flat * extent_[k] + pos.coords[k];
  return flat;
}

Position Dims::position(std::size_t flat) const {
  Position pos;
  for (std::size_t k = ndim_; k-- > 0;) {
    pos.coords[k] = static_cast<std::uint32_t>(flat % extent_[k]);
    flat /= extent_[k];
  }
  return pos;
}

bool Dims::contains(const Position& pos) const {
  for (std::size_t k = 0; k < ndim_; ++k) {
    if (pos.coords[k] >= extent_[k]) return false;
  }
  for (std::size_t k = ndim_; k < kMaxAxes; ++k) {
    if (pos.coords[k] != 0) return false;
  }
  return true;
}

bool Dims::translate(const Position& pos, const Offset& offset,
                     Position& out) const {
  for (std::size_t k = 0; k < ndim_; ++k) {
    const std::int64_t c = static_cast<std::int64_t>(pos.coords[k]) + offset[k];
    if (c < 0 || c >= extent_[k]) return false;
    out.coords[k] = static_cast<std::uint32_t>(c);
  }
  for (std::size_t k = ndim_; k < kMaxAxes; ++k) {
    if (offset[k] != 0) return false;
    out.coords[k] = 0;
  }
  return true;
}

std::string Dims::to_string() const {
  std::string s;
  for (std::size_t k = 0; k < ndim_; ++k) {
    if (k) s += 'x';
    s += std::to_string(extent_[k]);
  }
  return s;
}

Offset difference(const Position& a, const Position& b) {
  Offset d{};
  for (std::size_t k = 0; k < kMaxAxes; ++k) {
    d[k] = static_cast<std::int32_t>(a.coords[k]) -
           static_cast<std::int32_t>(b.coords[k]);
  }
  return d;
}

std::vector<Position> scan_order(const Dims& dims) {
  std::vector<Position> out;
  out.reserve(dims.cell_count());
  for (std::size_t flat = 0; flat < dims.cell_count(); ++flat) {
    out.push_back(dims.position(flat));
  }
  return out;
}

TokenGrid::TokenGrid(Dims dims, std::vector<TokenClass> classes,
                     std::vector<InstanceId> ids)
    : dims_(dims), classes_(std::move(classes)), ids_(std::move(ids)) {
  if (classes_.size() != dims_.cell_count() ||
      ids_.size() != dims_.cell_count()) {
    throw Error(ErrorCategory::kInvalidArgument,
                "label arrays must have " +
                    std::to_string(dims_.cell_count()) + " entries for grid " +
                    dims_.to_string());
  }
}

TokenGrid TokenGrid::from_classes(const Dims& dims,
                                  std::span<const TokenClass> classes,
                                  TokenClass base_size) {
  if (classes.size() != dims.cell_count()) {
    throw Error(ErrorCategory::kInvalidArgument,
                "expected " + std::to_string(dims.cell_count()) +
                    " classes for grid " + dims.to_string() + ", got " +
                    std::to_string(classes.size()));
  }
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] >= base_size) {
      throw Error(ErrorCategory::kOutOfRange,
                  "class " + std::to_string(classes[i]) + " at cell " +
                      std::to_string(i) + " exceeds base size " +
                      std::to_string(base_size));
    }
  }
  std::vector<InstanceId> ids(classes.size());
  std::iota(ids.begin(), ids.end(), InstanceId{0});
  return TokenGrid(dims, {classes.begin(), classes.end()}, std::move(ids));
}

std::size_t TokenGrid::instance_count() const {
  std::unordered_map<InstanceId, bool> seen;
  seen.reserve(ids_.size());
  for (InstanceId id : ids_) seen.emplace(id, true);
  return seen.size();
}

namespace {

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace

void TokenGrid::validate() const {
  std::unordered_map<InstanceId, std::size_t> first_cell;
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    auto [it, inserted] = first_cell.emplace(ids_[i], i);
    if (!inserted && classes_[it->second] != classes_[i]) {
      throw Error(ErrorCategory::kConsistency,
                  "instance " + std::to_string(ids_[i]) +
                      " carries more than one class");
    }
  }
  std::vector<std::size_t> parent(ids_.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    const Position pos = dims_.position(i);
    for (std::size_t axis = 0; axis < dims_.ndim(); ++axis) {
      if (pos.coords[axis] + 1 >= dims_.extent(axis)) continue;
      const std::size_t j = i + dims_.stride(axis);
      if (ids_[i] == ids_[j]) parent[find_root(parent, i)] = find_root(parent, j);
    }
  }
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (find_root(parent, i) != find_root(parent, first_cell[ids_[i]])) {
      throw Error(ErrorCategory::kConsistency,
                  "instance " + std::to_string(ids_[i]) +
                      " is not edge-connected");
    }
  }
}

Position anchor_of(const TokenGrid& grid, InstanceId id) {
  const auto ids = grid.ids();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == id) return grid.dims().position(i);
  }
  throw Error(ErrorCategory::kInvalidArgument,
              "unknown instance id " + std::to_string(id));
}

void write_dims(ByteWriter& out, const Dims& dims) {
  out.u8(static_cast<std::uint8_t>(dims.ndim()));
  for (auto e : dims.extents()) out.u32(e);
}

Dims read_dims(ByteReader& in) {
  const std::size_t ndim = in.u8();
  if (ndim == 0 || ndim > kMaxAxes) {
    throw Error(ErrorCategory::kFormat,
                "unsupported axis count " + std::to_string(ndim));
  }
  std::array<std::uint32_t, kMaxAxes> extents{};
  for (std::size_t k = 0; k < ndim; ++k) extents[k] = in.u32();
  try {
    return Dims(std::span<const std::uint32_t>(extents.data(), ndim));
  } catch (const Error& e) {
    throw Error(ErrorCategory::kFormat, e.what());
  }
}

namespace {

constexpr std::uint8_t kFormatVersion = 0x01;

void write_grid_payload(ByteWriter& out, const TokenGrid& grid) {
  write_dims(out, grid.dims());
  for (TokenClass c : grid.classes()) out.u32(c);
}

TokenGrid read_grid_payload(ByteReader& in) {
  const Dims dims = read_dims(in);
  if (in.remaining() / 4 < dims.cell_count()) {
    throw Error(ErrorCategory::kFormat, "grid payload truncated");
  }
  std::vector<TokenClass> classes(dims.cell_count());
  for (auto& c : classes) c = in.u32();
  std::vector<InstanceId> ids(classes.size());
  std::iota(ids.begin(), ids.end(), InstanceId{0});
  return TokenGrid(dims, std::move(classes), std::move(ids));
}

void expect_version(ByteReader& in) {
  const auto v = in.u8();
  if (v != kFormatVersion) {
    throw Error(ErrorCategory::kFormat,
                "unsupported version " + std::to_string(v));
  }
}

}  // namespace

std::string write_grid(const TokenGrid& grid) {
  ByteWriter out;
  out.magic("MDTG");
  out.u8(kFormatVersion);
  write_grid_payload(out, grid);
  return std::move(out).bytes();
}

TokenGrid read_grid(std::string_view bytes) {
  ByteReader in(bytes);
  in.expect_magic("MDTG");
  expect_version(in);
  TokenGrid grid = read_grid_payload(in);
  in.expect_done();
  return grid;
}

std::string write_grid_corpus(std::span<const TokenGrid> grids) {
  ByteWriter out;
  out.magic("MDTC");
  out.u8(kFormatVersion);
  out.u32(static_cast<std::uint32_t>(grids.size()));
  for (const auto& g : grids) write_grid_payload(out, g);
  return std::move(out).bytes();
}

std::vector<TokenGrid> read_grid_corpus(std::string_view bytes) {
  ByteReader in(bytes);
  in.expect_magic("MDTC");
  expect_version(in);
  const std::uint32_t count = in.u32();
  std::vector<TokenGrid> grids;
  grids.reserve(std::min<std::size_t>(count, in.remaining() / 5));
  for (std::uint32_t i = 0; i < count; ++i) grids.push_back(read_grid_payload(in));
  in.expect_done();
  return grids;
}

std::vector<TokenGrid> read_grids_any(std::string_view bytes) {
  if (bytes.substr(0, 4) == "MDTG") return {read_grid(bytes)};
  return read_grid_corpus(bytes);
}

}  // namespace mdbpe
