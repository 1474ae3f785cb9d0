// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mdbpe {

inline constexpr std::size_t kMaxAxes = 3;

using TokenClass = std::uint32_t;
using InstanceId = std::uint32_t;

// Signed per-axis displacement. Components past the grid's axis count are 0.
using Offset = std::array<std::int32_t, kMaxAxes>;

struct Position {
  std::array<std::uint32_t, kMaxAxes> coords{};

  friend auto operator<=>(const Position&, const Position&) = default;
};

// Grid extents. Axis 0 is the slowest in scan order, the last axis the
// fastest: (row, col) in 2D, (depth, row, col) in 3D.
class Dims {
 public:
  Dims() = default;
  Dims(std::initializer_list<std::uint32_t> extents);
  explicit Dims(std::span<const std::uint32_t> extents);

  std::size_t ndim() const { return ndim_; }
  std::uint32_t extent(std::size_t axis) const { return extent_[axis]; }
  std::span<const std::uint32_t> extents() const {
    return {extent_.data(), ndim_};
  }
  std::size_t cell_count() const;
  // Flat distance between cells one step apart along `axis`.
  std::size_t stride(std::size_t axis) const;

  std::size_t flat_index(const Position& pos) const;
  Position position(std::size_t flat) const;
  bool contains(const Position& pos) const;

  // Applies `offset` to `pos`; false if the result leaves the grid.
  bool translate(const Position& pos, const Offset& offset,
                 Position& out) const;

  std::string to_string() const;

  friend bool operator==(const Dims&, const Dims&) = default;

 private:
  std::size_t ndim_ = 0;
  std::array<std::uint32_t, kMaxAxes> extent_{};
};

Offset difference(const Position& a, const Position& b);

// All positions of `dims` in scan order (first axis slowest).
std::vector<Position> scan_order(const Dims& dims);

// Cell classes plus unique instance IDs. Cells that share an ID form one
// token instance: same class, edge-connected.
class TokenGrid {
 public:
  TokenGrid() = default;
  // Takes both label arrays as-is; call validate() for the full invariant
  // check.
  TokenGrid(Dims dims, std::vector<TokenClass> classes,
            std::vector<InstanceId> ids);

  // Every cell becomes its own instance, IDs dense in scan order.
  static TokenGrid from_classes(const Dims& dims,
                                std::span<const TokenClass> classes,
                                TokenClass base_size);

  const Dims& dims() const { return dims_; }
  std::size_t cell_count() const { return classes_.size(); }
  std::span<const TokenClass> classes() const { return classes_; }
  std::span<const InstanceId> ids() const { return ids_; }
  TokenClass class_at(std::size_t flat) const { return classes_[flat]; }
  InstanceId id_at(std::size_t flat) const { return ids_[flat]; }

  std::size_t instance_count() const;

  // Throws Error(kConsistency) if any TokenGrid invariant is violated.
  void validate() const;

  friend bool operator==(const TokenGrid&, const TokenGrid&) = default;

 private:
  friend class GridMutator;

  Dims dims_;
  std::vector<TokenClass> classes_;
  std::vector<InstanceId> ids_;
};

// Write access for the algorithms that relabel grids in place.
class GridMutator {
 public:
  explicit GridMutator(TokenGrid& grid) : grid_(grid) {}
  void set(std::size_t flat, TokenClass cls, InstanceId id) {
    grid_.classes_[flat] = cls;
    grid_.ids_[flat] = id;
  }
  void set_class(std::size_t flat, TokenClass cls) {
    grid_.classes_[flat] = cls;
  }

 private:
  TokenGrid& grid_;
};

// Scan-minimal cell of the instance `id`.
Position anchor_of(const TokenGrid& grid, InstanceId id);

// MDTG / MDTC binary containers. Only classes are stored; reading yields
// single-cell instances.
std::string write_grid(const TokenGrid& grid);
TokenGrid read_grid(std::string_view bytes);
std::string write_grid_corpus(std::span<const TokenGrid> grids);
std::vector<TokenGrid> read_grid_corpus(std::string_view bytes);

// Reads either container kind, detected from the magic.
std::vector<TokenGrid> read_grids_any(std::string_view bytes);

class ByteWriter;
class ByteReader;
void write_dims(ByteWriter& out, const Dims& dims);
Dims read_dims(ByteReader& in);

}  // namespace mdbpe
