// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <string_view>
#include <vector>

#include "mdbpe/grid.hpp"

namespace mdbpe::testing {

// "AAB" -> {0, 0, 1}
inline std::vector<TokenClass> letters(std::string_view s) {
  std::vector<TokenClass> out;
  for (char c : s) out.push_back(static_cast<TokenClass>(c - 'A'));
  return out;
}

inline TokenGrid letter_row(std::string_view s, TokenClass base_size = 2) {
  const auto cls = letters(s);
  return TokenGrid::from_classes(Dims{1, static_cast<std::uint32_t>(cls.size())}, cls,
                                 base_size);
}

// Random grid with some spatial structure: a uniform background with a few
// filled boxes painted on top, plus sprinkled noise.
inline TokenGrid random_grid(std::mt19937_64& rng, const Dims& dims, TokenClass classes,
                             double noise = 0.15) {
  std::uniform_int_distribution<TokenClass> pick(0, classes - 1);
  std::vector<TokenClass> cells(dims.cell_count(), pick(rng));
  std::uniform_int_distribution<int> boxes(0, 3);
  const int nbox = boxes(rng);
  for (int b = 0; b < nbox; ++b) {
    std::array<std::uint32_t, kMaxAxes> lo{}, hi{};
    for (std::size_t k = 0; k < dims.ndim(); ++k) {
      std::uniform_int_distribution<std::uint32_t> c(0, dims.extent(k) - 1);
      lo[k] = c(rng);
      hi[k] = c(rng);
      if (lo[k] > hi[k]) std::swap(lo[k], hi[k]);
    }
    const TokenClass fill = pick(rng);
    for (std::size_t f = 0; f < cells.size(); ++f) {
      const Position p = dims.position(f);
      bool inside = true;
      for (std::size_t k = 0; k < dims.ndim(); ++k) {
        inside = inside && p.coords[k] >= lo[k] && p.coords[k] <= hi[k];
      }
      if (inside) cells[f] = fill;
    }
  }
  std::bernoulli_distribution flip(noise);
  for (auto& c : cells) {
    if (flip(rng)) c = pick(rng);
  }
  return TokenGrid::from_classes(dims, cells, classes);
}

inline Dims random_dims(std::mt19937_64& rng, std::size_t ndim, std::uint32_t max_extent) {
  std::uniform_int_distribution<std::uint32_t> e(1, max_extent);
  std::array<std::uint32_t, kMaxAxes> ext{};
  for (std::size_t k = 0; k < ndim; ++k) ext[k] = e(rng);
  return Dims(std::span<const std::uint32_t>(ext.data(), ndim));
}

}  // namespace mdbpe::testing
