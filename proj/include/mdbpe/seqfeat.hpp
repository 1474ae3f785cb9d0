// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mdbpe/codec.hpp"
#include "mdbpe/grid.hpp"
#include "mdbpe/vocab.hpp"

namespace mdbpe {

// Per-axis sinusoidal encoding, axes concatenated in axis order. Each axis
// block holds pe_dim / 2 (sin, cos) pairs with geometric frequencies
// base^(-2i / pe_dim).
class PositionalEncoding {
 public:
  PositionalEncoding(std::size_t ndim, std::size_t pe_dim, double base = 10000.0);

  std::size_t ndim() const { return ndim_; }
  std::size_t pe_dim() const { return pe_dim_; }
  std::size_t width() const { return ndim_ * pe_dim_; }

  std::vector<double> encode(const Position& pos) const;
  // out += encode(pos)
  void accumulate(const Position& pos, std::span<double> out) const;

 private:
  std::size_t ndim_;
  std::size_t pe_dim_;
  std::vector<double> frequencies_;
};

struct TokenFeatures {
  std::vector<double> anchor_pe;
  // Encoding of the next token's anchor; all zeros after the last token.
  std::vector<double> next_anchor_pe;
  // Integrated encoding: sum over every covered cell.
  std::vector<double> ipe;
};

// Sum of the encodings of the cells covered by `cls` placed at `anchor`.
// Throws kOutOfRange if the shape leaves the grid.
std::vector<double> ipe(const Vocabulary& vocab, TokenClass cls,
                        const Position& anchor, const Dims& dims,
                        const PositionalEncoding& pe);

// Replays decoding; feature i depends only on tokens 0..i. Prefixes are
// accepted; overlap, bounds and trailing tokens throw DecodeError.
std::vector<TokenFeatures> emit_features(const CompressedSequence& seq,
                                         const Vocabulary& vocab,
                                         const PositionalEncoding& pe);

// Partial generation: tokens placed so far and the cells they cover.
class GenerationState {
 public:
  explicit GenerationState(const Dims& dims) : cursor_(dims) {}

  const Dims& dims() const { return cursor_.dims(); }
  bool complete() const { return cursor_.complete(); }
  Position next_anchor() const { return dims().position(cursor_.next_anchor()); }
  const std::vector<TokenClass>& tokens() const { return tokens_; }
  const PlacementCursor& cursor() const { return cursor_; }

  bool is_legal(TokenClass cls, const Vocabulary& vocab) const;
  // Throws DecodeError if `cls` is not legal at the next anchor.
  void place(TokenClass cls, const Vocabulary& vocab);

 private:
  PlacementCursor cursor_;
  std::vector<TokenClass> tokens_;
};

// legal[c] is true iff class c fits at the next anchor without leaving the
// grid or overlapping placed tokens. Throws kInvalidArgument when the state
// is already fully covered.
std::vector<bool> legal_mask(const GenerationState& state, const Vocabulary& vocab);

// MDFT feature dump, vectors stored as float32.
std::string write_features(std::span<const TokenFeatures> features,
                           std::size_t width);

}  // namespace mdbpe
