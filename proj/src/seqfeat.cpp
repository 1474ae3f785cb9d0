// SPDX-License-Identifier: Apache-2.0

#include "mdbpe/seqfeat.hpp"

#include <cmath>

#include "mdbpe/binary_io.hpp"
#include "mdbpe/error.hpp"

namespace mdbpe {

PositionalEncoding::PositionalEncoding(std::size_t ndim, std::size_t pe_dim, double base)
    : ndim_(ndim), pe_dim_(pe_dim) {
  if (ndim == 0 || ndim > kMaxAxes) {
    throw Error(ErrorCategory::kInvalidArgument, "positional encoding needs 1..3 axes");
  }
  if (pe_dim == 0 || pe_dim % 2 != 0) {
    throw Error(ErrorCategory::kInvalidArgument, "pe_dim must be a positive even number");
  }
  if (!(base > 1.0)) {
    throw Error(ErrorCategory::kInvalidArgument, "positional encoding base must exceed 1");
  }
  for (std::size_t i = 0; i < pe_dim / 2; ++i) {
    frequencies_.push_back(
        std::pow(base, -2.0 * static_cast<double>(i) / static_cast<double>(pe_dim)));
  }
}

void PositionalEncoding::accumulate(const Position& pos, std::span<double> out) const {
  for (std::size_t axis = 0; axis < ndim_; ++axis) {
    const double x = pos.coords[axis];
    double* block = out.data() + axis * pe_dim_;
    for (std::size_t i = 0; i < frequencies_.size(); ++i) {
      block[2 * i] += std::sin(x * frequencies_[i]);
      block[2 * i + 1] += std::cos(x * frequencies_[i]);
    }
  }
}

std::vector<double> PositionalEncoding::encode(const Position& pos) const {
  std::vector<double> out(width(), 0.0);
  accumulate(pos, out);
  return out;
}

std::vector<double> ipe(const Vocabulary& vocab, TokenClass cls, const Position& anchor,
                        const Dims& dims, const PositionalEncoding& pe) {
  std::vector<double> sum(pe.width(), 0.0);
  Position cell;
  for (const Offset& off : vocab.shape_of(cls).offsets) {
    if (!dims.translate(anchor, off, cell)) {
      throw Error(ErrorCategory::kOutOfRange,
                  "class " + std::to_string(cls) + " placed out of bounds");
    }
    pe.accumulate(cell, sum);
  }
  return sum;
}

std::vector<TokenFeatures> emit_features(const CompressedSequence& seq,
                                         const Vocabulary& vocab,
                                         const PositionalEncoding& pe) {
  if (pe.ndim() != seq.dims.ndim()) {
    throw Error(ErrorCategory::kInvalidArgument, "encoding and sequence axis counts differ");
  }
  GenerationState state(seq.dims);
  std::vector<TokenFeatures> out;
  out.reserve(seq.tokens.size());
  for (TokenClass cls : seq.tokens) {
    if (state.complete()) {
      throw DecodeError(DecodeFailure::kTrailingTokens, out.size(), "grid already covered");
    }
    const Position anchor = state.next_anchor();
    state.place(cls, vocab);
    TokenFeatures f;
    f.anchor_pe = pe.encode(anchor);
    f.ipe = ipe(vocab, cls, anchor, seq.dims, pe);
    f.next_anchor_pe = state.complete() ? std::vector<double>(pe.width(), 0.0)
                                        : pe.encode(state.next_anchor());
    out.push_back(std::move(f));
  }
  // A prefix that leaves cells uncovered is fine here.
  return out;
}

bool GenerationState::is_legal(TokenClass cls, const Vocabulary& vocab) const {
  return !cursor_.complete() && cls < vocab.size() &&
         !cursor_.check(vocab.shape_of(cls)).has_value();
}

void GenerationState::place(TokenClass cls, const Vocabulary& vocab) {
  const std::size_t index = tokens_.size();
  if (cursor_.complete()) {
    throw DecodeError(DecodeFailure::kTrailingTokens, index, "grid already covered");
  }
  if (cls >= vocab.size()) {
    throw DecodeError(DecodeFailure::kUnknownClass, index, "unknown class");
  }
  const auto& shape = vocab.shape_of(cls);
  if (auto failure = cursor_.check(shape)) {
    throw DecodeError(*failure, index,
                      "class " + std::to_string(cls) + " does not fit at the next anchor");
  }
  cursor_.place(shape);
  tokens_.push_back(cls);
}

std::vector<bool> legal_mask(const GenerationState& state, const Vocabulary& vocab) {
  if (state.complete()) {
    throw Error(ErrorCategory::kInvalidArgument, "generation state is fully covered");
  }
  std::vector<bool> mask(vocab.size());
  for (TokenClass c = 0; c < vocab.size(); ++c) {
    mask[c] = !state.cursor().check(vocab.shape_of(c)).has_value();
  }
  return mask;
}

std::string write_features(std::span<const TokenFeatures> features, std::size_t width) {
  ByteWriter out;
  out.magic("MDFT");
  out.u8(0x01);
  out.u32(static_cast<std::uint32_t>(features.size()));
  out.u32(static_cast<std::uint32_t>(width));
  for (const auto& f : features) {
    for (const auto* v : {&f.anchor_pe, &f.next_anchor_pe, &f.ipe}) {
      if (v->size() != width) {
        throw Error(ErrorCategory::kInvalidArgument, "feature width mismatch");
      }
      for (double x : *v) out.f32(static_cast<float>(x));
    }
  }
  return std::move(out).bytes();
}

}  // namespace mdbpe
