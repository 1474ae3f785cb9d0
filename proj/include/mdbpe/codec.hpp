// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mdbpe/error.hpp"
#include "mdbpe/grid.hpp"
#include "mdbpe/trainer.hpp"
#include "mdbpe/vocab.hpp"

namespace mdbpe {

// One token class per instance, in anchor scan order, plus the grid extents
// needed to place them again.
struct CompressedSequence {
  Dims dims;
  std::vector<TokenClass> tokens;

  friend bool operator==(const CompressedSequence&,
                         const CompressedSequence&) = default;
};

// Coverage state shared by decoding and generation: tracks covered cells
// and the scan-minimal uncovered cell where the next token is anchored.
class PlacementCursor {
 public:
  explicit PlacementCursor(const Dims& dims);

  const Dims& dims() const { return dims_; }
  bool complete() const { return next_ == covered_.size(); }
  std::size_t covered_count() const { return covered_count_; }
  bool is_covered(std::size_t flat) const { return covered_[flat] != 0; }
  // Flat index of the next anchor; equals the cell count when complete.
  std::size_t next_anchor() const { return next_; }

  // kOutOfBounds / kOverlap if `shape` cannot go at next_anchor(), else
  // nothing. Requires !complete().
  std::optional<DecodeFailure> check(const TokenShape& shape) const;
  // Covers the cells of `shape` at next_anchor() and appends their flat
  // indices (in shape order) to `cells` when given. Requires check() to
  // have passed.
  void place(const TokenShape& shape, std::vector<std::size_t>* cells = nullptr);

 private:
  Dims dims_;
  std::vector<std::uint8_t> covered_;
  std::size_t covered_count_ = 0;
  std::size_t next_ = 0;
};

// Extracts the sequence of an already-merged grid. Throws kConsistency if an
// instance's cells do not match shape_of(class) at its anchor.
CompressedSequence encode(const TokenGrid& grid, const Vocabulary& vocab);

// Places each token's shape at the scan-minimal uncovered cell. The result
// carries fresh dense IDs in token order. Throws DecodeError.
TokenGrid decode(const CompressedSequence& seq, const Vocabulary& vocab);

// Replaces every cell's class with the base class it covers.
TokenGrid expand_to_base(const TokenGrid& grid, const Vocabulary& vocab);

// Base-class grids to sequences: tokenize with the vocabulary, then encode.
std::vector<CompressedSequence> compress(std::vector<TokenGrid> corpus,
                                         const Vocabulary& vocab,
                                         AxisMask axes = AxisMask::all(),
                                         std::size_t threads = 1);
// Inverse of compress: decode and expand to base classes.
std::vector<TokenGrid> decompress(std::span<const CompressedSequence> seqs,
                                  const Vocabulary& vocab);

struct CompressionReport {
  std::vector<std::size_t> lengths;
  std::uint64_t total_tokens = 0;
  std::uint64_t total_cells = 0;
  // total_tokens / total_cells; lower is better.
  double ratio = 0.0;
  double mean_length = 0.0;
  std::size_t max_length = 0;
  std::map<std::size_t, std::size_t> histogram;
};

CompressionReport compression_stats(std::vector<TokenGrid> corpus,
                                    const Vocabulary& vocab,
                                    AxisMask axes = AxisMask::all(),
                                    std::size_t threads = 1);
CompressionReport compression_stats(std::span<const CompressedSequence> seqs);

// MDSQ (single sequence) and MDSC (corpus) containers.
std::string write_sequence(const CompressedSequence& seq);
CompressedSequence read_sequence(std::string_view bytes);
std::string write_sequence_corpus(std::span<const CompressedSequence> seqs);
std::vector<CompressedSequence> read_sequence_corpus(std::string_view bytes);
std::vector<CompressedSequence> read_sequences_any(std::string_view bytes);

}  // namespace mdbpe
