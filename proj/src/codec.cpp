// SPDX-License-Identifier: Apache-2.0

#include "mdbpe/codec.hpp"

#include <algorithm>
#include <unordered_set>

#include "mdbpe/binary_io.hpp"
#include "mdbpe/error.hpp"

namespace mdbpe {

PlacementCursor::PlacementCursor(const Dims& dims)
    : dims_(dims), covered_(dims.cell_count(), 0) {}

std::optional<DecodeFailure> PlacementCursor::check(const TokenShape& shape) const {
  const Position anchor = dims_.position(next_);
  Position cell;
  for (const Offset& off : shape.offsets) {
    if (!dims_.translate(anchor, off, cell)) return DecodeFailure::kOutOfBounds;
    if (covered_[dims_.flat_index(cell)] != 0) return DecodeFailure::kOverlap;
  }
  return std::nullopt;
}

void PlacementCursor::place(const TokenShape& shape, std::vector<std::size_t>* cells) {
  const Position anchor = dims_.position(next_);
  Position cell;
  for (const Offset& off : shape.offsets) {
    dims_.translate(anchor, off, cell);
    const std::size_t flat = dims_.flat_index(cell);
    covered_[flat] = 1;
    if (cells != nullptr) cells->push_back(flat);
  }
  covered_count_ += shape.size();
  while (next_ < covered_.size() && covered_[next_] != 0) ++next_;
}

CompressedSequence encode(const TokenGrid& grid, const Vocabulary& vocab) {
  const Dims& dims = grid.dims();
  if (dims.ndim() != vocab.ndim()) {
    throw Error(ErrorCategory::kConsistency,
                "grid has " + std::to_string(dims.ndim()) +
                    " axes, vocabulary expects " + std::to_string(vocab.ndim()));
  }
  CompressedSequence seq{dims, {}};
  std::unordered_set<InstanceId> seen;
  std::size_t covered = 0;
  Position cell;
  for (std::size_t flat = 0; flat < grid.cell_count(); ++flat) {
    const InstanceId id = grid.id_at(flat);
    if (!seen.insert(id).second) continue;
    const TokenClass cls = grid.class_at(flat);
    if (cls >= vocab.size()) {
      throw Error(ErrorCategory::kConsistency,
                  "class " + std::to_string(cls) + " not in vocabulary");
    }
    const Position anchor = dims.position(flat);
    for (const Offset& off : vocab.shape_of(cls).offsets) {
      if (!dims.translate(anchor, off, cell) ||
          grid.id_at(dims.flat_index(cell)) != id ||
          grid.class_at(dims.flat_index(cell)) != cls) {
        throw Error(ErrorCategory::kConsistency,
                    "instance " + std::to_string(id) + " does not match the shape of class " +
                        std::to_string(cls));
      }
    }
    covered += vocab.shape_of(cls).size();
    seq.tokens.push_back(cls);
  }
  if (covered != grid.cell_count()) {
    throw Error(ErrorCategory::kConsistency,
                "instances cover cells outside their class shapes");
  }
  return seq;
}

namespace {

[[noreturn]] void fail(DecodeFailure failure, std::size_t index,
                       const std::string& what) {
  throw DecodeError(failure, index, "token " + std::to_string(index) + ": " + what);
}

}  // namespace

TokenGrid decode(const CompressedSequence& seq, const Vocabulary& vocab) {
  const Dims& dims = seq.dims;
  if (dims.ndim() != vocab.ndim()) {
    throw Error(ErrorCategory::kInvalidArgument, "sequence and vocabulary axis counts differ");
  }
  PlacementCursor cursor(dims);
  std::vector<TokenClass> classes(dims.cell_count());
  std::vector<InstanceId> ids(dims.cell_count());
  std::vector<std::size_t> cells;
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    const TokenClass cls = seq.tokens[i];
    if (cursor.complete()) fail(DecodeFailure::kTrailingTokens, i, "grid already covered");
    if (cls >= vocab.size()) fail(DecodeFailure::kUnknownClass, i, "unknown class");
    const TokenShape& shape = vocab.shape_of(cls);
    if (auto failure = cursor.check(shape)) {
      fail(*failure, i,
           *failure == DecodeFailure::kOutOfBounds ? "shape exceeds grid bounds"
                                                   : "shape overlaps placed tokens");
    }
    cells.clear();
    cursor.place(shape, &cells);
    for (std::size_t flat : cells) {
      classes[flat] = cls;
      ids[flat] = static_cast<InstanceId>(i);
    }
  }
  if (!cursor.complete()) {
    fail(DecodeFailure::kTokensExhausted, seq.tokens.size(),
         "tokens exhausted with " + std::to_string(dims.cell_count() - cursor.covered_count()) +
             " cells uncovered");
  }
  return TokenGrid(dims, std::move(classes), std::move(ids));
}

TokenGrid expand_to_base(const TokenGrid& grid, const Vocabulary& vocab) {
  const Dims& dims = grid.dims();
  std::vector<TokenClass> base(grid.cell_count());
  std::unordered_set<InstanceId> seen;
  Position cell;
  for (std::size_t flat = 0; flat < grid.cell_count(); ++flat) {
    if (!seen.insert(grid.id_at(flat)).second) continue;
    const TokenClass cls = grid.class_at(flat);
    const auto& shape = vocab.shape_of(cls);
    const auto layout = vocab.base_layout(cls);
    const Position anchor = dims.position(flat);
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (!dims.translate(anchor, shape.offsets[i], cell)) {
        throw Error(ErrorCategory::kConsistency, "instance shape leaves the grid");
      }
      base[dims.flat_index(cell)] = layout[i];
    }
  }
  return TokenGrid::from_classes(dims, base, vocab.base_size());
}

std::vector<CompressedSequence> compress(std::vector<TokenGrid> corpus,
                                         const Vocabulary& vocab, AxisMask axes,
                                         std::size_t threads) {
  const auto merged = tokenize(std::move(corpus), vocab, axes, threads);
  std::vector<CompressedSequence> out;
  out.reserve(merged.size());
  for (const auto& g : merged) out.push_back(encode(g, vocab));
  return out;
}

std::vector<TokenGrid> decompress(std::span<const CompressedSequence> seqs,
                                  const Vocabulary& vocab) {
  std::vector<TokenGrid> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) out.push_back(expand_to_base(decode(s, vocab), vocab));
  return out;
}

CompressionReport compression_stats(std::span<const CompressedSequence> seqs) {
  CompressionReport r;
  for (const auto& s : seqs) {
    const std::size_t len = s.tokens.size();
    r.lengths.push_back(len);
    r.total_tokens += len;
    r.total_cells += s.dims.cell_count();
    r.max_length = std::max(r.max_length, len);
    ++r.histogram[len];
  }
  if (r.total_cells > 0) {
    r.ratio = static_cast<double>(r.total_tokens) / static_cast<double>(r.total_cells);
  }
  if (!seqs.empty()) {
    r.mean_length = static_cast<double>(r.total_tokens) / static_cast<double>(seqs.size());
  }
  return r;
}

CompressionReport compression_stats(std::vector<TokenGrid> corpus,
                                    const Vocabulary& vocab, AxisMask axes,
                                    std::size_t threads) {
  const auto seqs = compress(std::move(corpus), vocab, axes, threads);
  return compression_stats(seqs);
}

namespace {

constexpr std::uint8_t kVersion = 0x01;

void write_sequence_payload(ByteWriter& out, const CompressedSequence& seq) {
  write_dims(out, seq.dims);
  out.u32(static_cast<std::uint32_t>(seq.tokens.size()));
  for (TokenClass t : seq.tokens) out.u32(t);
}

CompressedSequence read_sequence_payload(ByteReader& in) {
  CompressedSequence seq;
  seq.dims = read_dims(in);
  const std::uint32_t count = in.u32();
  if (in.remaining() / 4 < count) throw Error(ErrorCategory::kFormat, "sequence truncated");
  seq.tokens.resize(count);
  for (auto& t : seq.tokens) t = in.u32();
  return seq;
}

void expect_version(ByteReader& in) {
  if (in.u8() != kVersion) throw Error(ErrorCategory::kFormat, "unsupported version");
}

}  // namespace

std::string write_sequence(const CompressedSequence& seq) {
  ByteWriter out;
  out.magic("MDSQ");
  out.u8(kVersion);
  write_sequence_payload(out, seq);
  return std::move(out).bytes();
}

CompressedSequence read_sequence(std::string_view bytes) {
  ByteReader in(bytes);
  in.expect_magic("MDSQ");
  expect_version(in);
  auto seq = read_sequence_payload(in);
  in.expect_done();
  return seq;
}

std::string write_sequence_corpus(std::span<const CompressedSequence> seqs) {
  ByteWriter out;
  out.magic("MDSC");
  out.u8(kVersion);
  out.u32(static_cast<std::uint32_t>(seqs.size()));
  for (const auto& s : seqs) write_sequence_payload(out, s);
  return std::move(out).bytes();
}

std::vector<CompressedSequence> read_sequence_corpus(std::string_view bytes) {
  ByteReader in(bytes);
  in.expect_magic("MDSC");
  expect_version(in);
  const std::uint32_t count = in.u32();
  std::vector<CompressedSequence> seqs;
  for (std::uint32_t i = 0; i < count; ++i) seqs.push_back(read_sequence_payload(in));
  in.expect_done();
  return seqs;
}

std::vector<CompressedSequence> read_sequences_any(std::string_view bytes) {
  if (bytes.substr(0, 4) == "MDSQ") return {read_sequence(bytes)};
  return read_sequence_corpus(bytes);
}

}  // namespace mdbpe
