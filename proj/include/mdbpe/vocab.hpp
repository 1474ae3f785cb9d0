// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mdbpe/grid.hpp"

namespace mdbpe {

// Ordered class pair plus the anchor displacement p.anchor - n.anchor.
// Ordering is the select_merge tie-break: class_p, class_n, then v_pn
// component-wise.
struct Constellation {
  TokenClass class_p = 0;
  TokenClass class_n = 0;
  Offset v_pn{};

  friend auto operator<=>(const Constellation&, const Constellation&) = default;
};

struct ConstellationHash {
  std::size_t operator()(const Constellation& c) const noexcept {
    std::uint64_t h = 0x9E3779B97F4A7C15ull;
    auto mix = [&h](std::uint64_t v) {
      h ^= v + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
    };
    mix((std::uint64_t{c.class_p} << 32) | c.class_n);
    mix((std::uint64_t{static_cast<std::uint32_t>(c.v_pn[0])} << 32) |
        static_cast<std::uint32_t>(c.v_pn[1]));
    mix(static_cast<std::uint32_t>(c.v_pn[2]));
    return static_cast<std::size_t>(h);
  }
};

std::string to_string(const Constellation& c, std::size_t ndim);

struct MergeRule {
  TokenClass new_class = 0;
  Constellation constellation;

  friend bool operator==(const MergeRule&, const MergeRule&) = default;
};

// Cell offsets relative to the class's anchor, sorted in scan order. The
// first entry is always the zero offset.
struct TokenShape {
  std::vector<Offset> offsets;

  std::size_t size() const { return offsets.size(); }
  friend bool operator==(const TokenShape&, const TokenShape&) = default;
};

// Base vocabulary plus ordered merge rules. Shapes and base layouts of every
// class are derived eagerly when a rule is added, so a constructed
// Vocabulary is safe to share read-only across threads.
class Vocabulary {
 public:
  Vocabulary(std::size_t ndim, TokenClass base_size);

  std::size_t ndim() const { return ndim_; }
  TokenClass base_size() const { return base_size_; }
  // Number of classes, base plus merged.
  TokenClass size() const {
    return base_size_ + static_cast<TokenClass>(merges_.size());
  }
  const std::vector<MergeRule>& merges() const { return merges_; }
  bool is_base(TokenClass cls) const { return cls < base_size_; }

  // Appends the rule for `constellation` and returns its new class. Throws
  // kConsistency if the rule references unknown classes, has a zero offset,
  // or its two shapes would overlap or not touch.
  TokenClass add_merge(const Constellation& constellation);

  const TokenShape& shape_of(TokenClass cls) const;
  // Base class of every cell of `cls`, aligned with shape_of(cls).offsets.
  std::span<const TokenClass> base_layout(TokenClass cls) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.ndim_ == b.ndim_ && a.base_size_ == b.base_size_ &&
           a.merges_ == b.merges_;
  }

 private:
  void check_class(TokenClass cls) const;

  std::size_t ndim_;
  TokenClass base_size_;
  std::vector<MergeRule> merges_;
  std::vector<TokenShape> merged_shapes_;
  std::vector<std::vector<TokenClass>> merged_layouts_;
  TokenShape unit_shape_;
  std::vector<TokenClass> base_identity_;
};

// JSON document, see README for the schema.
std::string write_vocab(const Vocabulary& vocab);
Vocabulary read_vocab(std::string_view document);

}  // namespace mdbpe
