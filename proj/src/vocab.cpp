// SPDX-License-Identifier: Apache-2.0

#include "mdbpe/vocab.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include <json.hpp>

#include "mdbpe/error.hpp"

namespace mdbpe {

using json = nlohmann::json;

std::string to_string(const Constellation& c, std::size_t ndim) {
  std::string s = "(" + std::to_string(c.class_p) + ", " +
                  std::to_string(c.class_n) + ", [";
  for (std::size_t k = 0; k < ndim; ++k) {
    if (k) s += ',';
    s += std::to_string(c.v_pn[k]);
  }
  return s + "])";
}

Vocabulary::Vocabulary(std::size_t ndim, TokenClass base_size)
    : ndim_(ndim), base_size_(base_size) {
  if (ndim == 0 || ndim > kMaxAxes) {
    throw Error(ErrorCategory::kInvalidArgument,
                "vocabulary ndim must be 1..3");
  }
  if (base_size == 0) {
    throw Error(ErrorCategory::kInvalidArgument, "base_size must be positive");
  }
  unit_shape_.offsets.push_back(Offset{});
  base_identity_.resize(base_size);
  std::iota(base_identity_.begin(), base_identity_.end(), TokenClass{0});
}

void Vocabulary::check_class(TokenClass cls) const {
  if (cls >= size()) {
    throw Error(ErrorCategory::kOutOfRange,
                "class " + std::to_string(cls) + " outside vocabulary of size " +
                    std::to_string(size()));
  }
}

const TokenShape& Vocabulary::shape_of(TokenClass cls) const {
  check_class(cls);
  if (cls < base_size_) return unit_shape_;
  return merged_shapes_[cls - base_size_];
}

std::span<const TokenClass> Vocabulary::base_layout(TokenClass cls) const {
  check_class(cls);
  if (cls < base_size_) return {&base_identity_[cls], 1};
  return merged_layouts_[cls - base_size_];
}

namespace {

Offset sub(const Offset& a, const Offset& b) {
  Offset r{};
  for (std::size_t k = 0; k < kMaxAxes; ++k) r[k] = a[k] - b[k];
  return r;
}

bool adjacent(const Offset& a, const Offset& b) {
  int manhattan = 0;
  for (std::size_t k = 0; k < kMaxAxes; ++k) manhattan += std::abs(a[k] - b[k]);
  return manhattan == 1;
}

}  // namespace

TokenClass Vocabulary::add_merge(const Constellation& c) {
  const TokenClass new_class = size();
  auto fail = [&](const std::string& why) {
    throw Error(ErrorCategory::kConsistency,
                "merge rule " + std::to_string(new_class) + " " +
                    to_string(c, ndim_) + ": " + why);
  };
  if (c.class_p >= new_class || c.class_n >= new_class) {
    fail("references a class not defined before it");
  }
  if (c.v_pn == Offset{}) fail("zero anchor offset");
  for (std::size_t k = ndim_; k < kMaxAxes; ++k) {
    if (c.v_pn[k] != 0) fail("offset has components beyond ndim");
  }

  const TokenShape& sp = shape_of(c.class_p);
  const TokenShape& sn = shape_of(c.class_n);
  auto layout_of = [&](TokenClass cls) -> std::vector<TokenClass> {
    if (cls < base_size_) return {cls};
    const auto& l = merged_layouts_[cls - base_size_];
    return {l.begin(), l.end()};
  };
  const auto lp = layout_of(c.class_p);
  const auto ln = layout_of(c.class_n);

  // n's cells relative to p's anchor are shape(n) - v_pn.
  std::vector<std::pair<Offset, TokenClass>> cells;
  cells.reserve(sp.size() + sn.size());
  for (std::size_t i = 0; i < sp.size(); ++i) cells.emplace_back(sp.offsets[i], lp[i]);
  for (std::size_t i = 0; i < sn.size(); ++i) {
    cells.emplace_back(sub(sn.offsets[i], c.v_pn), ln[i]);
  }
  std::sort(cells.begin(), cells.end());
  for (std::size_t i = 1; i < cells.size(); ++i) {
    if (cells[i].first == cells[i - 1].first) fail("constituent shapes overlap");
  }
  bool touching = false;
  for (std::size_t i = 0; i < sp.size() && !touching; ++i) {
    for (std::size_t j = 0; j < sn.size() && !touching; ++j) {
      touching = adjacent(sp.offsets[i], sub(sn.offsets[j], c.v_pn));
    }
  }
  if (!touching) fail("constituent shapes are not edge-adjacent");

  const Offset origin = cells.front().first;
  TokenShape shape;
  std::vector<TokenClass> layout;
  shape.offsets.reserve(cells.size());
  layout.reserve(cells.size());
  for (const auto& [off, base] : cells) {
    shape.offsets.push_back(sub(off, origin));
    layout.push_back(base);
  }
  merges_.push_back({new_class, c});
  merged_shapes_.push_back(std::move(shape));
  merged_layouts_.push_back(std::move(layout));
  return new_class;
}

std::string write_vocab(const Vocabulary& vocab) {
  json merges = json::array();
  for (const auto& rule : vocab.merges()) {
    json v = json::array();
    for (std::size_t k = 0; k < vocab.ndim(); ++k) {
      v.push_back(rule.constellation.v_pn[k]);
    }
    merges.push_back({{"new_class", rule.new_class},
                      {"class_p", rule.constellation.class_p},
                      {"class_n", rule.constellation.class_n},
                      {"v_pn", std::move(v)}});
  }
  json doc = {{"format", "mdbpe-vocab"},
              {"version", 1},
              {"ndim", vocab.ndim()},
              {"base_size", vocab.base_size()},
              {"merges", std::move(merges)}};
  return doc.dump(1) + "\n";
}

Vocabulary read_vocab(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::kFormat, std::string("vocabulary: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != "mdbpe-vocab") {
      throw Error(ErrorCategory::kFormat, "vocabulary: wrong format tag");
    }
    if (doc.at("version").get<int>() != 1) {
      throw Error(ErrorCategory::kFormat, "vocabulary: unsupported version");
    }
    const auto ndim = doc.at("ndim").get<std::size_t>();
    const auto base_size = doc.at("base_size").get<TokenClass>();
    Vocabulary vocab(ndim, base_size);
    for (const auto& m : doc.at("merges")) {
      Constellation c;
      c.class_p = m.at("class_p").get<TokenClass>();
      c.class_n = m.at("class_n").get<TokenClass>();
      const auto& v = m.at("v_pn");
      if (v.size() != ndim) {
        throw Error(ErrorCategory::kFormat, "vocabulary: v_pn length != ndim");
      }
      for (std::size_t k = 0; k < ndim; ++k) c.v_pn[k] = v[k].get<std::int32_t>();
      const auto expected = m.at("new_class").get<TokenClass>();
      if (expected != vocab.size()) {
        throw Error(ErrorCategory::kConsistency,
                    "vocabulary: new_class " + std::to_string(expected) +
                        " out of sequence, expected " +
                        std::to_string(vocab.size()));
      }
      vocab.add_merge(c);
    }
    return vocab;
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::kFormat, std::string("vocabulary: ") + e.what());
  }
}

}  // namespace mdbpe
