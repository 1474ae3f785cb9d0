// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "mdbpe/grid.hpp"
#include "mdbpe/vocab.hpp"

namespace mdbpe {

// Which axes contribute a +1 neighbor direction. Bit k enables axis k.
class AxisMask {
 public:
  constexpr AxisMask() = default;
  constexpr explicit AxisMask(std::uint8_t bits) : bits_(bits) {}
  static constexpr AxisMask all() { return AxisMask(0x7); }

  constexpr bool has(std::size_t axis) const { return (bits_ >> axis) & 1u; }
  constexpr std::uint8_t bits() const { return bits_; }

  // Enabled axes in neighbor-visit order: fastest axis first (right, then
  // down, then depth for 3D).
  std::vector<std::size_t> visit_order(std::size_t ndim) const;

  friend bool operator==(AxisMask, AxisMask) = default;

 private:
  std::uint8_t bits_ = 0x7;
};

using CountTable =
    std::unordered_map<Constellation, std::uint64_t, ConstellationHash>;

// Adds every entry of `other` into `into`.
void merge_counts(CountTable& into, const CountTable& other);

struct CountStats {
  // Number of (grid point, neighbor) checks performed.
  std::uint64_t pair_visits = 0;
};

// One full counting pass: every grid point in scan order, every enabled +1
// neighbor, each ordered (p.id, n.id) instance pair counted once per grid.
CountTable count_constellations(std::span<const TokenGrid> corpus,
                                const Vocabulary& vocab,
                                AxisMask axes = AxisMask::all(),
                                CountStats* stats = nullptr);

// Highest count, ties to the smallest constellation. Empty when no
// constellation occurs at least twice.
std::optional<Constellation> select_merge(const CountTable& table);

// Single greedy scan applying `rule` to the live grid state. Returns the
// number of merges performed.
std::size_t apply_merge(TokenGrid& grid, const MergeRule& rule,
                        AxisMask axes = AxisMask::all());

struct TrainConfig {
  std::size_t extra_tokens = 0;
  AxisMask neighbor_axes = AxisMask::all();
  std::size_t threads = 1;
};

struct MergeStep {
  MergeRule rule;
  std::uint64_t count = 0;
  std::uint64_t merges_applied = 0;
  // Live instances over all cells after this step.
  std::uint64_t instances_after = 0;
  std::uint64_t total_cells = 0;
};

struct TrainResult {
  Vocabulary vocab;
  std::vector<TokenGrid> grids;
  std::vector<MergeStep> steps;
};

using MergeCallback = std::function<void(const MergeStep&)>;

// Alternates counting, selection and replacement until `extra_tokens` rules
// exist or no constellation occurs twice. Counts are maintained
// incrementally; the result is identical to repeatedly calling
// count_constellations / select_merge / apply_merge.
TrainResult train(std::vector<TokenGrid> corpus, TokenClass base_size,
                  const TrainConfig& config,
                  const MergeCallback& on_merge = {});

// Applies every rule of `vocab` in order, as training did.
std::vector<TokenGrid> tokenize(std::vector<TokenGrid> corpus,
                                const Vocabulary& vocab,
                                AxisMask axes = AxisMask::all(),
                                std::size_t threads = 1);
TokenGrid tokenize(TokenGrid grid, const Vocabulary& vocab,
                   AxisMask axes = AxisMask::all());

}  // namespace mdbpe
