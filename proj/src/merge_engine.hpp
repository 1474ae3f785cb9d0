// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include <boost/container/small_vector.hpp>

#include "mdbpe/trainer.hpp"

namespace mdbpe::detail {

// Corpus state for the count/replace loop, kept as per-grid instance
// adjacency instead of cell labels.
//
// For every ordered instance pair (a, b) such that some cell of a has a cell
// of b as its +1 neighbor along an enabled axis, the adjacency stores the
// first visit (scan index of the cell, then axis rank) at which a full scan
// would examine that pair. The visit order is all the literal scan depends
// on: a pair merges iff neither side was merged earlier in the pass, and
// pairs merge in order of first visit.
class MergeEngine {
 public:
  MergeEngine(std::vector<TokenGrid> corpus, std::size_t ndim, AxisMask axes,
              bool track_counts, std::size_t threads);

  const CountTable& counts() const { return counts_; }

  // Applies one rule to every grid; returns the number of merges.
  std::uint64_t apply(const MergeRule& rule);

  std::uint64_t instance_total() const { return instance_total_; }
  std::uint64_t cell_total() const { return cell_total_; }
  std::size_t grid_count() const { return grids_.size(); }

  TokenGrid grid(std::size_t index) const;
  std::vector<TokenGrid> grids() const;

 private:
  static constexpr std::uint32_t kNoVisit =
      std::numeric_limits<std::uint32_t>::max();
  static constexpr TokenClass kDead = std::numeric_limits<TokenClass>::max();

  struct Link {
    std::uint32_t other;
    std::uint32_t out_visit;  // first visit of (self, other)
    std::uint32_t in_visit;   // first visit of (other, self)
  };

  struct Instance {
    TokenClass cls;
    std::uint32_t anchor;  // flat cell index
    boost::container::small_vector<Link, 4> links;
  };

  struct GridState {
    Dims dims;
    std::vector<Instance> instances;
    std::vector<std::uint32_t> parent;
    // Empty when local index == cell index == original ID.
    std::vector<std::uint32_t> cell_to_local;
    std::vector<InstanceId> original_id;
  };

  struct IndexEntry {
    std::uint32_t grid;
    std::uint32_t local;
  };

  using CountDelta =
      std::unordered_map<Constellation, std::int64_t, ConstellationHash>;

  struct Candidate {
    std::uint32_t grid;
    std::uint32_t visit;
    std::uint32_t p;
    std::uint32_t n;
  };

  static GridState build(const TokenGrid& grid, AxisMask axes);
  static Link* find_link(Instance& inst, std::uint32_t other);
  Constellation key(const GridState& g, std::uint32_t p, std::uint32_t n) const;
  void add_instance_counts(const GridState& g, std::uint32_t local,
                           std::int64_t sign, CountDelta& delta,
                           std::uint32_t skip) const;
  void merge_pair(GridState& g, std::uint32_t p, std::uint32_t n,
                  TokenClass new_class, CountDelta* delta);
  void apply_delta(const CountDelta& delta);

  std::size_t ndim_;
  AxisMask axes_;
  bool track_counts_;
  std::size_t threads_;
  std::vector<GridState> grids_;
  std::vector<std::vector<IndexEntry>> class_index_;
  CountTable counts_;
  std::uint64_t instance_total_ = 0;
  std::uint64_t cell_total_ = 0;
};

}  // namespace mdbpe::detail
