// SPDX-License-Identifier: Apache-2.0

#include "merge_engine.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include "mdbpe/error.hpp"
#include "mdbpe/parallel.hpp"

namespace mdbpe::detail {

MergeEngine::MergeEngine(std::vector<TokenGrid> corpus, std::size_t ndim,
                         AxisMask axes, bool track_counts, std::size_t threads)
    : ndim_(ndim),
      axes_(axes),
      track_counts_(track_counts),
      threads_(std::max<std::size_t>(1, threads)) {
  for (const auto& g : corpus) {
    if (g.dims().ndim() != ndim_) {
      throw Error(ErrorCategory::kInvalidArgument,
                  "corpus mixes grids with different axis counts");
    }
    cell_total_ += g.cell_count();
  }

  grids_.resize(corpus.size());
  const std::size_t chunks = chunk_count(corpus.size(), threads_);
  std::vector<CountTable> partial(chunks);
  parallel_chunks(corpus.size(), threads_,
                  [&](std::size_t chunk, std::size_t begin, std::size_t end) {
                    for (std::size_t i = begin; i < end; ++i) {
                      grids_[i] = build(corpus[i], axes_);
                      corpus[i] = TokenGrid();
                      if (!track_counts_) continue;
                      const auto& g = grids_[i];
                      for (std::uint32_t a = 0; a < g.instances.size(); ++a) {
                        for (const auto& link : g.instances[a].links) {
                          if (link.out_visit != kNoVisit) {
                            ++partial[chunk][key(g, a, link.other)];
                          }
                        }
                      }
                    }
                  });
  for (auto& p : partial) merge_counts(counts_, p);

  for (std::uint32_t gi = 0; gi < grids_.size(); ++gi) {
    const auto& g = grids_[gi];
    for (std::uint32_t a = 0; a < g.instances.size(); ++a) {
      const TokenClass cls = g.instances[a].cls;
      if (cls == kDead) continue;
      if (cls >= class_index_.size()) class_index_.resize(cls + 1);
      class_index_[cls].push_back({gi, a});
      ++instance_total_;
    }
  }
}

MergeEngine::GridState MergeEngine::build(const TokenGrid& grid,
                                          AxisMask axes) {
  GridState g;
  g.dims = grid.dims();
  const std::size_t cells = grid.cell_count();
  if (cells >= kNoVisit / kMaxAxes) {
    throw Error(ErrorCategory::kInvalidArgument, "grid too large for training");
  }
  const auto ids = grid.ids();
  const auto classes = grid.classes();

  bool identity = true;
  for (std::size_t i = 0; i < cells && identity; ++i) identity = ids[i] == i;

  if (identity) {
    g.instances.resize(cells);
    for (std::uint32_t i = 0; i < cells; ++i) {
      g.instances[i].cls = classes[i];
      g.instances[i].anchor = i;
    }
  } else {
    std::unordered_map<InstanceId, std::uint32_t> to_local;
    g.cell_to_local.resize(cells);
    for (std::uint32_t i = 0; i < cells; ++i) {
      auto [it, inserted] = to_local.emplace(
          ids[i], static_cast<std::uint32_t>(g.instances.size()));
      if (inserted) {
        g.instances.push_back({classes[i], i, {}});
        g.original_id.push_back(ids[i]);
      }
      g.cell_to_local[i] = it->second;
    }
  }
  g.parent.resize(g.instances.size());
  std::iota(g.parent.begin(), g.parent.end(), std::uint32_t{0});

  auto local_of = [&](std::size_t cell) -> std::uint32_t {
    return identity ? static_cast<std::uint32_t>(cell) : g.cell_to_local[cell];
  };

  const auto order = axes.visit_order(g.dims.ndim());
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const Position pos = g.dims.position(cell);
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      const std::size_t axis = order[rank];
      if (pos.coords[axis] + 1 >= g.dims.extent(axis)) continue;
      const std::uint32_t a = local_of(cell);
      const std::uint32_t b = local_of(cell + g.dims.stride(axis));
      if (a == b) continue;
      const auto visit = static_cast<std::uint32_t>(cell * kMaxAxes + rank);
      Link* ab = find_link(g.instances[a], b);
      if (ab == nullptr) {
        g.instances[a].links.push_back({b, visit, kNoVisit});
      } else {
        ab->out_visit = std::min(ab->out_visit, visit);
      }
      Link* ba = find_link(g.instances[b], a);
      if (ba == nullptr) {
        g.instances[b].links.push_back({a, kNoVisit, visit});
      } else {
        ba->in_visit = std::min(ba->in_visit, visit);
      }
    }
  }
  return g;
}

MergeEngine::Link* MergeEngine::find_link(Instance& inst, std::uint32_t other) {
  for (auto& link : inst.links) {
    if (link.other == other) return &link;
  }
  return nullptr;
}

Constellation MergeEngine::key(const GridState& g, std::uint32_t p,
                               std::uint32_t n) const {
  const auto& ip = g.instances[p];
  const auto& in = g.instances[n];
  return {ip.cls, in.cls,
          difference(g.dims.position(ip.anchor), g.dims.position(in.anchor))};
}

void MergeEngine::add_instance_counts(const GridState& g, std::uint32_t local,
                                      std::int64_t sign, CountDelta& delta,
                                      std::uint32_t skip) const {
  for (const auto& link : g.instances[local].links) {
    if (link.other == skip) continue;
    if (link.out_visit != kNoVisit) delta[key(g, local, link.other)] += sign;
    if (link.in_visit != kNoVisit) delta[key(g, link.other, local)] += sign;
  }
}

void MergeEngine::merge_pair(GridState& g, std::uint32_t p, std::uint32_t n,
                             TokenClass new_class, CountDelta* delta) {
  if (delta != nullptr) {
    add_instance_counts(g, p, -1, *delta, kNoVisit);
    add_instance_counts(g, n, -1, *delta, p);
  }
  Instance& ip = g.instances[p];
  Instance& in = g.instances[n];

  auto& plinks = ip.links;
  plinks.erase(std::remove_if(plinks.begin(), plinks.end(),
                              [n](const Link& l) { return l.other == n; }),
               plinks.end());

  for (const Link& nl : in.links) {
    if (nl.other == p) continue;
    const std::uint32_t x = nl.other;
    if (Link* px = find_link(ip, x)) {
      px->out_visit = std::min(px->out_visit, nl.out_visit);
      px->in_visit = std::min(px->in_visit, nl.in_visit);
    } else {
      plinks.push_back(nl);
    }
    // Re-point x's link from n to p, folding into an existing x-p link.
    auto& xlinks = g.instances[x].links;
    std::size_t xn = xlinks.size();
    std::size_t xp = xlinks.size();
    for (std::size_t i = 0; i < xlinks.size(); ++i) {
      if (xlinks[i].other == n) xn = i;
      if (xlinks[i].other == p) xp = i;
    }
    if (xp == xlinks.size()) {
      xlinks[xn].other = p;
    } else {
      xlinks[xp].out_visit = std::min(xlinks[xp].out_visit, xlinks[xn].out_visit);
      xlinks[xp].in_visit = std::min(xlinks[xp].in_visit, xlinks[xn].in_visit);
      xlinks.erase(xlinks.begin() + static_cast<std::ptrdiff_t>(xn));
    }
  }

  ip.cls = new_class;
  ip.anchor = std::min(ip.anchor, in.anchor);
  in.cls = kDead;
  in.links.clear();
  in.links.shrink_to_fit();
  g.parent[n] = p;

  if (delta != nullptr) add_instance_counts(g, p, +1, *delta, kNoVisit);
}

void MergeEngine::apply_delta(const CountDelta& delta) {
  for (const auto& [k, d] : delta) {
    if (d == 0) continue;
    auto it = counts_.find(k);
    const std::int64_t current = it == counts_.end() ? 0 : static_cast<std::int64_t>(it->second);
    const std::int64_t updated = current + d;
    if (updated < 0) {
      throw Error(ErrorCategory::kConsistency, "constellation count underflow");
    }
    if (updated == 0) {
      if (it != counts_.end()) counts_.erase(it);
    } else if (it == counts_.end()) {
      counts_.emplace(k, static_cast<std::uint64_t>(updated));
    } else {
      it->second = static_cast<std::uint64_t>(updated);
    }
  }
}

std::uint64_t MergeEngine::apply(const MergeRule& rule) {
  const auto& c = rule.constellation;
  if (c.class_p >= class_index_.size()) return 0;
  if (rule.new_class >= class_index_.size()) class_index_.resize(rule.new_class + 1);

  std::vector<Candidate> candidates;
  auto& entries = class_index_[c.class_p];
  std::size_t kept = 0;
  for (const IndexEntry& e : entries) {
    const GridState& g = grids_[e.grid];
    const Instance& ip = g.instances[e.local];
    if (ip.cls != c.class_p) continue;
    entries[kept++] = e;
    const Position pa = g.dims.position(ip.anchor);
    for (const Link& link : ip.links) {
      if (link.out_visit == kNoVisit) continue;
      const Instance& other = g.instances[link.other];
      if (other.cls != c.class_n) continue;
      if (difference(pa, g.dims.position(other.anchor)) != c.v_pn) continue;
      candidates.push_back({e.grid, link.out_visit, e.local, link.other});
    }
  }
  entries.resize(kept);
  if (candidates.empty()) return 0;

  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              return a.grid != b.grid ? a.grid < b.grid : a.visit < b.visit;
            });

  // Chunk on grid boundaries so no grid is touched by two workers.
  std::vector<std::size_t> grid_starts;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (i == 0 || candidates[i].grid != candidates[i - 1].grid) grid_starts.push_back(i);
  }
  grid_starts.push_back(candidates.size());
  const std::size_t groups = grid_starts.size() - 1;
  const std::size_t chunks = chunk_count(groups, threads_);

  struct ChunkResult {
    CountDelta delta;
    std::vector<IndexEntry> created;
    std::uint64_t merges = 0;
  };
  std::vector<ChunkResult> results(chunks);

  parallel_chunks(groups, threads_,
                  [&](std::size_t chunk, std::size_t begin, std::size_t end) {
                    auto& r = results[chunk];
                    for (std::size_t i = grid_starts[begin]; i < grid_starts[end]; ++i) {
                      const Candidate& cand = candidates[i];
                      GridState& g = grids_[cand.grid];
                      if (g.instances[cand.p].cls != c.class_p ||
                          g.instances[cand.n].cls != c.class_n) {
                        continue;
                      }
                      merge_pair(g, cand.p, cand.n, rule.new_class,
                                 track_counts_ ? &r.delta : nullptr);
                      r.created.push_back({cand.grid, cand.p});
                      ++r.merges;
                    }
                  });

  std::uint64_t merges = 0;
  for (auto& r : results) {
    if (track_counts_) apply_delta(r.delta);
    auto& target = class_index_[rule.new_class];
    target.insert(target.end(), r.created.begin(), r.created.end());
    merges += r.merges;
  }
  instance_total_ -= merges;
  return merges;
}

TokenGrid MergeEngine::grid(std::size_t index) const {
  const GridState& g = grids_[index];
  const std::size_t cells = g.dims.cell_count();
  std::vector<TokenClass> classes(cells);
  std::vector<InstanceId> ids(cells);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    std::uint32_t local =
        g.cell_to_local.empty() ? static_cast<std::uint32_t>(cell) : g.cell_to_local[cell];
    while (g.parent[local] != local) local = g.parent[local];
    classes[cell] = g.instances[local].cls;
    ids[cell] = g.original_id.empty() ? local : g.original_id[local];
  }
  return TokenGrid(g.dims, std::move(classes), std::move(ids));
}

std::vector<TokenGrid> MergeEngine::grids() const {
  std::vector<TokenGrid> out;
  out.reserve(grids_.size());
  for (std::size_t i = 0; i < grids_.size(); ++i) out.push_back(grid(i));
  return out;
}

}  // namespace mdbpe::detail
