// SPDX-License-Identifier: Apache-2.0

#include "mdbpe/trainer.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "mdbpe/error.hpp"
#include "merge_engine.hpp"

namespace mdbpe {

std::vector<std::size_t> AxisMask::visit_order(std::size_t ndim) const {
  std::vector<std::size_t> order;
  for (std::size_t k = ndim; k-- > 0;) {
    if (has(k)) order.push_back(k);
  }
  return order;
}

void merge_counts(CountTable& into, const CountTable& other) {
  for (const auto& [k, v] : other) into[k] += v;
}

namespace {

std::unordered_map<InstanceId, std::size_t> first_cells(const TokenGrid& grid) {
  std::unordered_map<InstanceId, std::size_t> anchors;
  const auto ids = grid.ids();
  for (std::size_t i = 0; i < ids.size(); ++i) anchors.emplace(ids[i], i);
  return anchors;
}

void check_classes(const TokenGrid& grid, TokenClass limit) {
  for (TokenClass c : grid.classes()) {
    if (c >= limit) {
      throw Error(ErrorCategory::kOutOfRange,
                  "class " + std::to_string(c) + " outside vocabulary of size " +
                      std::to_string(limit));
    }
  }
}

}  // namespace

CountTable count_constellations(std::span<const TokenGrid> corpus,
                                const Vocabulary& vocab, AxisMask axes,
                                CountStats* stats) {
  CountTable table;
  std::uint64_t visits = 0;
  for (const TokenGrid& grid : corpus) {
    check_classes(grid, vocab.size());
    const Dims& dims = grid.dims();
    const auto anchors = first_cells(grid);
    const auto order = axes.visit_order(dims.ndim());
    std::unordered_set<std::uint64_t> used;
    for (std::size_t cell = 0; cell < grid.cell_count(); ++cell) {
      const Position pos = dims.position(cell);
      for (std::size_t axis : order) {
        if (pos.coords[axis] + 1 >= dims.extent(axis)) continue;
        ++visits;
        const std::size_t neighbor = cell + dims.stride(axis);
        const InstanceId p = grid.id_at(cell);
        const InstanceId n = grid.id_at(neighbor);
        if (p == n) continue;
        if (!used.insert((std::uint64_t{p} << 32) | n).second) continue;
        const Offset v = difference(dims.position(anchors.at(p)),
                                    dims.position(anchors.at(n)));
        ++table[{grid.class_at(cell), grid.class_at(neighbor), v}];
      }
    }
  }
  if (stats != nullptr) stats->pair_visits += visits;
  return table;
}

std::optional<Constellation> select_merge(const CountTable& table) {
  std::optional<Constellation> best;
  std::uint64_t best_count = 0;
  for (const auto& [key, count] : table) {
    if (count > best_count || (count == best_count && best && key < *best)) {
      best = key;
      best_count = count;
    }
  }
  if (best_count <= 1) return std::nullopt;
  return best;
}

std::size_t apply_merge(TokenGrid& grid, const MergeRule& rule, AxisMask axes) {
  const Dims& dims = grid.dims();
  const auto& c = rule.constellation;
  auto anchors = first_cells(grid);
  std::unordered_map<InstanceId, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < grid.cell_count(); ++i) cells[grid.id_at(i)].push_back(i);

  GridMutator edit(grid);
  const auto order = axes.visit_order(dims.ndim());
  std::size_t applied = 0;
  for (std::size_t cell = 0; cell < grid.cell_count(); ++cell) {
    const Position pos = dims.position(cell);
    for (std::size_t axis : order) {
      if (pos.coords[axis] + 1 >= dims.extent(axis)) continue;
      const std::size_t neighbor = cell + dims.stride(axis);
      const InstanceId p = grid.id_at(cell);
      const InstanceId n = grid.id_at(neighbor);
      if (p == n) continue;
      if (grid.class_at(cell) != c.class_p || grid.class_at(neighbor) != c.class_n) {
        continue;
      }
      const Offset v = difference(dims.position(anchors.at(p)),
                                  dims.position(anchors.at(n)));
      if (v != c.v_pn) continue;

      auto& pcells = cells[p];
      auto ncells = std::move(cells[n]);
      cells.erase(n);
      for (std::size_t i : pcells) edit.set_class(i, rule.new_class);
      for (std::size_t i : ncells) edit.set(i, rule.new_class, p);
      pcells.insert(pcells.end(), ncells.begin(), ncells.end());
      anchors[p] = std::min(anchors[p], anchors[n]);
      anchors.erase(n);
      ++applied;
    }
  }
  return applied;
}

namespace {

std::vector<TokenGrid> reset_to_base(std::vector<TokenGrid> corpus,
                                     TokenClass base_size) {
  for (auto& g : corpus) {
    g = TokenGrid::from_classes(g.dims(), g.classes(), base_size);
  }
  return corpus;
}

}  // namespace

TrainResult train(std::vector<TokenGrid> corpus, TokenClass base_size,
                  const TrainConfig& config, const MergeCallback& on_merge) {
  if (corpus.empty()) {
    throw Error(ErrorCategory::kInvalidArgument, "training corpus is empty");
  }
  const std::size_t ndim = corpus.front().dims().ndim();
  Vocabulary vocab(ndim, base_size);
  detail::MergeEngine engine(reset_to_base(std::move(corpus), base_size), ndim,
                             config.neighbor_axes, true, config.threads);

  std::vector<MergeStep> steps;
  for (std::size_t i = 0; i < config.extra_tokens; ++i) {
    const auto best = select_merge(engine.counts());
    if (!best) break;
    MergeStep step;
    step.count = engine.counts().at(*best);
    step.rule = {vocab.add_merge(*best), *best};
    step.merges_applied = engine.apply(step.rule);
    step.instances_after = engine.instance_total();
    step.total_cells = engine.cell_total();
    if (on_merge) on_merge(step);
    steps.push_back(step);
  }
  return {std::move(vocab), engine.grids(), std::move(steps)};
}

std::vector<TokenGrid> tokenize(std::vector<TokenGrid> corpus,
                                const Vocabulary& vocab, AxisMask axes,
                                std::size_t threads) {
  if (corpus.empty()) return corpus;
  for (const auto& g : corpus) {
    if (g.dims().ndim() != vocab.ndim()) {
      throw Error(ErrorCategory::kInvalidArgument,
                  "grid has " + std::to_string(g.dims().ndim()) +
                      " axes, vocabulary expects " + std::to_string(vocab.ndim()));
    }
  }
  detail::MergeEngine engine(reset_to_base(std::move(corpus), vocab.base_size()),
                             vocab.ndim(), axes, false, threads);
  for (const auto& rule : vocab.merges()) engine.apply(rule);
  return engine.grids();
}

TokenGrid tokenize(TokenGrid grid, const Vocabulary& vocab, AxisMask axes) {
  std::vector<TokenGrid> one;
  one.push_back(std::move(grid));
  return std::move(tokenize(std::move(one), vocab, axes, 1).front());
}

}  // namespace mdbpe
