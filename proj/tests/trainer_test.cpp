// SPDX-License-Identifier: Apache-2.0

#include "mdbpe/trainer.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

#include "mdbpe/codec.hpp"
#include "mdbpe/error.hpp"
#include "oracles/bpe1d.hpp"
#include "oracles/brute_force.hpp"
#include "test_util.hpp"

namespace mdbpe {
namespace {

constexpr TokenClass A = 0, B = 1, C = 2, D = 3, E = 4;

Offset off(std::int32_t a, std::int32_t b, std::int32_t c = 0) { return Offset{a, b, c}; }

// Classes of distinct instances in scan order of first occurrence.
std::vector<TokenClass> instance_sequence(const TokenGrid& g) {
  std::vector<TokenClass> out;
  std::set<InstanceId> seen;
  for (std::size_t f = 0; f < g.cell_count(); ++f) {
    if (seen.insert(g.id_at(f)).second) out.push_back(g.class_at(f));
  }
  return out;
}

std::vector<TokenGrid> one(TokenGrid g) { return {std::move(g)}; }

TEST(CountTest, WorkedRowCounts) {
  const auto corpus = one(testing::letter_row("AAAAABBABABB"));
  const Vocabulary v(2, 2);
  const auto t = oracle::sorted(count_constellations(corpus, v));
  // Counting by hand gives BA twice (positions 6-7 and 8-9).
  const std::map<Constellation, std::uint64_t> expected{
      {{A, A, off(0, -1)}, 4}, {{A, B, off(0, -1)}, 3},
      {{B, A, off(0, -1)}, 2}, {{B, B, off(0, -1)}, 2}};
  EXPECT_EQ(t, expected);
  EXPECT_EQ(t, oracle::brute_force_counts(corpus));
}

TEST(CountTest, WorkedRowSecondRound) {
  auto corpus = one(testing::letter_row("AAAAABBABABB"));
  Vocabulary v(2, 2);
  const MergeRule rule{v.add_merge({A, A, off(0, -1)}), {A, A, off(0, -1)}};
  apply_merge(corpus[0], rule);
  const std::map<Constellation, std::uint64_t> expected{
      {{C, C, off(0, -2)}, 1}, {{C, A, off(0, -2)}, 1}, {{A, B, off(0, -1)}, 3},
      {{B, B, off(0, -1)}, 2}, {{B, A, off(0, -1)}, 2}};
  EXPECT_EQ(oracle::sorted(count_constellations(corpus, v)), expected);
}

TEST(CountTest, UniformTwoByTwo) {
  const std::vector<TokenGrid> corpus{
      TokenGrid::from_classes(Dims{2, 2}, std::vector<TokenClass>(4, A), 1)};
  const auto t = oracle::sorted(count_constellations(corpus, Vocabulary(2, 1)));
  const std::map<Constellation, std::uint64_t> expected{{{A, A, off(0, -1)}, 2},
                                                        {{A, A, off(-1, 0)}, 2}};
  EXPECT_EQ(t, expected);
}

TEST(CountTest, Checkerboard) {
  const std::vector<TokenGrid> corpus{
      TokenGrid::from_classes(Dims{2, 2}, std::vector<TokenClass>{A, B, B, A}, 2)};
  const auto t = count_constellations(corpus, Vocabulary(2, 2));
  EXPECT_EQ(t.size(), 4u);
  for (const auto& [k, n] : t) EXPECT_EQ(n, 1u);
}

TEST(CountTest, ClassOutOfRangeThrows) {
  const std::vector<TokenGrid> corpus{
      TokenGrid::from_classes(Dims{1, 2}, std::vector<TokenClass>{A, 5}, 6)};
  EXPECT_THROW(count_constellations(corpus, Vocabulary(2, 2)), Error);
}

TEST(CountTest, PairVisitsMatchClosedForm) {
  for (std::uint32_t h = 1; h <= 7; ++h) {
    for (std::uint32_t w = 1; w <= 7; ++w) {
      const std::vector<TokenGrid> corpus{
          TokenGrid::from_classes(Dims{h, w}, std::vector<TokenClass>(h * w, A), 1)};
      CountStats stats;
      count_constellations(corpus, Vocabulary(2, 1), AxisMask::all(), &stats);
      EXPECT_EQ(stats.pair_visits, std::uint64_t{(w - 1) * h + w * (h - 1)});
    }
  }
}

TEST(CountTest, MatchesBruteForceOnRandomGrids) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t ndim = 1 + trial % 3;
    std::vector<TokenGrid> corpus{
        testing::random_grid(rng, testing::random_dims(rng, ndim, ndim == 3 ? 4 : 6), 4)};
    // Start from a partially merged state so multi-cell instances show up.
    const auto trained = train(corpus, 4, {.extra_tokens = static_cast<std::size_t>(trial % 5)});
    EXPECT_EQ(oracle::sorted(count_constellations(trained.grids, trained.vocab)),
              oracle::brute_force_counts(trained.grids))
        << "trial " << trial;
  }
}

TEST(CountTest, AxisMaskRestrictsNeighbors) {
  const std::vector<TokenGrid> corpus{
      TokenGrid::from_classes(Dims{2, 2}, std::vector<TokenClass>(4, A), 1)};
  const auto t = oracle::sorted(count_constellations(corpus, Vocabulary(2, 1), AxisMask(0x2)));
  const std::map<Constellation, std::uint64_t> expected{{{A, A, off(0, -1)}, 2}};
  EXPECT_EQ(t, expected);
  EXPECT_EQ(t, oracle::brute_force_counts(corpus, AxisMask(0x2)));
}

TEST(SelectTest, PicksMaxThenSmallestKey) {
  CountTable t;
  t[{A, A, off(0, -1)}] = 4;
  t[{A, B, off(0, -1)}] = 3;
  EXPECT_EQ(select_merge(t), (Constellation{A, A, off(0, -1)}));

  CountTable tie;
  tie[{B, A, off(0, -1)}] = 5;
  tie[{A, B, off(0, -1)}] = 5;
  tie[{A, B, off(-1, 0)}] = 5;
  EXPECT_EQ(select_merge(tie), (Constellation{A, B, off(-1, 0)}));

  EXPECT_FALSE(select_merge(CountTable{}));
  CountTable ones;
  ones[{A, B, off(0, -1)}] = 1;
  EXPECT_FALSE(select_merge(ones));
}

TEST(ApplyTest, WorkedFirstMerge) {
  TokenGrid g = testing::letter_row("AAAAABBABABB");
  const std::size_t n = apply_merge(g, {C, {A, A, off(0, -1)}});
  EXPECT_EQ(n, 2u);
  EXPECT_EQ(instance_sequence(g), testing::letters("CCABBABABB"));
  g.validate();
}

TEST(ApplyTest, GreedyOverlap) {
  TokenGrid g = testing::letter_row("AAAAA", 1);
  EXPECT_EQ(apply_merge(g, {1, {A, A, off(0, -1)}}), 2u);
  EXPECT_EQ(instance_sequence(g), (std::vector<TokenClass>{1, 1, A}));
  EXPECT_EQ(g.instance_count(), 3u);
}

TEST(ApplyTest, NoOccurrenceLeavesGrid) {
  TokenGrid g = testing::letter_row("ABAB");
  const TokenGrid before = g;
  EXPECT_EQ(apply_merge(g, {2, {B, B, off(0, -1)}}), 0u);
  EXPECT_EQ(g, before);
}

TEST(ApplyTest, EachMergeRemovesOneInstance) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<TokenGrid> corpus{testing::random_grid(rng, testing::random_dims(rng, 2, 8), 3)};
    Vocabulary v(2, 3);
    for (int step = 0; step < 4; ++step) {
      const auto best = select_merge(count_constellations(corpus, v));
      if (!best) break;
      const MergeRule rule{v.add_merge(*best), *best};
      const std::size_t before = corpus[0].instance_count();
      const std::size_t applied = apply_merge(corpus[0], rule);
      EXPECT_GE(applied, 1u);
      EXPECT_EQ(corpus[0].instance_count(), before - applied);
      corpus[0].validate();
    }
  }
}

TEST(TrainTest, WorkedExample) {
  const auto r = train(one(testing::letter_row("AAAAABBABABB")), 2, {.extra_tokens = 3});
  ASSERT_EQ(r.vocab.merges().size(), 3u);
  EXPECT_EQ(r.vocab.merges()[0], (MergeRule{C, {A, A, off(0, -1)}}));
  EXPECT_EQ(r.vocab.merges()[1], (MergeRule{D, {A, B, off(0, -1)}}));
  EXPECT_EQ(r.vocab.merges()[2], (MergeRule{E, {D, B, off(0, -2)}}));
  EXPECT_EQ(instance_sequence(r.grids[0]), (std::vector<TokenClass>{C, C, E, D, E}));
  ASSERT_EQ(r.steps.size(), 3u);
  EXPECT_EQ(r.steps[0].count, 4u);
  EXPECT_EQ(r.steps[2].instances_after, 5u);
}

TEST(TrainTest, ZeroExtraTokens) {
  const auto corpus = one(testing::letter_row("AABB"));
  const auto r = train(corpus, 2, {.extra_tokens = 0});
  EXPECT_TRUE(r.vocab.merges().empty());
  EXPECT_EQ(r.grids, corpus);
}

TEST(TrainTest, EarlyStopWhenAllCountsAreOne) {
  std::vector<TokenClass> cls(9);
  for (TokenClass i = 0; i < 9; ++i) cls[i] = i;
  const auto r = train(one(TokenGrid::from_classes(Dims{3, 3}, cls, 9)), 9, {.extra_tokens = 5});
  EXPECT_TRUE(r.vocab.merges().empty());
}

TEST(TrainTest, EmptyCorpusThrows) {
  EXPECT_THROW(train({}, 2, {.extra_tokens = 1}), Error);
}

TEST(TrainTest, MatchesNaiveLoop) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t ndim = 1 + trial % 3;
    const TokenClass classes = 2 + trial % 3;
    std::vector<TokenGrid> corpus;
    const int n = 1 + trial % 4;
    for (int i = 0; i < n; ++i) {
      corpus.push_back(
          testing::random_grid(rng, testing::random_dims(rng, ndim, ndim == 3 ? 5 : 10), classes));
    }
    const AxisMask axes = trial % 7 == 0 ? AxisMask(0x1) : AxisMask::all();
    const auto naive = oracle::naive_train(corpus, classes, 12, axes);
    const auto fast = train(corpus, classes,
                            {.extra_tokens = 12, .neighbor_axes = axes,
                             .threads = 1 + static_cast<std::size_t>(trial % 3)});
    ASSERT_EQ(fast.vocab.merges(), naive.rules) << "trial " << trial;
    for (std::size_t i = 0; i < fast.steps.size(); ++i) {
      EXPECT_EQ(fast.steps[i].count, naive.counts[i]);
    }
    ASSERT_EQ(fast.grids.size(), naive.grids.size());
    for (std::size_t i = 0; i < fast.grids.size(); ++i) {
      EXPECT_EQ(instance_sequence(fast.grids[i]), instance_sequence(naive.grids[i]));
      EXPECT_EQ(encode(fast.grids[i], fast.vocab), encode(naive.grids[i], fast.vocab));
    }
  }
}

TEST(TrainTest, OneDimensionalMatchesClassicBpe) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    std::uniform_int_distribution<std::uint32_t> len(1, 64), alpha(1, 6);
    const std::uint32_t k = alpha(rng);
    std::uniform_int_distribution<std::uint32_t> sym(0, k - 1);
    std::vector<std::uint32_t> s(len(rng));
    for (auto& x : s) x = sym(rng);
    const auto ref = oracle::bpe1d_train({s}, k, 10);
    const auto r = train(one(TokenGrid::from_classes(
                             Dims{1, static_cast<std::uint32_t>(s.size())}, s, k)),
                         k, {.extra_tokens = 10, .neighbor_axes = AxisMask(0x2)});
    ASSERT_EQ(r.vocab.merges().size(), ref.merges.size());
    for (std::size_t i = 0; i < ref.merges.size(); ++i) {
      const auto& c = r.vocab.merges()[i].constellation;
      EXPECT_EQ(c.class_p, ref.merges[i].left);
      EXPECT_EQ(c.class_n, ref.merges[i].right);
      EXPECT_EQ(r.vocab.merges()[i].new_class, ref.merges[i].replacement);
    }
    EXPECT_EQ(instance_sequence(r.grids[0]), ref.sequences[0]);
  }
}

TEST(TrainTest, DeterministicAcrossThreadCounts) {
  std::mt19937_64 rng(4);
  std::vector<TokenGrid> corpus;
  for (int i = 0; i < 40; ++i) corpus.push_back(testing::random_grid(rng, Dims{8, 8}, 4));
  const auto a = train(corpus, 4, {.extra_tokens = 30, .threads = 1});
  const auto b = train(corpus, 4, {.extra_tokens = 30, .threads = 8});
  EXPECT_EQ(write_vocab(a.vocab), write_vocab(b.vocab));
  EXPECT_EQ(a.grids, b.grids);
}

TEST(TrainTest, HeldOutLengthNonIncreasingInRules) {
  std::mt19937_64 rng(8);
  std::vector<TokenGrid> train_set, held_out;
  for (int i = 0; i < 20; ++i) train_set.push_back(testing::random_grid(rng, Dims{10, 10}, 3));
  for (int i = 0; i < 10; ++i) held_out.push_back(testing::random_grid(rng, Dims{10, 10}, 3));
  const auto r = train(train_set, 3, {.extra_tokens = 40});
  double prev = 1e18;
  for (std::size_t m = 0; m <= r.vocab.merges().size(); m += 4) {
    Vocabulary partial(2, 3);
    for (std::size_t i = 0; i < m; ++i) partial.add_merge(r.vocab.merges()[i].constellation);
    const double mean = compression_stats(held_out, partial).mean_length;
    EXPECT_LE(mean, prev);
    prev = mean;
  }
}

TEST(TokenizeTest, ReproducesTrainingState) {
  std::mt19937_64 rng(13);
  std::vector<TokenGrid> corpus;
  for (int i = 0; i < 10; ++i) corpus.push_back(testing::random_grid(rng, Dims{7, 9}, 3));
  const auto r = train(corpus, 3, {.extra_tokens = 20});
  EXPECT_EQ(tokenize(corpus, r.vocab), r.grids);
  EXPECT_EQ(tokenize(corpus[3], r.vocab), r.grids[3]);
}

}  // namespace
}  // namespace mdbpe
