// SPDX-License-Identifier: Apache-2.0

#include "mdbpe/collapse.hpp"

#include <gtest/gtest.h>

#include <json.hpp>
#include <random>
#include <set>

#include "test_util.hpp"

namespace mdbpe {
namespace {

Codebook line(std::initializer_list<double> xs) {
  std::vector<std::vector<double>> rows;
  for (double x : xs) rows.push_back({x});
  return Codebook::from_rows(rows);
}

double objective(const Codebook& cb, const std::vector<std::vector<double>>& centers) {
  double total = 0;
  for (std::size_t i = 0; i < cb.size(); ++i) {
    double best = 1e300;
    for (const auto& c : centers) best = std::min(best, squared_distance(cb.row(i), c));
    total += best;
  }
  return total;
}

TEST(FpsTest, HandExamples) {
  const Codebook cb = line({0, 10, 1, 9});
  EXPECT_EQ(farthest_point_sample(cb, 2), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(farthest_point_sample(cb, 1), (std::vector<std::size_t>{0}));
  const auto all = farthest_point_sample(cb, 4);
  EXPECT_EQ(std::set<std::size_t>(all.begin(), all.end()), (std::set<std::size_t>{0, 1, 2, 3}));
  EXPECT_THROW(farthest_point_sample(cb, 0), Error);
  EXPECT_THROW(farthest_point_sample(cb, 5), Error);
}

TEST(KMeansTest, ZeroItersKeepsSeeds) {
  const Codebook cb = line({0, 10, 1, 9});
  const std::vector<std::size_t> seeds{0, 1};
  const auto r = kmeans_refine(cb, seeds, 0);
  EXPECT_EQ(r.centers, (std::vector<std::vector<double>>{{0.0}, {10.0}}));
}

TEST(KMeansTest, FixedPoint) {
  const Codebook cb = line({0, 10});
  const std::vector<std::size_t> seeds{0, 1};
  const auto r = kmeans_refine(cb, seeds);
  EXPECT_EQ(r.centers, (std::vector<std::vector<double>>{{0.0}, {10.0}}));
  EXPECT_EQ(r.iterations, 1u);
}

TEST(KMeansTest, TwoBlobsMatchBestPartition) {
  // Tiny enough to enumerate every 2-partition.
  const Codebook cb = Codebook::from_rows(
      {{0, 0}, {0.5, 0.2}, {0.1, 0.6}, {8, 8}, {8.4, 7.7}, {7.6, 8.3}});
  const auto r = kmeans_refine(cb, farthest_point_sample(cb, 2));
  double best = 1e300;
  for (unsigned mask = 1; mask < (1u << cb.size()) - 1; ++mask) {
    std::vector<std::vector<double>> centers(2, std::vector<double>(2, 0.0));
    std::vector<int> n(2, 0);
    for (std::size_t i = 0; i < cb.size(); ++i) {
      const int side = (mask >> i) & 1;
      ++n[side];
      for (int d = 0; d < 2; ++d) centers[side][d] += cb.row(i)[d];
    }
    for (int s = 0; s < 2; ++s) {
      for (int d = 0; d < 2; ++d) centers[s][d] /= n[s];
    }
    best = std::min(best, objective(cb, centers));
  }
  EXPECT_NEAR(objective(cb, r.centers), best, 1e-9);
  for (const auto& c : r.centers) {
    const bool low = c[0] <= 0.5 && c[1] <= 0.6;
    const bool high = c[0] >= 7.6 && c[0] <= 8.4 && c[1] >= 7.7 && c[1] <= 8.3;
    EXPECT_TRUE(low || high);
  }
}

TEST(KMeansTest, ObjectiveNonIncreasing) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> rows(60, std::vector<double>(3));
    for (auto& r : rows) {
      for (auto& x : r) x = g(rng) * 3;
    }
    const Codebook cb = Codebook::from_rows(rows);
    const auto r = kmeans_refine(cb, farthest_point_sample(cb, 6));
    ASSERT_FALSE(r.objective.empty());
    for (std::size_t i = 1; i < r.objective.size(); ++i) {
      EXPECT_LE(r.objective[i], r.objective[i - 1] + 1e-9);
    }
  }
}

TEST(CollapseMapTest, NearestCenterWithLowTie) {
  const Codebook cb = line({0, 5, 10});
  const auto map = make_collapse_map(cb, {{0.0}, {10.0}});
  EXPECT_EQ(map.k, 2u);
  EXPECT_EQ(map.assign, (std::vector<TokenClass>{0, 0, 1}));
}

TEST(SnapTest, UnifiesVariants) {
  // Classes: B=0, A=1, A'=2, A''=3; the three A variants sit close together.
  const Codebook cb = line({-10, 1, 1.2, 0.9});
  const auto map = make_collapse_map(cb, {{-10.0}, {1.0}});
  const std::vector<TokenClass> before{0, 2, 0, 3, 0, 1, 0, 1, 0, 3};
  const std::vector<TokenGrid> corpus{TokenGrid::from_classes(Dims{1, 10}, before, 4)};
  const auto out = snap(corpus, map);
  const std::vector<TokenClass> expected{0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
  EXPECT_TRUE(std::equal(out[0].classes().begin(), out[0].classes().end(), expected.begin()));
  EXPECT_EQ(out[0].instance_count(), 10u);
}

TEST(SnapTest, IdentityAndIdempotence) {
  std::mt19937_64 rng(9);
  std::vector<TokenGrid> corpus;
  for (int i = 0; i < 5; ++i) corpus.push_back(testing::random_grid(rng, Dims{5, 5}, 6));
  const Codebook cb = line({0, 1, 2, 3, 4, 5});
  std::vector<std::vector<double>> same;
  for (double x = 0; x < 6; ++x) same.push_back({x});
  EXPECT_EQ(snap(corpus, make_collapse_map(cb, same)), corpus);

  const auto map = collapse_codebook(cb, 3);
  const auto once = snap(corpus, map);
  const auto induced = Codebook::from_rows(map.centers);
  const auto twice = snap(once, make_collapse_map(induced, map.centers));
  EXPECT_EQ(once, twice);
  std::set<TokenClass> distinct;
  for (const auto& g : once) distinct.insert(g.classes().begin(), g.classes().end());
  EXPECT_LE(distinct.size(), 3u);

  CollapseMap small{1, {{0.0}}, {0}};
  EXPECT_THROW(snap(corpus, small), Error);
}

TEST(SnapTest, RecoversSeparatedClusters) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> truth;
  for (std::size_t c = 0; c < 8; ++c) {
    for (int i = 0; i < 16; ++i) {
      rows.push_back({20.0 * static_cast<double>(c % 4) + u(rng) * 0.5,
                      20.0 * static_cast<double>(c / 4) + u(rng) * 0.5});
      truth.push_back(c);
    }
  }
  const auto map = collapse_codebook(Codebook::from_rows(rows), 8);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows.size(); ++j) {
      EXPECT_EQ(truth[i] == truth[j], map.assign[i] == map.assign[j]);
    }
  }
}

TEST(PruneTest, Examples) {
  std::vector<std::size_t> lengths(100);
  for (std::size_t i = 0; i < 100; ++i) lengths[i] = (i * 37) % 100;
  const auto keep = prune_indices(lengths, 0.05);
  ASSERT_EQ(keep.size(), 95u);
  for (std::size_t i : keep) EXPECT_LT(lengths[i], 95u);
  EXPECT_TRUE(std::is_sorted(keep.begin(), keep.end()));

  const std::vector<std::size_t> equal(20, 7);
  const auto kept = prune_indices(equal, 0.05);
  ASSERT_EQ(kept.size(), 19u);
  EXPECT_EQ(kept.back(), 18u);

  EXPECT_EQ(prune_indices(equal, 0.0).size(), 20u);
  EXPECT_THROW(prune_indices(equal, 1.0), Error);
  EXPECT_THROW(prune_indices(equal, -0.1), Error);
}

TEST(PruneTest, SequencesKeepOrder) {
  const std::vector<CompressedSequence> seqs{
      {Dims{1, 3}, {0, 0, 0}}, {Dims{1, 1}, {0}}, {Dims{1, 2}, {0, 0}}};
  const auto out = prune(seqs, 0.2);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0], seqs[1]);
  EXPECT_EQ(out[1], seqs[2]);
}

TEST(CollapseFormatTest, CodebookAndMapRoundTrip) {
  const Codebook cb = Codebook::from_rows({{1.5, -2}, {0.25, 3}});
  const std::string bytes = write_codebook(cb);
  EXPECT_EQ(bytes.size(), 4u + 1 + 4 + 4 + 16);
  EXPECT_EQ(read_codebook(bytes), cb);
  EXPECT_THROW(read_codebook(bytes.substr(0, 20)), Error);

  const auto map = make_collapse_map(cb, {{1.0, -2.0}});
  const std::string doc = write_collapse_map(map);
  const auto j = nlohmann::json::parse(doc);
  EXPECT_EQ(j["k"], 1);
  EXPECT_EQ(j["assign"].size(), 2u);
  EXPECT_EQ(read_collapse_map(doc), map);
  EXPECT_THROW(Codebook::from_rows({{1.0}, {std::nan("")}}), Error);
}

}  // namespace
}  // namespace mdbpe
