// SPDX-License-Identifier: Apache-2.0

#include "mdbpe/seqfeat.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "test_util.hpp"

namespace mdbpe {
namespace {

constexpr TokenClass A = 0, B = 1, C = 2, D = 3, E = 4;

Offset off(std::int32_t a, std::int32_t b) { return Offset{a, b, 0}; }
Position at(std::uint32_t r, std::uint32_t c) { return Position{{r, c, 0}}; }

Vocabulary worked_vocab() {
  Vocabulary v(2, 2);
  v.add_merge({A, A, off(0, -1)});
  v.add_merge({A, B, off(0, -1)});
  v.add_merge({D, B, off(0, -2)});
  return v;
}

std::vector<double> add(std::vector<double> a, const std::vector<double>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

TEST(PositionalEncodingTest, SinCosPerAxis) {
  const PositionalEncoding pe(2, 4);
  EXPECT_EQ(pe.width(), 8u);
  const auto v = pe.encode(at(3, 5));
  // axis 0: sin(3), cos(3), sin(3/100), cos(3/100); axis 1 likewise with 5.
  const double expected[] = {std::sin(3.0),  std::cos(3.0),  std::sin(0.03), std::cos(0.03),
                             std::sin(5.0),  std::cos(5.0),  std::sin(0.05), std::cos(0.05)};
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(v[i], expected[i], 1e-12) << i;
  EXPECT_THROW(PositionalEncoding(2, 3), Error);
  EXPECT_THROW(PositionalEncoding(2, 0), Error);
}

TEST(PositionalEncodingTest, DistinctPositions) {
  const PositionalEncoding pe(2, 8);
  std::vector<std::vector<double>> seen;
  for (std::uint32_t r = 0; r < 16; ++r) {
    for (std::uint32_t c = 0; c < 16; ++c) {
      const auto v = pe.encode(at(r, c));
      for (const auto& s : seen) EXPECT_NE(s, v);
      seen.push_back(v);
    }
  }
}

TEST(IpeTest, SumsCoveredCells) {
  const PositionalEncoding pe(2, 6);
  const Vocabulary v = worked_vocab();
  const Dims dims{2, 12};
  EXPECT_EQ(ipe(v, A, at(0, 0), dims, pe), pe.encode(at(0, 0)));
  EXPECT_EQ(ipe(v, C, at(0, 0), dims, pe), add(pe.encode(at(0, 0)), pe.encode(at(0, 1))));
  const auto e = ipe(v, E, at(1, 4), dims, pe);
  const auto ref = add(add(pe.encode(at(1, 4)), pe.encode(at(1, 5))), pe.encode(at(1, 6)));
  for (std::size_t i = 0; i < e.size(); ++i) EXPECT_NEAR(e[i], ref[i], 1e-12);
  EXPECT_THROW(ipe(v, E, at(0, 10), dims, pe), Error);
}

TEST(IpeTest, LinearOverMergeConstituents) {
  const PositionalEncoding pe(2, 4);
  const Vocabulary v = worked_vocab();
  const Dims dims{1, 12};
  // E at column 2 = D at column 2 plus B at column 4.
  const auto e = ipe(v, E, at(0, 2), dims, pe);
  const auto parts = add(ipe(v, D, at(0, 2), dims, pe), ipe(v, B, at(0, 4), dims, pe));
  for (std::size_t i = 0; i < e.size(); ++i) EXPECT_NEAR(e[i], parts[i], 1e-12);
}

TEST(EmitFeaturesTest, SingleCellChain) {
  const PositionalEncoding pe(2, 4);
  const auto f = emit_features({Dims{1, 3}, {A, B, A}}, Vocabulary(2, 2), pe);
  ASSERT_EQ(f.size(), 3u);
  EXPECT_EQ(f[0].next_anchor_pe, pe.encode(at(0, 1)));
  EXPECT_EQ(f[1].next_anchor_pe, pe.encode(at(0, 2)));
  EXPECT_EQ(f[2].next_anchor_pe, std::vector<double>(8, 0.0));
  for (const auto& t : f) EXPECT_EQ(t.ipe, t.anchor_pe);
}

TEST(EmitFeaturesTest, WorkedSequenceNextAnchors) {
  const PositionalEncoding pe(2, 4);
  const auto f = emit_features({Dims{1, 12}, {C, C, E, D, E}}, worked_vocab(), pe);
  ASSERT_EQ(f.size(), 5u);
  const std::uint32_t anchors[] = {0, 2, 4, 7, 9};
  const std::uint32_t next[] = {2, 4, 7, 9};
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(f[i].anchor_pe, pe.encode(at(0, anchors[i])));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(f[i].next_anchor_pe, pe.encode(at(0, next[i])));
  EXPECT_EQ(f[4].next_anchor_pe, std::vector<double>(8, 0.0));
}

TEST(EmitFeaturesTest, PrefixCausality) {
  std::mt19937_64 rng(31);
  const PositionalEncoding pe(2, 6);
  std::vector<TokenGrid> corpus;
  for (int i = 0; i < 8; ++i) corpus.push_back(testing::random_grid(rng, Dims{9, 11}, 3));
  const auto r = train(corpus, 3, {.extra_tokens = 20});
  for (const auto& g : r.grids) {
    const auto seq = encode(g, r.vocab);
    const auto full = emit_features(seq, r.vocab, pe);
    ASSERT_EQ(full.size(), seq.tokens.size());
    for (std::size_t k = 1; k < seq.tokens.size(); k += 3) {
      CompressedSequence prefix{seq.dims, {seq.tokens.begin(), seq.tokens.begin() + k}};
      const auto part = emit_features(prefix, r.vocab, pe);
      ASSERT_EQ(part.size(), k);
      for (std::size_t i = 0; i < k; ++i) {
        EXPECT_EQ(part[i].anchor_pe, full[i].anchor_pe);
        EXPECT_EQ(part[i].next_anchor_pe, full[i].next_anchor_pe);
        EXPECT_EQ(part[i].ipe, full[i].ipe);
      }
    }
  }
}

TEST(EmitFeaturesTest, PropagatesDecodeErrors) {
  const PositionalEncoding pe(2, 4);
  EXPECT_THROW(emit_features({Dims{1, 3}, {A, A, C}}, worked_vocab(), pe), DecodeError);
}

TEST(LegalMaskTest, EmptyStateAllowsBaseClasses) {
  const GenerationState s(Dims{2, 2});
  const auto mask = legal_mask(s, worked_vocab());
  EXPECT_TRUE(mask[A]);
  EXPECT_TRUE(mask[B]);
  EXPECT_TRUE(mask[C]);
  EXPECT_FALSE(mask[E]);  // three wide on a two wide grid
}

TEST(LegalMaskTest, BoundaryAndOverlap) {
  const Vocabulary v = worked_vocab();
  GenerationState s(Dims{1, 3});
  s.place(A, v);
  s.place(A, v);
  EXPECT_EQ(s.next_anchor(), at(0, 2));
  EXPECT_FALSE(legal_mask(s, v)[C]);  // boundary

  Vocabulary w(2, 1);
  const TokenClass vert = w.add_merge({A, A, off(-1, 0)});
  const TokenClass horiz = w.add_merge({A, A, off(0, -1)});
  GenerationState t(Dims{2, 2});
  t.place(A, w);
  t.place(vert, w);
  EXPECT_EQ(t.next_anchor(), at(1, 0));
  const auto mask = legal_mask(t, w);
  EXPECT_TRUE(mask[A]);
  EXPECT_FALSE(mask[horiz]);  // (1,1) already covered
  EXPECT_THROW(t.place(horiz, w), DecodeError);
  t.place(A, w);
  EXPECT_TRUE(t.complete());
  EXPECT_THROW(legal_mask(t, w), Error);
}

TEST(LegalMaskTest, GuidedGenerationAlwaysDecodes) {
  std::mt19937_64 rng(41);
  std::vector<TokenGrid> corpus;
  for (int i = 0; i < 6; ++i) corpus.push_back(testing::random_grid(rng, Dims{8, 8}, 3));
  const auto r = train(corpus, 3, {.extra_tokens = 30});
  for (int trial = 0; trial < 200; ++trial) {
    GenerationState s(testing::random_dims(rng, 2, 8));
    while (!s.complete()) {
      const auto mask = legal_mask(s, r.vocab);
      std::vector<TokenClass> legal;
      for (TokenClass c = 0; c < mask.size(); ++c) {
        if (mask[c]) legal.push_back(c);
        if (r.vocab.is_base(c)) {
          ASSERT_TRUE(mask[c]);
        }
      }
      std::uniform_int_distribution<std::size_t> pick(0, legal.size() - 1);
      s.place(legal[pick(rng)], r.vocab);
    }
    const TokenGrid g = decode({s.dims(), s.tokens()}, r.vocab);
    g.validate();
  }
}

TEST(FeatureFormatTest, MdftLayout) {
  const PositionalEncoding pe(1, 2);
  const auto f = emit_features({Dims{2}, {A, B}}, Vocabulary(1, 2), pe);
  const std::string bytes = write_features(f, pe.width());
  ASSERT_EQ(bytes.size(), 4u + 1 + 4 + 4 + 2 * 3 * 2 * 4);
  EXPECT_EQ(bytes.substr(0, 5), std::string("MDFT\x01", 5));
  float first_next[2];
  std::memcpy(first_next, bytes.data() + 13 + 8, 8);
  EXPECT_EQ(first_next[0], static_cast<float>(std::sin(1.0)));
  EXPECT_EQ(first_next[1], static_cast<float>(std::cos(1.0)));
}

}  // namespace
}  // namespace mdbpe
