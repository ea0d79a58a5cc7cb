// Copyright 2026 The TreeMTL Recommender Authors
//
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <set>
#include <unordered_set>

#include "test_support.hpp"
#include "treemtl/enumerator.hpp"

namespace treemtl {
namespace {

std::set<CanonicalKey> keys_of(const std::vector<Layout>& layouts) {
  std::set<CanonicalKey> keys;
  for (const auto& l : layouts) keys.insert(canonicalize(l));
  return keys;
}

TEST(SetPartitionsTest, BellNumbers) {
  const std::vector<std::size_t> bell{1, 2, 5, 15, 52, 203, 877, 4140};
  for (int n = 1; n <= 8; ++n) EXPECT_EQ(set_partitions(n).size(), bell[static_cast<std::size_t>(n - 1)]);
}

TEST(CountOracleTest, TwoTasksHaveOneSwitchPoint) {
  for (int b = 1; b <= 6; ++b) EXPECT_EQ(count_layouts_oracle(2, b), static_cast<std::uint64_t>(b + 1));
}

TEST(CountOracleTest, KnownCounts) {
  EXPECT_EQ(count_layouts_oracle(3, 1), 5u);
  EXPECT_EQ(count_layouts_oracle(3, 2), 12u);
  EXPECT_EQ(count_layouts_oracle(3, 5), 51u);
  EXPECT_EQ(count_layouts_oracle(1, 7), 1u);
}

TEST(CountOracleTest, AgreesWithMaterializedChains) {
  for (int t = 1; t <= 6; ++t) {
    for (int b = 1; b <= 4; ++b) {
      if (count_layouts_oracle(t, b) > 200'000) continue;
      EXPECT_EQ(enumerate_chains_oracle(t, b).size(), count_layouts_oracle(t, b)) << t << "," << b;
    }
  }
}

TEST(CountOracleTest, RejectsOutOfRange) {
  EXPECT_THROW(count_layouts_oracle(13, 2), ValidationError);
  EXPECT_THROW(count_layouts_oracle(0, 2), ValidationError);
  EXPECT_THROW(enumerate_chains_oracle(9, 1), ValidationError);
  EXPECT_NO_THROW(count_layouts_oracle(12, 16));
}

TEST(CountOracleTest, ThreeTwoByPairBruteForce) {
  // Every (P1, P2) with P2 refining P1.
  const auto parts = set_partitions(3);
  std::uint64_t pairs = 0;
  for (const auto& p1 : parts) {
    for (const auto& p2 : parts) pairs += refines(p2, p1) ? 1 : 0;
  }
  EXPECT_EQ(pairs, 12u);
}

TEST(TwoTaskSpaceTest, Examples) {
  EXPECT_EQ(two_task_space_size(3, 5), 18u);
  EXPECT_EQ(two_task_space_size(5, 5), 60u);
  EXPECT_EQ(two_task_space_size(2, 0), 1u);
  EXPECT_THROW(two_task_space_size(1, 5), ValidationError);
}

TEST(EnumerateTest, Examples) {
  EXPECT_EQ(enumerate_layouts(2, 3).size(), 4u);
  EXPECT_EQ(enumerate_layouts(3, 2).size(), 12u);
  EXPECT_EQ(enumerate_layouts(3, 5).size(), 51u);
}

TEST(EnumerateTest, IndexZeroIsFullySharedAndOrderIsStable) {
  const auto a = enumerate_layouts(4, 3);
  const auto b = enumerate_layouts(4, 3);
  ASSERT_EQ(a, b);
  EXPECT_EQ(a.front(), initial_layout(4, 3));
}

TEST(EnumerateTest, CompleteAndSoundAgainstChainOracle) {
  for (int t = 1; t <= 4; ++t) {
    for (int b = 1; b <= 5; ++b) {
      const auto layouts = enumerate_layouts(t, b);
      for (const auto& l : layouts) ASSERT_TRUE(is_valid(l));
      const auto keys = keys_of(layouts);
      EXPECT_EQ(keys.size(), layouts.size()) << "duplicates at " << t << "," << b;
      EXPECT_EQ(keys, keys_of(enumerate_chains_oracle(t, b))) << t << "," << b;
    }
  }
}

TEST(EnumerateTest, ClosedUnderCuts) {
  const auto layouts = enumerate_layouts(4, 3);
  const auto keys = keys_of(layouts);
  for (const auto& l : layouts) {
    for (const auto& cut : available_cuts(l)) EXPECT_TRUE(keys.contains(canonicalize(apply_cut(l, cut))));
  }
}

TEST(EnumerateTest, MonotoneCounts) {
  for (int t = 1; t <= 5; ++t) {
    for (int b = 1; b <= 5; ++b) {
      EXPECT_GE(count_layouts_oracle(t, b + 1), count_layouts_oracle(t, b));
      EXPECT_GE(count_layouts_oracle(t + 1, b), count_layouts_oracle(t, b));
    }
  }
}

TEST(EnumerateTest, RespectsCap) {
  EXPECT_THROW(enumerate_layouts(3, 5, 50), ValidationError);
  EXPECT_NO_THROW(enumerate_layouts(3, 5, 51));
  EXPECT_THROW(enumerate_layouts(8, 8), ValidationError);
  EXPECT_THROW(enumerate_layouts(13, 1, ~std::uint64_t{0}), ValidationError);
}

}  // namespace
}  // namespace treemtl
