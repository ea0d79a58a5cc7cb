// Copyright 2026 The TreeMTL Recommender Authors
//
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "test_support.hpp"
#include "treemtl/costmodel.hpp"
#include "treemtl/enumerator.hpp"

namespace treemtl {
namespace {

using testing::branched_layout;
using testing::uniform_profile;

TEST(LayoutCostTest, SharedIndependentAndBranched) {
  const auto profile = uniform_profile(5, 100, 10);
  EXPECT_EQ(layout_cost(initial_layout(3, 5), profile).flops(), 500u);
  EXPECT_EQ(layout_cost(independent_layout(3, 5), profile).flops(), 1500u);
  const auto fig = layout_cost(branched_layout(), profile);
  EXPECT_EQ(fig.flops(), 1000u);
  EXPECT_EQ(fig.params(), 100u);
}

TEST(LayoutCostTest, RejectsMismatchedProfile) {
  EXPECT_THROW(layout_cost(initial_layout(3, 4), uniform_profile(5)), ValidationError);
}

TEST(ReductionTest, FullySharedExamples) {
  const auto three = relative_reduction(layout_cost(initial_layout(3, 5), uniform_profile(5)), uniform_profile(5), 3);
  EXPECT_NEAR(three.flops_pct, -66.67, 0.01);
  EXPECT_NEAR(three.params_pct, -66.67, 0.01);
  const auto five = relative_reduction(layout_cost(initial_layout(5, 5), uniform_profile(5)), uniform_profile(5), 5);
  EXPECT_NEAR(five.flops_pct, -80.00, 0.01);
}

TEST(ReductionTest, IndependentIsZero) {
  const CostProfile profile({{10, 1}, {20, 2}, {30, 3}}, {{5, 7}});
  const auto r = relative_reduction(layout_cost(independent_layout(4, 3), profile), profile, 4);
  EXPECT_DOUBLE_EQ(r.flops_pct, 0.0);
  EXPECT_DOUBLE_EQ(r.params_pct, 0.0);
}

TEST(ModelsEquivalentTest, Examples) {
  const auto profile = uniform_profile(5);
  EXPECT_DOUBLE_EQ(models_equivalent(layout_cost(initial_layout(5, 5), profile), profile), 1.0);
  EXPECT_DOUBLE_EQ(models_equivalent(layout_cost(independent_layout(5, 5), profile), profile), 5.0);
  EXPECT_DOUBLE_EQ(models_equivalent(layout_cost(branched_layout(), profile), profile), 2.0);
}

TEST(CostBoundsTest, EveryLayoutBetweenSharedAndIndependent) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<BlockCost> blocks(4);
    for (auto& b : blocks) {
      b = {std::uniform_int_distribution<std::uint64_t>(1, 1000)(rng),
           std::uniform_int_distribution<std::uint64_t>(1, 1000)(rng)};
    }
    const CostProfile profile(blocks);
    const auto lo = layout_cost(initial_layout(4, 4), profile).flops();
    const auto hi = layout_cost(independent_layout(4, 4), profile).flops();
    for (const auto& l : enumerate_layouts(4, 4)) {
      const auto c = layout_cost(l, profile);
      EXPECT_GE(c.flops(), lo);
      EXPECT_LE(c.flops(), hi);
      const double me = models_equivalent(c, profile);
      EXPECT_GE(me, 1.0);
      EXPECT_LE(me, 4.0);
    }
  }
}

TEST(CostBoundsTest, CutsNeverReduceCost) {
  const CostProfile profile({{3, 1}, {5, 2}, {7, 3}, {11, 4}});
  for (const auto& l : enumerate_layouts(4, 4)) {
    const auto base = layout_cost(l, profile);
    for (const auto& cut : available_cuts(l)) {
      const auto next = layout_cost(apply_cut(l, cut), profile);
      EXPECT_GT(next.flops(), base.flops());
      EXPECT_GT(next.params(), base.params());
    }
  }
}

TEST(HeadsTest, BroadcastAndPerTask) {
  const CostProfile one({{100, 10}}, {{7, 3}});
  EXPECT_EQ(one.heads_total(3), (BlockCost{21, 9}));
  const CostProfile per({{100, 10}}, {{1, 1}, {2, 2}, {3, 3}});
  EXPECT_EQ(per.heads_total(3), (BlockCost{6, 6}));
  EXPECT_THROW(per.heads_total(2), ValidationError);
  EXPECT_EQ(CostProfile({{100, 10}}).heads_total(4), (BlockCost{}));

  // Heads are paid once per task in every layout, so they dilute the reduction.
  const auto shared = layout_cost(initial_layout(3, 1), one);
  EXPECT_EQ(shared.flops(), 121u);
  EXPECT_NEAR(relative_reduction(shared, one, 3).flops_pct, 100.0 * (121.0 - 321.0) / 321.0, 1e-12);
  EXPECT_DOUBLE_EQ(models_equivalent(shared, one), 1.0);
}

TEST(ProfileParseTest, RoundTripAndComments) {
  std::istringstream in("# resnet-ish\nflops,params\n100,10\n 200 , 20\n\nhead,5,1\n");
  const auto p = CostProfile::parse(in);
  ASSERT_EQ(p.num_blocks(), 2u);
  EXPECT_EQ(p.blocks()[1], (BlockCost{200, 20}));
  ASSERT_EQ(p.heads().size(), 1u);
  std::istringstream again(p.to_text());
  EXPECT_EQ(CostProfile::parse(again).to_text(), p.to_text());
  EXPECT_EQ(CostProfile::parse(again = std::istringstream(p.to_text())).digest(), p.digest());
}

TEST(ProfileParseTest, Errors) {
  std::istringstream empty("flops,params\n");
  EXPECT_THROW(CostProfile::parse(empty), ValidationError);
  std::istringstream bad("100,abc\n");
  EXPECT_THROW(CostProfile::parse(bad), IoError);
  std::istringstream wide("1,2,3,4\n");
  EXPECT_THROW(CostProfile::parse(wide), IoError);
  std::istringstream negative("-5,2\n");
  EXPECT_THROW(CostProfile::parse(negative), IoError);
}

TEST(ProfileFromBlocksTest, UsesDetectedCosts) {
  const auto g = ComputationGraph::from_json(testing::chain_graph_json());
  const auto profile = CostProfile::from_blocks(detect_blocks(g));
  ASSERT_EQ(profile.num_blocks(), 2u);
  EXPECT_EQ(profile.backbone(), (BlockCost{17600, 1728 + 128 + 36928}));
}

}  // namespace
}  // namespace treemtl
