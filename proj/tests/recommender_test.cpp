// Copyright 2026 The TreeMTL Recommender Authors
//
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "test_support.hpp"
#include "treemtl/recommender.hpp"

namespace treemtl {
namespace {

using testing::make_table;
using testing::random_table;
using testing::uniform_profile;

PerformanceTable sample_table(std::uint64_t seed, int tasks = 3, int points = 5) {
  std::mt19937_64 rng(seed);
  return build_table(tasks, points, random_table(tasks, points, rng), uniform_profile(points));
}

TEST(BuildTableTest, OneRecordPerLayout) {
  const auto table = sample_table(1);
  ASSERT_EQ(table.size(), 51u);
  EXPECT_EQ(table.records().front().layout, initial_layout(3, 5));
  EXPECT_NEAR(table.records().front().flops_pct, -66.67, 0.01);
  EXPECT_DOUBLE_EQ(table.records().front().models_equivalent, 1.0);

  std::mt19937_64 rng(2);
  EXPECT_EQ(build_table(2, 2, random_table(2, 2, rng), uniform_profile(2)).size(), 3u);
  // Two entries per sequence cannot fill a 2-row embedding with two columns.
  EXPECT_THROW(build_table(2, 1, random_table(2, 1, rng), uniform_profile(1)), ValidationError);
  BuildOptions flat;
  flat.weights.svde.embed_dim = 1;
  EXPECT_EQ(build_table(2, 1, random_table(2, 1, rng), uniform_profile(1), flat).size(), 2u);
}

TEST(BuildTableTest, RecordsAgreeWithModules) {
  const auto table = sample_table(3);
  std::mt19937_64 rng(3);
  const auto two = random_table(3, 5, rng);
  const auto weights = task_weights(two);
  for (const auto& r : table.records()) {
    const auto est = estimate_task_scores(r.layout, two);
    EXPECT_EQ(r.estimates, est);
    EXPECT_DOUBLE_EQ(r.score, ranking_score(est, weights));
    EXPECT_EQ(r.flops, layout_cost(r.layout, uniform_profile(5)).flops());
  }
}

TEST(BuildTableTest, NamesMissingEntry) {
  TwoTaskTable two(3, 5);
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      for (int b = 0; b <= 5; ++b) {
        if (i == 0 && j == 2 && b == 4) continue;
        two.set(i, j, b, 1.0 + b, 2.0 - b);
      }
    }
  }
  try {
    build_table(3, 5, two, uniform_profile(5));
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("(0, 2, b=4)"), std::string::npos) << e.what();
  }
}

TEST(BuildTableTest, RejectsMismatchedInputs) {
  std::mt19937_64 rng(5);
  const auto two = random_table(3, 5, rng);
  EXPECT_THROW(build_table(3, 4, two, uniform_profile(4)), ValidationError);
  EXPECT_THROW(build_table(3, 5, two, uniform_profile(4)), ValidationError);
}

TEST(RecommendTest, TopKIsSortedAndBounded) {
  const auto table = sample_table(7);
  const auto rec = recommend(table, {BudgetKind::none, 0.0, 5});
  ASSERT_EQ(rec.status, RecommendStatus::ok);
  ASSERT_EQ(rec.records.size(), 5u);
  for (std::size_t k = 1; k < rec.records.size(); ++k) {
    EXPECT_FALSE(ranks_before(rec.records[k], rec.records[k - 1]));
  }
  double best = -INFINITY;
  for (const auto& r : table.records()) best = std::max(best, r.score);
  EXPECT_EQ(rec.records.front().score, best);
}

TEST(RecommendTest, ModelsBudgetOfOneLeavesOnlySharedLayout) {
  const auto rec = recommend(sample_table(8), {BudgetKind::models, 1.0, 5});
  ASSERT_EQ(rec.status, RecommendStatus::ok);
  ASSERT_EQ(rec.records.size(), 1u);
  EXPECT_EQ(rec.records.front().index, 0u);
}

TEST(RecommendTest, InfeasibleBudget) {
  const auto table = sample_table(9);
  const auto rec = recommend(table, {BudgetKind::flops_pct, -100.0, 5});
  EXPECT_EQ(rec.status, RecommendStatus::no_feasible_layout);
  EXPECT_TRUE(rec.records.empty());
  EXPECT_THROW(recommend(table, {BudgetKind::models, NAN, 5}), ValidationError);
  EXPECT_THROW(recommend(table, {BudgetKind::none, 0.0, 0}), ValidationError);
}

TEST(RecommendTest, FlopsBudgetUsesBackboneShare) {
  // -66.67% against three backbones is a single backbone.
  const auto table = sample_table(10);
  const auto rec = recommend(table, {BudgetKind::flops_pct, -66.0, 100});
  for (const auto& r : rec.records) EXPECT_DOUBLE_EQ(r.models_equivalent, 1.0);
  EXPECT_EQ(recommend(table, {BudgetKind::flops_pct, 0.0, 100}).records.size(), 51u);
}

TEST(RecommendTest, BudgetSoundnessOnRandomTables) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const auto table = sample_table(100 + static_cast<std::uint64_t>(trial));
    const double limit = std::uniform_real_distribution<double>(1.0, 3.0)(rng);
    const Budget budget{BudgetKind::models, limit, 4};
    const auto rec = recommend(table, budget);
    for (const auto& r : rec.records) EXPECT_LE(r.models_equivalent, limit + kBudgetSlack);
    // Nothing feasible outranks the last returned record unless it was returned.
    if (rec.records.size() == 4) {
      std::size_t better = 0;
      for (const auto& r : table.records()) {
        if (satisfies(r, budget) && ranks_before(r, rec.records.back())) ++better;
      }
      EXPECT_EQ(better, 3u);
    }
  }
}

TEST(RecommendTest, SmallerKIsAPrefix) {
  const auto table = sample_table(12);
  const auto big = recommend(table, {BudgetKind::models, 2.5, 10});
  for (std::size_t k = 1; k <= 10; ++k) {
    const auto small = recommend(table, {BudgetKind::models, 2.5, k});
    ASSERT_EQ(small.records.size(), std::min(k, big.records.size()));
    for (std::size_t i = 0; i < small.records.size(); ++i) EXPECT_EQ(small.records[i].index, big.records[i].index);
  }
}

TEST(RecommendTest, QueriesDoNotTouchTheTable) {
  const auto table = sample_table(13);
  const auto before = table.digest();
  for (double limit : {1.0, 1.5, 2.0, 3.0}) recommend(table, {BudgetKind::models, limit, 3});
  EXPECT_EQ(table.digest(), before);
}

TEST(RecommendTest, TiesBreakOnFlops) {
  // Identical entries at every depth: every layout scores the same, so the
  // cheapest layout comes first.
  const auto two = make_table(3, 5, [](int, int, int) { return 1.0; });
  const auto table = build_table(3, 5, two, uniform_profile(5));
  const auto rec = recommend(table, {BudgetKind::none, 0.0, 3});
  EXPECT_EQ(rec.records.front().index, 0u);
  EXPECT_LE(rec.records[1].flops, rec.records[2].flops);
}

TEST(TablePersistenceTest, DeterministicAndRoundTrips) {
  const auto a = sample_table(14).to_text();
  const auto b = sample_table(14).to_text();
  EXPECT_EQ(a, b);

  std::istringstream in(a);
  const auto read = PerformanceTable::read(in);
  EXPECT_EQ(read.to_text(), a);
  ASSERT_EQ(read.size(), 51u);
  EXPECT_EQ(read.metadata().weights, sample_table(14).metadata().weights);
}

TEST(TablePersistenceTest, RejectsBrokenFiles) {
  std::istringstream empty("");
  EXPECT_THROW(PerformanceTable::read(empty), IoError);
  std::istringstream garbage("{not json\n");
  EXPECT_THROW(PerformanceTable::read(garbage), IoError);

  auto text = sample_table(15).to_text();
  text.erase(text.rfind('\n', text.size() - 2) + 1);  // drop the last record
  std::istringstream truncated(text);
  EXPECT_THROW(PerformanceTable::read(truncated), ValidationError);
}

TEST(PearsonTest, Properties) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const std::vector<double> up{2, 4, 6, 8, 10};
  const std::vector<double> down{5, 4, 3, 2, 1};
  EXPECT_NEAR(pearson(x, up), 1.0, 1e-12);
  EXPECT_NEAR(pearson(x, down), -1.0, 1e-12);

  std::mt19937_64 rng(16);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(20), b(20), c(20);
    for (std::size_t k = 0; k < a.size(); ++k) {
      a[k] = n(rng);
      b[k] = n(rng);
      c[k] = 3.5 * b[k] - 7.0;
    }
    EXPECT_NEAR(pearson(a, b), pearson(a, c), 1e-12);
    EXPECT_NEAR(pearson(a, b), pearson(b, a), 1e-12);
  }
}

TEST(PearsonTest, ClosedFormExample) {
  const std::vector<double> x{1, 2, 3};
  const std::vector<double> y{1, 2, 4};
  EXPECT_NEAR(pearson(x, y), 9.0 / std::sqrt(84.0), 1e-12);
  EXPECT_THROW(pearson(x, std::vector<double>{1, 1, 1}), ValidationError);
  EXPECT_THROW(pearson(x, std::vector<double>{1, 2}), ValidationError);
}

TEST(PearsonTest, NoisyOracleStaysInCalibratedInterval) {
  // Frozen from tests/calibration/pearson_noise.py (numpy, 1000 draws).
  constexpr double kMean = 0.648316, kStd = 0.068175, kLow = 0.460064, kHigh = 0.793813;
  constexpr int kDraws = 1000;
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> noise(-30.0, 30.0);
  std::vector<double> x(51), y(51);
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = static_cast<double>(k);
  double sum = 0.0;
  int inside = 0;
  for (int d = 0; d < kDraws; ++d) {
    for (std::size_t k = 0; k < x.size(); ++k) y[k] = x[k] + noise(rng);
    const double r = pearson(x, y);
    sum += r;
    inside += (r >= kLow && r <= kHigh) ? 1 : 0;
  }
  EXPECT_NEAR(sum / kDraws, kMean, 4.0 * std::sqrt(2.0 / kDraws) * kStd);
  EXPECT_GE(inside, 970);
}

TEST(FractionalRanksTest, TiesShareAverage) {
  const std::vector<double> v{10, 30, 20, 30};
  EXPECT_EQ(fractional_ranks(v), (std::vector<double>{1.0, 3.5, 2.0, 3.5}));
}

TEST(EvaluateRankingTest, PerfectAndReversedOracles) {
  const auto table = sample_table(17);
  std::map<std::size_t, double> same;
  std::map<std::size_t, double> reversed;
  for (const auto& r : table.records()) {
    same[r.index] = r.score;
    reversed[r.index] = -r.score;
  }
  const auto good = evaluate_ranking(table, same);
  EXPECT_EQ(good.count, 51u);
  EXPECT_NEAR(good.score_pearson, 1.0, 1e-12);
  EXPECT_NEAR(good.rank_pearson, 1.0, 1e-12);
  EXPECT_NEAR(evaluate_ranking(table, reversed).rank_pearson, -1.0, 1e-12);
}

TEST(EvaluateRankingTest, MissingAndExtraIndices) {
  const auto table = sample_table(18);
  std::map<std::size_t, double> oracle;
  for (std::size_t k = 0; k < table.size(); ++k) {
    if (k != 7 && k != 30) oracle[k] = static_cast<double>(k);
  }
  try {
    evaluate_ranking(table, oracle);
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find(" 7 30"), std::string::npos) << e.what();
  }
  oracle[7] = oracle[30] = 1.0;
  oracle[51] = 2.0;
  EXPECT_THROW(evaluate_ranking(table, oracle), ValidationError);
}

TEST(OracleCsvTest, ParsesAndRejects) {
  std::istringstream in("index,value\n# measured\n0,1.5\n2,-3\n1,0\n");
  const auto values = parse_oracle_csv(in);
  EXPECT_EQ(values, (std::map<std::size_t, double>{{0, 1.5}, {1, 0.0}, {2, -3.0}}));
  std::istringstream dup("0,1\n0,2\n");
  EXPECT_THROW(parse_oracle_csv(dup), ValidationError);
  std::istringstream bad("0;1\n");
  EXPECT_THROW(parse_oracle_csv(bad), IoError);
}

}  // namespace
}  // namespace treemtl
