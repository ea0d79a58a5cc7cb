// Copyright 2026 The TreeMTL Recommender Authors
//
// SPDX-License-Identifier: Apache-2.0

/**
 * @file
 * Performance table construction, budget-constrained queries and ranking evaluation.
 *
 * The table is built once per (tasks, backbone) pair: every layout in the
 * design space gets its estimated task scores, ranking score and cost. Queries
 * only filter and sort stored records, so a new budget never triggers
 * re-estimation.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "treemtl/costmodel.hpp"
#include "treemtl/enumerator.hpp"
#include "treemtl/error.hpp"
#include "treemtl/estimator.hpp"
#include "treemtl/layout.hpp"
#include "treemtl/text.hpp"

namespace treemtl {

struct PerformanceRecord {
  std::size_t index = 0;
  Layout layout;
  std::vector<double> estimates;
  double score = 0.0;
  std::uint64_t flops = 0;
  std::uint64_t params = 0;
  double flops_pct = 0.0;
  double params_pct = 0.0;
  double models_equivalent = 0.0;

  /// Backbone-only FLOPs change against T independent backbones, in percent.
  double backbone_flops_pct() const { return 100.0 * (models_equivalent / layout.num_tasks() - 1.0); }
};

struct TableMetadata {
  int num_tasks = 0;
  int num_points = 0;
  WeightNormalization scheme = WeightNormalization::softmax;
  SvdeOptions svde;
  std::vector<double> raw_weights;
  std::vector<double> weights;
  std::string cost_digest;
  std::string two_task_digest;
};

inline constexpr std::string_view kTableFormat = "treemtl-performance-table";
inline constexpr int kTableVersion = 1;

/// Line-delimited JSON: one metadata header line, then one record per line in index order.
class PerformanceTable {
 public:
  PerformanceTable() = default;
  PerformanceTable(TableMetadata meta, std::vector<PerformanceRecord> records)
      : meta_(std::move(meta)), records_(std::move(records)) {
    check();
  }

  const TableMetadata& metadata() const { return meta_; }
  const std::vector<PerformanceRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  void write(std::ostream& out) const {
    nlohmann::ordered_json header;
    header["format"] = kTableFormat;
    header["version"] = kTableVersion;
    header["num_tasks"] = meta_.num_tasks;
    header["num_points"] = meta_.num_points;
    header["scheme"] = to_string(meta_.scheme);
    header["embed_dim"] = meta_.svde.embed_dim;
    header["delay"] = meta_.svde.delay;
    header["raw_weights"] = meta_.raw_weights;
    header["weights"] = meta_.weights;
    header["cost_digest"] = meta_.cost_digest;
    header["two_task_digest"] = meta_.two_task_digest;
    header["records"] = records_.size();
    out << header.dump() << '\n';
    for (const auto& r : records_) {
      nlohmann::ordered_json line;
      line["index"] = r.index;
      line["layout"] = to_json(r.layout);
      line["estimates"] = r.estimates;
      line["score"] = r.score;
      line["flops"] = r.flops;
      line["params"] = r.params;
      line["flops_pct"] = r.flops_pct;
      line["params_pct"] = r.params_pct;
      line["models_equivalent"] = r.models_equivalent;
      out << line.dump() << '\n';
    }
  }

  std::string to_text() const {
    std::ostringstream out;
    write(out);
    return out.str();
  }

  /// Digest of the persisted form.
  std::string digest() const { return text::hex_digest(to_text()); }

  static PerformanceTable read(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw IoError("performance table is empty");
    TableMetadata meta;
    std::size_t expected = 0;
    try {
      const auto header = nlohmann::json::parse(line);
      if (header.at("format").get<std::string>() != kTableFormat) throw IoError("not a performance table");
      if (header.at("version").get<int>() != kTableVersion) throw IoError("unsupported performance table version");
      meta.num_tasks = header.at("num_tasks").get<int>();
      meta.num_points = header.at("num_points").get<int>();
      meta.scheme = parse_weight_normalization(header.at("scheme").get<std::string>());
      meta.svde.embed_dim = header.at("embed_dim").get<int>();
      meta.svde.delay = header.at("delay").get<int>();
      meta.raw_weights = header.at("raw_weights").get<std::vector<double>>();
      meta.weights = header.at("weights").get<std::vector<double>>();
      meta.cost_digest = header.at("cost_digest").get<std::string>();
      meta.two_task_digest = header.at("two_task_digest").get<std::string>();
      expected = header.at("records").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw IoError(std::string("malformed performance table header: ") + e.what());
    }

    std::vector<PerformanceRecord> records;
    records.reserve(expected);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (text::trim(line).empty()) continue;
      try {
        const auto doc = nlohmann::json::parse(line);
        PerformanceRecord r;
        r.index = doc.at("index").get<std::size_t>();
        r.layout = layout_from_json(doc.at("layout"));
        r.estimates = doc.at("estimates").get<std::vector<double>>();
        r.score = doc.at("score").get<double>();
        r.flops = doc.at("flops").get<std::uint64_t>();
        r.params = doc.at("params").get<std::uint64_t>();
        r.flops_pct = doc.at("flops_pct").get<double>();
        r.params_pct = doc.at("params_pct").get<double>();
        r.models_equivalent = doc.at("models_equivalent").get<double>();
        records.push_back(std::move(r));
      } catch (const nlohmann::json::exception& e) {
        throw IoError("performance table line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    if (records.size() != expected) {
      throw ValidationError("performance table declares " + std::to_string(expected) + " records but holds " +
                            std::to_string(records.size()));
    }
    return PerformanceTable(std::move(meta), std::move(records));
  }

 private:
  void check() const {
    for (std::size_t k = 0; k < records_.size(); ++k) {
      const auto& r = records_[k];
      if (r.index != k) throw ValidationError("performance table indices must be dense from 0");
      if (r.layout.num_tasks() != meta_.num_tasks || r.layout.num_points() != meta_.num_points) {
        throw ValidationError("record " + std::to_string(k) + " does not match the table dimensions");
      }
      if (r.estimates.size() != meta_.weights.size()) {
        throw ValidationError("record " + std::to_string(k) + " has the wrong number of estimates");
      }
    }
  }

  TableMetadata meta_;
  std::vector<PerformanceRecord> records_;
};

struct BuildOptions {
  WeightOptions weights;
  std::uint64_t space_cap = kDefaultSpaceCap;
};

/// Enumerates the design space and scores every layout.
inline PerformanceTable build_table(int num_tasks, int num_points, const TwoTaskTable& two_task,
                                    const CostProfile& profile, const BuildOptions& opts = {}) {
  if (two_task.num_tasks() != num_tasks || two_task.num_points() != num_points) {
    throw ValidationError("two-task table is for " + std::to_string(two_task.num_tasks()) + " tasks and " +
                          std::to_string(two_task.num_points()) + " branching points, expected " +
                          std::to_string(num_tasks) + " and " + std::to_string(num_points));
  }
  if (profile.num_blocks() != static_cast<std::size_t>(num_points)) {
    throw ValidationError("cost profile has " + std::to_string(profile.num_blocks()) + " blocks, expected " +
                          std::to_string(num_points));
  }
  two_task.require_complete();
  const TaskWeights weights = task_weights(two_task, opts.weights);

  TableMetadata meta;
  meta.num_tasks = num_tasks;
  meta.num_points = num_points;
  meta.scheme = opts.weights.scheme;
  meta.svde = opts.weights.svde;
  meta.raw_weights = weights.raw;
  meta.weights = weights.normalized;
  meta.cost_digest = profile.digest();
  meta.two_task_digest = text::hex_digest(two_task.to_csv());

  const auto layouts = enumerate_layouts(num_tasks, num_points, opts.space_cap);
  std::vector<PerformanceRecord> records;
  records.reserve(layouts.size());
  for (std::size_t k = 0; k < layouts.size(); ++k) {
    PerformanceRecord r;
    r.index = k;
    r.layout = layouts[k];
    r.estimates = estimate_task_scores(r.layout, two_task);
    r.score = ranking_score(r.estimates, weights);
    const LayoutCost cost = layout_cost(r.layout, profile);
    const RelativeReduction reduction = relative_reduction(cost, profile, num_tasks);
    r.flops = cost.flops();
    r.params = cost.params();
    r.flops_pct = reduction.flops_pct;
    r.params_pct = reduction.params_pct;
    r.models_equivalent = models_equivalent(cost, profile);
    records.push_back(std::move(r));
  }
  return PerformanceTable(std::move(meta), std::move(records));
}

enum class BudgetKind { none, flops_pct, models };

/// Computation budget: keep records whose backbone FLOPs change (percent) or
/// models-equivalent is at most `limit`, then return the best `k`.
struct Budget {
  BudgetKind kind = BudgetKind::none;
  double limit = 0.0;
  std::size_t k = 5;
};

/// Slack for comparing derived ratios against user limits.
inline constexpr double kBudgetSlack = 1e-9;

inline bool satisfies(const PerformanceRecord& r, const Budget& budget) {
  switch (budget.kind) {
    case BudgetKind::none: return true;
    case BudgetKind::flops_pct: return r.backbone_flops_pct() <= budget.limit + kBudgetSlack;
    case BudgetKind::models: return r.models_equivalent <= budget.limit + kBudgetSlack;
  }
  return false;
}

enum class RecommendStatus { ok, no_feasible_layout };

struct Recommendation {
  RecommendStatus status = RecommendStatus::ok;
  std::vector<PerformanceRecord> records;
};

/// Order used for ranking: higher score, then fewer FLOPs, then canonical key.
inline bool ranks_before(const PerformanceRecord& a, const PerformanceRecord& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.flops != b.flops) return a.flops < b.flops;
  return canonicalize(a.layout) < canonicalize(b.layout);
}

/// Top-k records within the budget. Reads the table only.
inline Recommendation recommend(const PerformanceTable& table, const Budget& budget) {
  if (budget.k < 1) throw ValidationError("k must be at least 1");
  if (budget.kind != BudgetKind::none && !std::isfinite(budget.limit)) {
    throw ValidationError("budget limit must be finite");
  }
  std::vector<const PerformanceRecord*> feasible;
  for (const auto& r : table.records()) {
    if (satisfies(r, budget)) feasible.push_back(&r);
  }
  Recommendation result;
  if (feasible.empty()) {
    result.status = RecommendStatus::no_feasible_layout;
    return result;
  }
  const std::size_t k = std::min(budget.k, feasible.size());
  std::partial_sort(feasible.begin(), feasible.begin() + static_cast<std::ptrdiff_t>(k), feasible.end(),
                    [](const PerformanceRecord* a, const PerformanceRecord* b) { return ranks_before(*a, *b); });
  for (std::size_t i = 0; i < k; ++i) result.records.push_back(*feasible[i]);
  return result;
}

/// Sample Pearson correlation, computed on mean-centered data.
inline double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ValidationError("pearson: vectors differ in length");
  if (xs.size() < 2) throw ValidationError("pearson: need at least two observations");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double dx = xs[k] - mx;
    const double dy = ys[k] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw ValidationError("pearson: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// 1-based ranks in ascending value order; ties share their average rank.
inline std::vector<double> fractional_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size(), 0.0);
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start + 1;
    while (end < order.size() && values[order[end]] == values[order[start]]) ++end;
    const double shared = 0.5 * static_cast<double>(start + 1 + end);
    for (std::size_t k = start; k < end; ++k) ranks[order[k]] = shared;
    start = end;
  }
  return ranks;
}

struct RankingReport {
  std::size_t count = 0;
  double score_pearson = 0.0;  ///< predicted scores vs oracle values
  double rank_pearson = 0.0;   ///< predicted ranks vs oracle ranks
};

/// Reads `index,value` rows; an optional `index,value` header is skipped.
inline std::map<std::size_t, double> parse_oracle_csv(std::istream& in) {
  std::map<std::size_t, double> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::skippable(line)) continue;
    const auto fields = text::split(line);
    if (fields.size() == 2 && fields[0] == "index") continue;
    if (fields.size() != 2) throw IoError("line " + std::to_string(line_no) + ": expected 'index,value'");
    const auto index = text::parse<std::size_t>(fields[0], "index", line_no);
    const auto value = text::parse<double>(fields[1], "value", line_no);
    if (!values.emplace(index, value).second) {
      throw ValidationError("line " + std::to_string(line_no) + ": duplicate index " + std::to_string(index));
    }
  }
  return values;
}

/// Correlates predicted scores with measured (oracle) performance per layout index.
inline RankingReport evaluate_ranking(const PerformanceTable& table, const std::map<std::size_t, double>& oracle) {
  std::vector<std::size_t> missing;
  for (std::size_t k = 0; k < table.size(); ++k) {
    if (!oracle.contains(k)) missing.push_back(k);
  }
  if (!missing.empty()) {
    std::string msg = "oracle is missing " + std::to_string(missing.size()) + " layout indices:";
    for (std::size_t k = 0; k < missing.size() && k < 20; ++k) msg += " " + std::to_string(missing[k]);
    if (missing.size() > 20) msg += " ...";
    throw ValidationError(msg);
  }
  for (const auto& [index, value] : oracle) {
    if (index >= table.size()) throw ValidationError("oracle index " + std::to_string(index) + " is not in the table");
  }
  std::vector<double> predicted;
  std::vector<double> measured;
  for (const auto& r : table.records()) {
    predicted.push_back(r.score);
    measured.push_back(oracle.at(r.index));
  }
  RankingReport report;
  report.count = predicted.size();
  report.score_pearson = pearson(predicted, measured);
  report.rank_pearson = pearson(fractional_ranks(predicted), fractional_ranks(measured));
  return report;
}

}  // namespace treemtl
