// Copyright 2026 The TreeMTL Recommender Authors
//
// SPDX-License-Identifier: Apache-2.0

/**
 * @file
 * Training-free task performance estimation.
 *
 * A layout's score for task i is the mean, over every other task j, of task
 * i's measured performance in the two-task model that branches where i and j
 * branch in the layout. Task weights come from the singular value
 * decomposition entropy (SVDE) of each task's two-task performance sequence:
 * regular sequences (low entropy) get larger weights.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include "treemtl/error.hpp"
#include "treemtl/layout.hpp"
#include "treemtl/text.hpp"

namespace treemtl {

/// Measured relative performance (percent) of both tasks in one two-task model.
struct PairEntry {
  double delta_i = 0.0;
  double delta_j = 0.0;
};

/// Identifies one two-task model: tasks i < j branching after `branch` shared blocks.
struct PairKey {
  int i = 0;
  int j = 0;
  int branch = 0;

  std::string describe() const {
    return "(" + std::to_string(i) + ", " + std::to_string(j) + ", b=" + std::to_string(branch) + ")";
  }
  friend auto operator<=>(const PairKey&, const PairKey&) = default;
};

/// Two-task results for every task pair and branch depth b in [0, B].
class TwoTaskTable {
 public:
  TwoTaskTable(int num_tasks, int num_points) : num_tasks_(num_tasks), num_points_(num_points) {
    if (num_tasks < 2 || num_tasks > kMaxTasks) {
      throw ValidationError("two-task table needs between 2 and " + std::to_string(kMaxTasks) + " tasks");
    }
    if (num_points < 1 || num_points > kMaxPoints) {
      throw ValidationError("two-task table needs between 1 and " + std::to_string(kMaxPoints) +
                            " branching points");
    }
    const auto pairs = static_cast<std::size_t>(num_tasks * (num_tasks - 1) / 2);
    entries_.resize(pairs * static_cast<std::size_t>(num_points + 1));
  }

  int num_tasks() const { return num_tasks_; }
  int num_points() const { return num_points_; }

  /// Stores the entry for tasks (i, j); components are swapped when i > j.
  void set(int i, int j, int branch, double delta_i, double delta_j) {
    auto& slot = entries_[slot_index(i, j, branch)];
    slot = i < j ? PairEntry{delta_i, delta_j} : PairEntry{delta_j, delta_i};
  }

  bool has(int i, int j, int branch) const { return entries_[slot_index(i, j, branch)].has_value(); }

  /// Entry oriented so that `delta_i` belongs to task `i`.
  PairEntry at(int i, int j, int branch) const {
    const auto& slot = entries_[slot_index(i, j, branch)];
    if (!slot) {
      throw ValidationError("two-task table is missing entry " +
                            PairKey{std::min(i, j), std::max(i, j), branch}.describe());
    }
    return i < j ? *slot : PairEntry{slot->delta_j, slot->delta_i};
  }

  /// Performance of `task` when paired with `other` at branch depth `branch`.
  double delta(int task, int other, int branch) const { return at(task, other, branch).delta_i; }

  /// Task `task`'s performance with `other` for b = 0..B, in increasing shared depth.
  std::vector<double> sequence(int task, int other) const {
    std::vector<double> seq;
    seq.reserve(static_cast<std::size_t>(num_points_ + 1));
    for (int b = 0; b <= num_points_; ++b) seq.push_back(delta(task, other, b));
    return seq;
  }

  std::vector<PairKey> missing() const {
    std::vector<PairKey> out;
    for (int i = 0; i < num_tasks_; ++i) {
      for (int j = i + 1; j < num_tasks_; ++j) {
        for (int b = 0; b <= num_points_; ++b) {
          if (!has(i, j, b)) out.push_back({i, j, b});
        }
      }
    }
    return out;
  }

  void require_complete() const {
    const auto gaps = missing();
    if (gaps.empty()) return;
    std::string msg = "two-task table is incomplete; missing " + std::to_string(gaps.size()) + " entries:";
    for (std::size_t k = 0; k < gaps.size() && k < 20; ++k) msg += " " + gaps[k].describe();
    if (gaps.size() > 20) msg += " ...";
    throw ValidationError(msg);
  }

  /// Canonical CSV form (sorted, shortest round-trip numbers), also used for digests.
  std::string to_csv() const {
    std::string out = "task_i,task_j,branch,delta_i,delta_j\n";
    for (int i = 0; i < num_tasks_; ++i) {
      for (int j = i + 1; j < num_tasks_; ++j) {
        for (int b = 0; b <= num_points_; ++b) {
          if (!has(i, j, b)) continue;
          const auto e = at(i, j, b);
          out += std::to_string(i) + "," + std::to_string(j) + "," + std::to_string(b) + "," +
                 nlohmann::json(e.delta_i).dump() + "," + nlohmann::json(e.delta_j).dump() + "\n";
        }
      }
    }
    return out;
  }

  /// Reads the `task_i,task_j,branch,delta_i,delta_j` CSV format. Does not
  /// require completeness; duplicates and out-of-range keys are rejected.
  static TwoTaskTable parse_csv(std::istream& in, int num_tasks, int num_points) {
    TwoTaskTable table(num_tasks, num_points);
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
      ++line_no;
      if (text::skippable(line)) continue;
      const auto fields = text::split(line);
      if (!header_seen) {
        header_seen = true;
        if (fields.size() == 5 && fields[0] == "task_i") continue;
      }
      if (fields.size() != 5) {
        throw IoError("line " + std::to_string(line_no) + ": expected 5 fields, got " +
                      std::to_string(fields.size()));
      }
      const int i = text::parse<int>(fields[0], "task_i", line_no);
      const int j = text::parse<int>(fields[1], "task_j", line_no);
      const int b = text::parse<int>(fields[2], "branch", line_no);
      const double di = text::parse<double>(fields[3], "delta_i", line_no);
      const double dj = text::parse<double>(fields[4], "delta_j", line_no);
      if (i == j || i < 0 || j < 0 || i >= num_tasks || j >= num_tasks) {
        throw ValidationError("line " + std::to_string(line_no) + ": invalid task pair (" +
                              std::to_string(i) + ", " + std::to_string(j) + ")");
      }
      if (b < 0 || b > num_points) {
        throw ValidationError("line " + std::to_string(line_no) + ": branch " + std::to_string(b) +
                              " outside [0, " + std::to_string(num_points) + "]");
      }
      if (table.has(i, j, b)) {
        throw ValidationError("line " + std::to_string(line_no) + ": duplicate entry " +
                              PairKey{std::min(i, j), std::max(i, j), b}.describe());
      }
      table.set(i, j, b, di, dj);
    }
    return table;
  }

 private:
  std::size_t slot_index(int i, int j, int branch) const {
    if (i == j || i < 0 || j < 0 || i >= num_tasks_ || j >= num_tasks_) {
      throw ValidationError("invalid task pair (" + std::to_string(i) + ", " + std::to_string(j) + ")");
    }
    if (branch < 0 || branch > num_points_) {
      throw ValidationError("branch " + std::to_string(branch) + " outside [0, " +
                            std::to_string(num_points_) + "]");
    }
    const int lo = std::min(i, j);
    const int hi = std::max(i, j);
    // Row-major index of (lo, hi) in the strict upper triangle.
    const int pair = lo * num_tasks_ - lo * (lo + 1) / 2 + (hi - lo - 1);
    return static_cast<std::size_t>(pair * (num_points_ + 1) + branch);
  }

  int num_tasks_;
  int num_points_;
  std::vector<std::optional<PairEntry>> entries_;
};

struct SvdeOptions {
  int embed_dim = 2;
  int delay = 1;
};

/// Singular value decomposition entropy of a sequence.
///
/// Builds the delay-embedding matrix with `embed_dim` rows (row r holds
/// x[r*delay + c]), normalizes its singular values to sum to one and returns
/// their Shannon entropy in nats. Scale invariant; bounded by ln(embed_dim).
inline double svde(std::span<const double> sequence, const SvdeOptions& opts = {}) {
  if (opts.embed_dim < 1 || opts.delay < 1) throw ValidationError("SVDE embedding parameters must be positive");
  const auto needed = static_cast<std::size_t>(opts.embed_dim * opts.delay + 1);
  if (sequence.size() < needed) {
    throw ValidationError("sequence of length " + std::to_string(sequence.size()) +
                          " is too short for embedding dimension " + std::to_string(opts.embed_dim) +
                          " and delay " + std::to_string(opts.delay));
  }
  if (std::all_of(sequence.begin(), sequence.end(), [](double v) { return v == 0.0; })) {
    throw ValidationError("SVDE is undefined for the all-zero sequence");
  }
  const Eigen::Index rows = opts.embed_dim;
  const Eigen::Index cols = static_cast<Eigen::Index>(sequence.size()) - (rows - 1) * opts.delay;
  Eigen::MatrixXd embedding(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) embedding(r, c) = sequence[static_cast<std::size_t>(r * opts.delay + c)];
  }
  const Eigen::VectorXd sigma = Eigen::JacobiSVD<Eigen::MatrixXd>(embedding).singularValues();
  const double total = sigma.sum();
  double entropy = 0.0;
  for (Eigen::Index k = 0; k < sigma.size(); ++k) {
    const double p = sigma(k) / total;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  return std::max(entropy, 0.0);
}

inline double svde(std::span<const double> sequence, int embed_dim, int delay = 1) {
  return svde(sequence, SvdeOptions{embed_dim, delay});
}

/// How raw (negative-entropy) task weights are mapped onto weights that sum to one.
enum class WeightNormalization {
  softmax,  ///< exp(w_i) / sum exp(w_j); order preserving and positive
  sum,      ///< w_i / sum w_j; inverts the order when all weights are negative
  min_max,  ///< rescale to [0, 1], then divide by the sum
};

inline std::string to_string(WeightNormalization scheme) {
  switch (scheme) {
    case WeightNormalization::softmax: return "softmax";
    case WeightNormalization::sum: return "sum";
    case WeightNormalization::min_max: return "min-max";
  }
  return "softmax";
}

inline WeightNormalization parse_weight_normalization(std::string_view name) {
  if (name == "softmax") return WeightNormalization::softmax;
  if (name == "sum") return WeightNormalization::sum;
  if (name == "min-max" || name == "minmax") return WeightNormalization::min_max;
  throw ValidationError("unknown weight normalization '" + std::string(name) + "'");
}

struct WeightOptions {
  SvdeOptions svde;
  WeightNormalization scheme = WeightNormalization::softmax;
};

struct TaskWeights {
  std::vector<double> raw;
  std::vector<double> normalized;
};

inline std::vector<double> normalize_weights(std::span<const double> raw, WeightNormalization scheme) {
  if (raw.empty()) throw ValidationError("no weights to normalize");
  std::vector<double> out(raw.begin(), raw.end());
  switch (scheme) {
    case WeightNormalization::softmax: {
      const double peak = *std::max_element(out.begin(), out.end());
      for (double& w : out) w = std::exp(w - peak);
      break;
    }
    case WeightNormalization::sum:
      break;
    case WeightNormalization::min_max: {
      const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
      const double low = *lo;
      const double span = *hi - *lo;
      if (span == 0.0) {
        std::fill(out.begin(), out.end(), 1.0);
      } else {
        for (double& w : out) w = (w - low) / span;
      }
      break;
    }
  }
  const double total = std::accumulate(out.begin(), out.end(), 0.0);
  if (total == 0.0 || !std::isfinite(total)) {
    throw ValidationError("weights cannot be normalized with the " + to_string(scheme) + " scheme");
  }
  for (double& w : out) w /= total;
  return out;
}

/// w_i = mean over j != i of -SVDE(task i's two-task sequence with j), then normalized.
inline TaskWeights task_weights(const TwoTaskTable& table, const WeightOptions& opts = {}) {
  table.require_complete();
  const int num_tasks = table.num_tasks();
  TaskWeights weights;
  weights.raw.assign(static_cast<std::size_t>(num_tasks), 0.0);
  for (int i = 0; i < num_tasks; ++i) {
    double sum = 0.0;
    for (int j = 0; j < num_tasks; ++j) {
      if (j == i) continue;
      const auto seq = table.sequence(i, j);
      sum -= svde(seq, opts.svde);
    }
    weights.raw[static_cast<std::size_t>(i)] = sum / (num_tasks - 1);
  }
  weights.normalized = normalize_weights(weights.raw, opts.scheme);
  return weights;
}

/// Per-task estimates: Δt_i = mean over j != i of the two-task entry (i, j) at
/// the layout's branch depth for that pair.
inline std::vector<double> estimate_task_scores(const Layout& layout, const TwoTaskTable& table) {
  if (layout.num_tasks() != table.num_tasks()) {
    throw ValidationError("layout has " + std::to_string(layout.num_tasks()) + " tasks but the table has " +
                          std::to_string(table.num_tasks()));
  }
  if (layout.num_points() != table.num_points()) {
    throw ValidationError("layout has " + std::to_string(layout.num_points()) +
                          " branching points but the table has " + std::to_string(table.num_points()));
  }
  const int num_tasks = layout.num_tasks();
  std::vector<double> scores(static_cast<std::size_t>(num_tasks), 0.0);
  for (int i = 0; i < num_tasks; ++i) {
    double sum = 0.0;
    for (int j = 0; j < num_tasks; ++j) {
      if (j != i) sum += table.delta(i, j, branch_depth(layout, i, j));
    }
    scores[static_cast<std::size_t>(i)] = sum / (num_tasks - 1);
  }
  return scores;
}

/// Weighted sum of per-task estimates under normalized weights.
inline double ranking_score(std::span<const double> scores, std::span<const double> normalized_weights) {
  if (scores.size() != normalized_weights.size()) {
    throw ValidationError("score and weight vectors differ in length");
  }
  double s = 0.0;
  for (std::size_t k = 0; k < scores.size(); ++k) s += normalized_weights[k] * scores[k];
  return s;
}

inline double ranking_score(std::span<const double> scores, const TaskWeights& weights) {
  return ranking_score(scores, weights.normalized);
}

// Relative performance against single-task baselines.

enum class Direction { higher_is_better, lower_is_better };

struct Metric {
  std::string name;
  Direction direction = Direction::higher_is_better;
  double baseline = 0.0;
};

struct TaskMetrics {
  std::string task;
  std::vector<Metric> metrics;
};

/// Metric list and single-task baselines for every task.
///
/// JSON form:
/// `{"tasks": [{"name": "segment_semantic", "metrics": [{"name": "mIoU",
///   "direction": "higher", "baseline": 26.5}, ...]}, ...]}`
struct MetricSpec {
  std::vector<TaskMetrics> tasks;

  static MetricSpec from_json(const nlohmann::json& doc) {
    MetricSpec spec;
    try {
      for (const auto& task_doc : doc.at("tasks")) {
        TaskMetrics task;
        task.task = task_doc.at("name").get<std::string>();
        for (const auto& m : task_doc.at("metrics")) {
          Metric metric;
          metric.name = m.at("name").get<std::string>();
          const auto dir = m.at("direction").get<std::string>();
          if (dir == "higher") {
            metric.direction = Direction::higher_is_better;
          } else if (dir == "lower") {
            metric.direction = Direction::lower_is_better;
          } else {
            throw ValidationError("metric '" + metric.name + "': direction must be 'higher' or 'lower'");
          }
          metric.baseline = m.at("baseline").get<double>();
          if (metric.baseline == 0.0) {
            throw ValidationError("metric '" + metric.name + "' has a zero baseline");
          }
          task.metrics.push_back(std::move(metric));
        }
        if (task.metrics.empty()) throw ValidationError("task '" + task.task + "' lists no metrics");
        spec.tasks.push_back(std::move(task));
      }
    } catch (const nlohmann::json::exception& e) {
      throw IoError(std::string("malformed metric specification: ") + e.what());
    }
    return spec;
  }
};

/// Δt_i = (100 / M) Σ_m s_m (A_m − S_m) / S_m, with s_m = −1 for lower-is-better metrics.
inline double relative_performance(const std::map<std::string, double>& measured, const MetricSpec& spec,
                                   int task) {
  if (task < 0 || static_cast<std::size_t>(task) >= spec.tasks.size()) {
    throw ValidationError("task index " + std::to_string(task) + " not in metric specification");
  }
  const auto& metrics = spec.tasks[static_cast<std::size_t>(task)].metrics;
  double sum = 0.0;
  for (const auto& m : metrics) {
    const auto it = measured.find(m.name);
    if (it == measured.end()) throw ValidationError("missing measured value for metric '" + m.name + "'");
    if (m.baseline == 0.0) throw ValidationError("metric '" + m.name + "' has a zero baseline");
    const double sign = m.direction == Direction::higher_is_better ? 1.0 : -1.0;
    sum += sign * (it->second - m.baseline) / m.baseline;
  }
  return 100.0 * sum / static_cast<double>(metrics.size());
}

/// Δt = mean of per-task relative performances.
inline double overall_relative_performance(std::span<const double> per_task) {
  if (per_task.empty()) throw ValidationError("no task performances to average");
  return std::accumulate(per_task.begin(), per_task.end(), 0.0) / static_cast<double>(per_task.size());
}

}  // namespace treemtl
