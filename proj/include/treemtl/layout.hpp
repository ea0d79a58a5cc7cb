// Copyright 2026 The TreeMTL Recommender Authors
//
// SPDX-License-Identifier: Apache-2.0

/**
 * @file
 * Symbolic representation of tree-structured multi-task architectures.
 *
 * A Layout holds one partition of the task set per branching point. Level
 * i+1 always refines level i, so once two tasks are separated they stay
 * separated. Layout cuts split one task set into two from a chosen branching
 * point down to the last one.
 */
#pragma once

#include <algorithm>
#include <bit>
#include <compare>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "treemtl/error.hpp"

namespace treemtl {

inline constexpr int kMaxTasks = 16;
inline constexpr int kMaxPoints = 16;

/// A set of task indices stored as a bit mask. Bit t set means task t is a member.
class TaskSet {
 public:
  using Mask = std::uint32_t;

  constexpr TaskSet() = default;
  constexpr explicit TaskSet(Mask bits) : bits_(bits) {}
  TaskSet(std::initializer_list<int> members) {
    for (int t : members) bits_ |= bit(t);
  }

  static constexpr TaskSet full(int num_tasks) {
    return TaskSet(num_tasks >= 32 ? ~Mask{0} : ((Mask{1} << num_tasks) - 1));
  }
  static constexpr TaskSet single(int task) { return TaskSet(bit(task)); }

  constexpr Mask bits() const { return bits_; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr int size() const { return std::popcount(bits_); }
  constexpr bool contains(int task) const {
    return task >= 0 && task < 32 && (bits_ & bit(task)) != 0;
  }
  /// Smallest member; undefined for the empty set.
  constexpr int lowest() const { return std::countr_zero(bits_); }
  constexpr bool is_subset_of(TaskSet other) const { return (bits_ & ~other.bits_) == 0; }
  constexpr bool intersects(TaskSet other) const { return (bits_ & other.bits_) != 0; }

  std::vector<int> members() const {
    std::vector<int> out;
    for (Mask m = bits_; m != 0; m &= m - 1) out.push_back(std::countr_zero(m));
    return out;
  }

  friend constexpr TaskSet operator|(TaskSet a, TaskSet b) { return TaskSet(a.bits_ | b.bits_); }
  friend constexpr TaskSet operator&(TaskSet a, TaskSet b) { return TaskSet(a.bits_ & b.bits_); }
  friend constexpr TaskSet operator-(TaskSet a, TaskSet b) { return TaskSet(a.bits_ & ~b.bits_); }
  friend constexpr bool operator==(TaskSet a, TaskSet b) = default;

 private:
  static constexpr Mask bit(int task) { return Mask{1} << task; }

  Mask bits_ = 0;
};

/// Canonical order of sets inside one level: by smallest member, then by mask.
inline bool canonical_less(TaskSet a, TaskSet b) {
  if (a.empty() || b.empty()) return a.bits() < b.bits();
  if (a.lowest() != b.lowest()) return a.lowest() < b.lowest();
  return a.bits() < b.bits();
}

using Level = std::vector<TaskSet>;

/// Layout of T tasks over B branching points. Construction does not validate;
/// use is_valid() or the operations below, which only ever produce valid layouts.
class Layout {
 public:
  Layout() = default;
  Layout(int num_tasks, std::vector<Level> levels)
      : num_tasks_(num_tasks), levels_(std::move(levels)) {}

  int num_tasks() const { return num_tasks_; }
  int num_points() const { return static_cast<int>(levels_.size()); }
  const std::vector<Level>& levels() const { return levels_; }
  /// Level for branching point `point` in [1, B].
  const Level& level(int point) const { return levels_.at(static_cast<std::size_t>(point - 1)); }

  /// Number of task sets summed over all levels (one block copy per set).
  int total_sets() const {
    int n = 0;
    for (const auto& level : levels_) n += static_cast<int>(level.size());
    return n;
  }

  friend bool operator==(const Layout&, const Layout&) = default;

 private:
  int num_tasks_ = 0;
  std::vector<Level> levels_;
};

/// Split of `target` into `left` and `right`, effective at branching points [level, B].
struct CutSpec {
  int level = 1;
  TaskSet target;
  TaskSet left;
  TaskSet right;

  friend bool operator==(const CutSpec&, const CutSpec&) = default;
};

/// Byte string identifying a layout up to reordering of sets within levels.
struct CanonicalKey {
  std::string bytes;

  friend auto operator<=>(const CanonicalKey&, const CanonicalKey&) = default;
};

namespace detail {

inline void check_dimensions(int num_tasks, int num_points) {
  if (num_tasks < 1 || num_tasks > kMaxTasks) {
    throw ValidationError("task count must be in [1, " + std::to_string(kMaxTasks) +
                          "], got " + std::to_string(num_tasks));
  }
  if (num_points < 1 || num_points > kMaxPoints) {
    throw ValidationError("branching point count must be in [1, " +
                          std::to_string(kMaxPoints) + "], got " +
                          std::to_string(num_points));
  }
}

inline Level sorted_level(Level level) {
  std::sort(level.begin(), level.end(), canonical_less);
  return level;
}

inline bool level_contains(const Level& level, TaskSet set) {
  return std::find(level.begin(), level.end(), set) != level.end();
}

inline std::string describe(TaskSet set) {
  std::string out = "{";
  bool first = true;
  for (int t : set.members()) {
    if (!first) out += ",";
    out += std::to_string(t);
    first = false;
  }
  return out + "}";
}

}  // namespace detail

/// Layout in which every task shares every block.
inline Layout initial_layout(int num_tasks, int num_points) {
  detail::check_dimensions(num_tasks, num_points);
  return Layout(num_tasks, std::vector<Level>(static_cast<std::size_t>(num_points),
                                              Level{TaskSet::full(num_tasks)}));
}

/// Layout in which every task owns a private copy of every block.
inline Layout independent_layout(int num_tasks, int num_points) {
  detail::check_dimensions(num_tasks, num_points);
  Level singles;
  for (int t = 0; t < num_tasks; ++t) singles.push_back(TaskSet::single(t));
  return Layout(num_tasks, std::vector<Level>(static_cast<std::size_t>(num_points), singles));
}

/// True iff every level partitions {0..T-1} and each level refines the one before it.
inline bool is_valid(const Layout& layout) {
  const int num_tasks = layout.num_tasks();
  if (num_tasks < 1 || num_tasks > kMaxTasks) return false;
  if (layout.num_points() < 1 || layout.num_points() > kMaxPoints) return false;
  const TaskSet all = TaskSet::full(num_tasks);
  for (const auto& level : layout.levels()) {
    TaskSet covered;
    for (TaskSet set : level) {
      if (set.empty() || !set.is_subset_of(all) || set.intersects(covered)) return false;
      covered = covered | set;
    }
    if (covered != all) return false;
  }
  const auto& levels = layout.levels();
  for (std::size_t i = 1; i < levels.size(); ++i) {
    for (TaskSet child : levels[i]) {
      const bool nested = std::any_of(levels[i - 1].begin(), levels[i - 1].end(),
                                      [&](TaskSet parent) { return child.is_subset_of(parent); });
      if (!nested) return false;
    }
  }
  return true;
}

/// Copy of `layout` with every level in canonical set order.
inline Layout normalized(const Layout& layout) {
  std::vector<Level> levels;
  levels.reserve(layout.levels().size());
  for (const auto& level : layout.levels()) levels.push_back(detail::sorted_level(level));
  return Layout(layout.num_tasks(), std::move(levels));
}

/// Every cut applicable to `layout`, ordered by level, then target in canonical
/// order, then by the mask of the half holding the target's smallest member.
/// A set is available at level b when it appears unsplit at every level in [b, B].
inline std::vector<CutSpec> available_cuts(const Layout& layout) {
  std::vector<CutSpec> cuts;
  const int num_points = layout.num_points();
  for (int b = 1; b <= num_points; ++b) {
    for (TaskSet target : detail::sorted_level(layout.level(b))) {
      if (target.size() < 2) continue;
      bool unsplit = true;
      for (int later = b + 1; later <= num_points && unsplit; ++later) {
        unsplit = detail::level_contains(layout.level(later), target);
      }
      if (!unsplit) continue;
      // Halves containing the smallest member enumerate each unordered split once.
      const TaskSet anchor = TaskSet::single(target.lowest());
      const TaskSet rest = target - anchor;
      std::vector<TaskSet::Mask> lefts;
      for (TaskSet::Mask sub = rest.bits();; sub = (sub - 1) & rest.bits()) {
        const TaskSet left = TaskSet(sub) | anchor;
        if (left != target) lefts.push_back(left.bits());
        if (sub == 0) break;
      }
      std::sort(lefts.begin(), lefts.end());
      for (TaskSet::Mask left : lefts) {
        cuts.push_back({b, target, TaskSet(left), target - TaskSet(left)});
      }
    }
  }
  return cuts;
}

/// Applies `cut` at every level from cut.level to B. The result is normalized.
inline Layout apply_cut(const Layout& layout, const CutSpec& cut) {
  const int num_points = layout.num_points();
  if (cut.level < 1 || cut.level > num_points) {
    throw ValidationError("cut level " + std::to_string(cut.level) + " outside [1, " +
                          std::to_string(num_points) + "]");
  }
  if (cut.target.size() < 2) {
    throw ValidationError("cannot cut singleton task set " + detail::describe(cut.target));
  }
  if (cut.left.empty() || cut.right.empty() || cut.left.intersects(cut.right) ||
      (cut.left | cut.right) != cut.target) {
    throw ValidationError("cut halves do not split " + detail::describe(cut.target));
  }
  for (int b = cut.level; b <= num_points; ++b) {
    if (!detail::level_contains(layout.level(b), cut.target)) {
      throw ValidationError("task set " + detail::describe(cut.target) +
                            " is not available at branching point " + std::to_string(b));
    }
  }
  std::vector<Level> levels = layout.levels();
  for (int b = cut.level; b <= num_points; ++b) {
    Level& level = levels[static_cast<std::size_t>(b - 1)];
    std::erase(level, cut.target);
    level.push_back(cut.left);
    level.push_back(cut.right);
  }
  return normalized(Layout(layout.num_tasks(), std::move(levels)));
}

/// Number of leading branching points at which tasks `i` and `j` share a set.
inline int branch_depth(const Layout& layout, int i, int j) {
  if (i == j) throw ValidationError("branch depth needs two distinct tasks");
  if (i < 0 || j < 0 || i >= layout.num_tasks() || j >= layout.num_tasks()) {
    throw ValidationError("task index out of range");
  }
  const TaskSet pair = TaskSet::single(i) | TaskSet::single(j);
  int depth = 0;
  for (const auto& level : layout.levels()) {
    const bool together = std::any_of(level.begin(), level.end(),
                                      [&](TaskSet set) { return pair.is_subset_of(set); });
    if (!together) break;
    ++depth;
  }
  return depth;
}

/// Key built from the sorted masks of each level; levels separated by a zero mask.
inline CanonicalKey canonicalize(const Layout& layout) {
  CanonicalKey key;
  key.bytes.reserve(static_cast<std::size_t>(layout.total_sets() + layout.num_points()) * 2);
  auto put = [&](TaskSet::Mask mask) {
    key.bytes.push_back(static_cast<char>(mask & 0xFFu));
    key.bytes.push_back(static_cast<char>((mask >> 8) & 0xFFu));
  };
  for (const auto& level : layout.levels()) {
    for (TaskSet set : detail::sorted_level(level)) put(set.bits());
    put(0);
  }
  return key;
}

/// Nested-list text form, e.g. `[[[0,1,2]],[[0,1],[2]]]`, sets in canonical order.
inline std::string to_string(const Layout& layout) {
  std::string out = "[";
  bool first_level = true;
  for (const auto& level : layout.levels()) {
    if (!first_level) out += ',';
    first_level = false;
    out += '[';
    bool first_set = true;
    for (TaskSet set : detail::sorted_level(level)) {
      if (!first_set) out += ',';
      first_set = false;
      out += '[';
      bool first_task = true;
      for (int t : set.members()) {
        if (!first_task) out += ',';
        first_task = false;
        out += std::to_string(t);
      }
      out += ']';
    }
    out += ']';
  }
  return out + "]";
}

inline nlohmann::json to_json(const Layout& layout) { return nlohmann::json::parse(to_string(layout)); }

/// Parses a layout from its JSON nested-list form. T is inferred as the largest
/// task index plus one; the result is validated.
inline Layout layout_from_json(const nlohmann::json& doc) {
  if (!doc.is_array() || doc.empty()) throw ValidationError("layout must be a non-empty list of levels");
  std::vector<Level> levels;
  int max_task = -1;
  for (const auto& level_doc : doc) {
    if (!level_doc.is_array()) throw ValidationError("layout level must be a list of task sets");
    Level level;
    for (const auto& set_doc : level_doc) {
      if (!set_doc.is_array()) throw ValidationError("task set must be a list of task indices");
      TaskSet set;
      for (const auto& task_doc : set_doc) {
        if (!task_doc.is_number_integer()) throw ValidationError("task index must be an integer");
        const auto task = task_doc.get<long long>();
        if (task < 0 || task >= kMaxTasks) {
          throw ValidationError("task index " + std::to_string(task) + " out of range");
        }
        if (set.contains(static_cast<int>(task))) throw ValidationError("duplicate task in set");
        set = set | TaskSet::single(static_cast<int>(task));
        max_task = std::max(max_task, static_cast<int>(task));
      }
      level.push_back(set);
    }
    levels.push_back(std::move(level));
  }
  Layout layout = normalized(Layout(max_task + 1, std::move(levels)));
  if (!is_valid(layout)) throw ValidationError("not a valid tree-structured layout");
  return layout;
}

inline Layout parse_layout(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(std::string("malformed layout text: ") + e.what());
  }
  return layout_from_json(doc);
}

}  // namespace treemtl

template <>
struct std::hash<treemtl::CanonicalKey> {
  std::size_t operator()(const treemtl::CanonicalKey& key) const noexcept {
    return std::hash<std::string>{}(key.bytes);
  }
};
