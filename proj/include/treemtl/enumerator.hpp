// Copyright 2026 The TreeMTL Recommender Authors
//
// SPDX-License-Identifier: Apache-2.0

/**
 * @file
 * Exhaustive enumeration of the tree-structured layout space.
 *
 * enumerate_layouts() closes the initial layout under layout cuts. The two
 * oracles below never touch the cut machinery: count_layouts_oracle() counts
 * refinement chains with a block recurrence, enumerate_chains_oracle()
 * materializes them from explicit set partitions.
 */
#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <unordered_set>
#include <vector>

#include "treemtl/error.hpp"
#include "treemtl/layout.hpp"

namespace treemtl {

inline constexpr std::uint64_t kDefaultSpaceCap = 10'000'000;
inline constexpr int kMaxCountedTasks = 12;
inline constexpr int kMaxMaterializedTasks = 8;
inline constexpr std::uint64_t kMaxMaterializedChains = 2'000'000;

/// Number of two-task architectures needed by the estimator: C(T,2)·(B+1).
inline std::uint64_t two_task_space_size(int num_tasks, int num_points) {
  if (num_tasks < 2) throw ValidationError("two-task space needs at least two tasks");
  if (num_points < 0) throw ValidationError("branching point count must be non-negative");
  const auto t = static_cast<std::uint64_t>(num_tasks);
  return t * (t - 1) / 2 * (static_cast<std::uint64_t>(num_points) + 1);
}

/// Counts chains (P_1, ..., P_B) of set partitions of {0..T-1} with each P_{k+1}
/// refining P_k. Uses the recurrence on the block holding the first element:
/// f(n, k) = sum_s C(n-1, s-1) f(s, k-1) f(n-s, k), f(0, k) = f(n, 0) = 1.
inline std::uint64_t count_layouts_oracle(int num_tasks, int num_points) {
  if (num_tasks < 1 || num_tasks > kMaxCountedTasks) {
    throw ValidationError("layout counting supports 1 to " + std::to_string(kMaxCountedTasks) +
                          " tasks, got " + std::to_string(num_tasks));
  }
  if (num_points < 1 || num_points > kMaxPoints) {
    throw ValidationError("branching point count must be in [1, " + std::to_string(kMaxPoints) +
                          "], got " + std::to_string(num_points));
  }
  using Wide = unsigned __int128;
  constexpr Wide kLimit = std::numeric_limits<std::uint64_t>::max();
  const auto n_max = static_cast<std::size_t>(num_tasks);

  std::vector<std::vector<std::uint64_t>> binom(n_max + 1, std::vector<std::uint64_t>(n_max + 1, 0));
  for (std::size_t n = 0; n <= n_max; ++n) {
    binom[n][0] = 1;
    for (std::size_t r = 1; r <= n; ++r) binom[n][r] = binom[n - 1][r - 1] + (r < n ? binom[n - 1][r] : 0);
  }

  std::vector<std::uint64_t> prev(n_max + 1, 1);  // depth 0
  for (int depth = 1; depth <= num_points; ++depth) {
    std::vector<std::uint64_t> cur(n_max + 1, 0);
    cur[0] = 1;
    for (std::size_t n = 1; n <= n_max; ++n) {
      Wide total = 0;
      for (std::size_t s = 1; s <= n; ++s) {
        total += Wide{binom[n - 1][s - 1]} * prev[s] * cur[n - s];
        if (total > kLimit) throw ValidationError("layout count overflows 64 bits");
      }
      cur[n] = static_cast<std::uint64_t>(total);
    }
    prev = std::move(cur);
  }
  return prev[n_max];
}

/// All set partitions of {0..n-1}, blocks in canonical order, generated from
/// restricted growth strings.
inline std::vector<Level> set_partitions(int n) {
  std::vector<Level> out;
  if (n < 1) return out;
  std::vector<int> growth(static_cast<std::size_t>(n), 0);
  std::vector<int> prefix_max(static_cast<std::size_t>(n), 0);
  while (true) {
    const int blocks = prefix_max.back() + 1;
    Level level(static_cast<std::size_t>(blocks));
    for (int t = 0; t < n; ++t) {
      auto& block = level[static_cast<std::size_t>(growth[static_cast<std::size_t>(t)])];
      block = block | TaskSet::single(t);
    }
    out.push_back(std::move(level));

    int pos = n - 1;
    while (pos > 0 && growth[static_cast<std::size_t>(pos)] > prefix_max[static_cast<std::size_t>(pos - 1)]) --pos;
    if (pos == 0) break;
    ++growth[static_cast<std::size_t>(pos)];
    prefix_max[static_cast<std::size_t>(pos)] =
        std::max(prefix_max[static_cast<std::size_t>(pos - 1)], growth[static_cast<std::size_t>(pos)]);
    for (int k = pos + 1; k < n; ++k) {
      growth[static_cast<std::size_t>(k)] = 0;
      prefix_max[static_cast<std::size_t>(k)] = prefix_max[static_cast<std::size_t>(pos)];
    }
  }
  return out;
}

/// True iff every block of `fine` lies inside a block of `coarse`.
inline bool refines(const Level& fine, const Level& coarse) {
  for (TaskSet block : fine) {
    bool nested = false;
    for (TaskSet parent : coarse) nested = nested || block.is_subset_of(parent);
    if (!nested) return false;
  }
  return true;
}

/// Materializes every refinement chain of length B as a Layout.
inline std::vector<Layout> enumerate_chains_oracle(int num_tasks, int num_points) {
  if (num_tasks > kMaxMaterializedTasks) {
    throw ValidationError("chain materialization supports at most " +
                          std::to_string(kMaxMaterializedTasks) + " tasks");
  }
  if (count_layouts_oracle(num_tasks, num_points) > kMaxMaterializedChains) {
    throw ValidationError("too many chains to materialize");
  }
  const std::vector<Level> partitions = set_partitions(num_tasks);
  std::vector<std::vector<std::size_t>> finer(partitions.size());
  for (std::size_t a = 0; a < partitions.size(); ++a) {
    for (std::size_t b = 0; b < partitions.size(); ++b) {
      if (refines(partitions[b], partitions[a])) finer[a].push_back(b);
    }
  }

  std::vector<Layout> out;
  std::vector<std::size_t> chain;
  auto extend = [&](auto&& self, std::size_t last) -> void {
    if (static_cast<int>(chain.size()) == num_points) {
      std::vector<Level> levels;
      for (std::size_t p : chain) levels.push_back(partitions[p]);
      out.emplace_back(num_tasks, std::move(levels));
      return;
    }
    for (std::size_t next : finer[last]) {
      chain.push_back(next);
      self(self, next);
      chain.pop_back();
    }
  };
  for (std::size_t first = 0; first < partitions.size(); ++first) {
    chain.assign(1, first);
    extend(extend, first);
  }
  return out;
}

/// Every distinct valid layout for T tasks and B branching points, in
/// breadth-first discovery order from the fully shared layout (index 0).
/// Children are visited in available_cuts() order. Rejects spaces whose
/// counted size exceeds `cap`.
inline std::vector<Layout> enumerate_layouts(int num_tasks, int num_points,
                                             std::uint64_t cap = kDefaultSpaceCap) {
  detail::check_dimensions(num_tasks, num_points);
  if (num_tasks > kMaxCountedTasks) {
    throw ValidationError("design space for " + std::to_string(num_tasks) +
                          " tasks is too large to enumerate");
  }
  const std::uint64_t expected = count_layouts_oracle(num_tasks, num_points);
  if (expected > cap) {
    throw ValidationError("design space has " + std::to_string(expected) +
                          " layouts, above the cap of " + std::to_string(cap));
  }

  std::vector<Layout> layouts;
  layouts.reserve(static_cast<std::size_t>(expected));
  std::unordered_set<CanonicalKey> seen;
  seen.reserve(static_cast<std::size_t>(expected));

  layouts.push_back(initial_layout(num_tasks, num_points));
  seen.insert(canonicalize(layouts.front()));
  for (std::size_t head = 0; head < layouts.size(); ++head) {
    const Layout current = layouts[head];
    for (const CutSpec& cut : available_cuts(current)) {
      Layout child = apply_cut(current, cut);
      if (seen.insert(canonicalize(child)).second) layouts.push_back(std::move(child));
    }
  }
  return layouts;
}

}  // namespace treemtl
