// Copyright 2026 The TreeMTL Recommender Authors
//
// SPDX-License-Identifier: Apache-2.0

// FLOPs and parameter accounting for layouts.
#pragma once

#include <cstdint>
#include <istream>
#include <string>
#include <vector>

#include "treemtl/error.hpp"
#include "treemtl/graphdetect.hpp"
#include "treemtl/layout.hpp"
#include "treemtl/text.hpp"

namespace treemtl {

struct BlockCost {
  std::uint64_t flops = 0;
  std::uint64_t params = 0;

  BlockCost& operator+=(const BlockCost& other) {
    flops += other.flops;
    params += other.params;
    return *this;
  }
  friend bool operator==(const BlockCost&, const BlockCost&) = default;
};

/// Per-block backbone costs plus optional task heads. With no heads the head
/// cost is zero; a single head applies to every task; otherwise there must be
/// one head per task.
///
/// File form: one `flops,params` row per block, in order, and optional
/// `head,flops,params` rows. A leading `flops,params` header and `#` comments
/// are ignored.
class CostProfile {
 public:
  CostProfile() = default;
  explicit CostProfile(std::vector<BlockCost> blocks, std::vector<BlockCost> heads = {})
      : blocks_(std::move(blocks)), heads_(std::move(heads)) {}

  static CostProfile from_blocks(const std::vector<ComputationBlock>& blocks) {
    std::vector<BlockCost> costs;
    for (const auto& b : blocks) costs.push_back({b.flops, b.params});
    return CostProfile(std::move(costs));
  }

  static CostProfile parse(std::istream& in) {
    CostProfile profile;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (text::skippable(line)) continue;
      const auto fields = text::split(line);
      if (fields.size() == 2 && fields[0] == "flops" && fields[1] == "params") continue;
      if (fields.size() == 3 && fields[0] == "head") {
        profile.heads_.push_back({text::parse<std::uint64_t>(fields[1], "head flops", line_no),
                                  text::parse<std::uint64_t>(fields[2], "head params", line_no)});
      } else if (fields.size() == 2) {
        profile.blocks_.push_back({text::parse<std::uint64_t>(fields[0], "flops", line_no),
                                   text::parse<std::uint64_t>(fields[1], "params", line_no)});
      } else {
        throw IoError("line " + std::to_string(line_no) + ": expected 'flops,params' or 'head,flops,params'");
      }
    }
    if (profile.blocks_.empty()) throw ValidationError("cost profile lists no blocks");
    return profile;
  }

  std::string to_text() const {
    std::string out = "flops,params\n";
    for (const auto& b : blocks_) out += std::to_string(b.flops) + "," + std::to_string(b.params) + "\n";
    for (const auto& h : heads_) out += "head," + std::to_string(h.flops) + "," + std::to_string(h.params) + "\n";
    return out;
  }

  std::string digest() const { return text::hex_digest(to_text()); }

  const std::vector<BlockCost>& blocks() const { return blocks_; }
  const std::vector<BlockCost>& heads() const { return heads_; }
  std::size_t num_blocks() const { return blocks_.size(); }

  /// Cost of one full backbone.
  BlockCost backbone() const {
    BlockCost total;
    for (const auto& b : blocks_) total += b;
    return total;
  }

  /// Sum of the heads of all `num_tasks` tasks.
  BlockCost heads_total(int num_tasks) const {
    if (heads_.empty()) return {};
    if (heads_.size() == 1) {
      const auto t = static_cast<std::uint64_t>(num_tasks);
      return {heads_.front().flops * t, heads_.front().params * t};
    }
    if (heads_.size() != static_cast<std::size_t>(num_tasks)) {
      throw ValidationError("cost profile has " + std::to_string(heads_.size()) + " heads for " +
                            std::to_string(num_tasks) + " tasks");
    }
    BlockCost total;
    for (const auto& h : heads_) total += h;
    return total;
  }

 private:
  std::vector<BlockCost> blocks_;
  std::vector<BlockCost> heads_;
};

struct LayoutCost {
  BlockCost backbone;  ///< shared and branched blocks, heads excluded
  BlockCost heads;

  std::uint64_t flops() const { return backbone.flops + heads.flops; }
  std::uint64_t params() const { return backbone.params + heads.params; }
};

/// Every task set at level i instantiates one copy of block i.
inline LayoutCost layout_cost(const Layout& layout, const CostProfile& profile) {
  if (static_cast<std::size_t>(layout.num_points()) != profile.num_blocks()) {
    throw ValidationError("layout has " + std::to_string(layout.num_points()) + " branching points but the cost profile has " +
                          std::to_string(profile.num_blocks()) + " blocks");
  }
  LayoutCost cost;
  for (int b = 1; b <= layout.num_points(); ++b) {
    const auto copies = static_cast<std::uint64_t>(layout.level(b).size());
    const auto& block = profile.blocks()[static_cast<std::size_t>(b - 1)];
    cost.backbone.flops += copies * block.flops;
    cost.backbone.params += copies * block.params;
  }
  cost.heads = profile.heads_total(layout.num_tasks());
  return cost;
}

struct RelativeReduction {
  double flops_pct = 0.0;
  double params_pct = 0.0;
};

/// Percentage change against T independent single-task models (backbone plus head each).
inline RelativeReduction relative_reduction(const LayoutCost& cost, const CostProfile& profile, int num_tasks) {
  const auto t = static_cast<std::uint64_t>(num_tasks);
  const BlockCost backbone = profile.backbone();
  const BlockCost heads = profile.heads_total(num_tasks);
  const double ind_flops = static_cast<double>(t * backbone.flops + heads.flops);
  const double ind_params = static_cast<double>(t * backbone.params + heads.params);
  if (ind_flops <= 0.0 || ind_params <= 0.0) throw ValidationError("independent models have zero cost");
  return {100.0 * (static_cast<double>(cost.flops()) - ind_flops) / ind_flops,
          100.0 * (static_cast<double>(cost.params()) - ind_params) / ind_params};
}

/// Backbone FLOPs of the layout in units of one backbone (heads excluded).
inline double models_equivalent(const LayoutCost& cost, const CostProfile& profile) {
  const std::uint64_t one = profile.backbone().flops;
  if (one == 0) throw ValidationError("backbone has zero FLOPs");
  return static_cast<double>(cost.backbone.flops) / static_cast<double>(one);
}

}  // namespace treemtl
