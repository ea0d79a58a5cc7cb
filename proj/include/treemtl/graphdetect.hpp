// Copyright 2026 The TreeMTL Recommender Authors
//
// SPDX-License-Identifier: Apache-2.0

/**
 * @file
 * Branching point detection on a serialized CNN computation graph.
 *
 * Stage one finds every tensor through which all source-to-sink paths pass
 * and uses consecutive such tensors to delimit single-entry/single-exit
 * candidate blocks. Stage two folds blocks that hold only unparameterized or
 * normalization operators into a neighbouring parameterized block.
 */
#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <istream>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "treemtl/error.hpp"

namespace treemtl {

struct GraphNode {
  std::string id;
  std::string op;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::uint64_t params = 0;
  std::uint64_t flops = 0;
};

/// Validated DAG with exactly one source tensor and one sink tensor.
///
/// File form: `{"name": ..., "inputs": [tensor], "outputs": [tensor],
/// "nodes": [{"id", "op", "inputs": [...], "outputs": [...], "params", "flops"}]}`.
class ComputationGraph {
 public:
  static ComputationGraph from_json(const nlohmann::json& doc) {
    ComputationGraph g;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    try {
      g.name_ = doc.value("name", std::string{});
      inputs = doc.at("inputs").get<std::vector<std::string>>();
      outputs = doc.at("outputs").get<std::vector<std::string>>();
      for (const auto& n : doc.at("nodes")) {
        GraphNode node;
        node.id = n.at("id").get<std::string>();
        node.op = n.at("op").get<std::string>();
        node.inputs = n.at("inputs").get<std::vector<std::string>>();
        node.outputs = n.at("outputs").get<std::vector<std::string>>();
        node.params = n.value("params", std::uint64_t{0});
        node.flops = n.value("flops", std::uint64_t{0});
        g.nodes_.push_back(std::move(node));
      }
    } catch (const nlohmann::json::exception& e) {
      throw IoError(std::string("malformed graph document: ") + e.what());
    }
    if (inputs.size() != 1) throw ValidationError("graph must have exactly one input tensor (multiple sources)");
    if (outputs.size() != 1) throw ValidationError("graph must have exactly one output tensor (multiple sinks)");
    g.build(inputs.front(), outputs.front());
    return g;
  }

  static ComputationGraph parse(std::istream& in) {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw IoError(std::string("malformed graph file: ") + e.what());
    }
    return from_json(doc);
  }

  nlohmann::json to_json() const {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : nodes_) {
      nodes.push_back({{"id", n.id}, {"op", n.op}, {"inputs", n.inputs}, {"outputs", n.outputs},
                       {"params", n.params}, {"flops", n.flops}});
    }
    return {{"name", name_}, {"inputs", {tensor_names_[source_]}}, {"outputs", {tensor_names_[sink_]}},
            {"nodes", nodes}};
  }

  const std::string& name() const { return name_; }
  const std::vector<GraphNode>& nodes() const { return nodes_; }
  std::size_t num_tensors() const { return tensor_names_.size(); }
  const std::string& source() const { return tensor_names_[source_]; }
  const std::string& sink() const { return tensor_names_[sink_]; }
  const std::string& tensor_name(std::size_t t) const { return tensor_names_[t]; }
  std::size_t tensor_index(const std::string& name) const { return tensor_ids_.at(name); }
  std::size_t source_index() const { return source_; }
  std::size_t sink_index() const { return sink_; }

  /// Node indices in topological order; ties broken by node id so the order
  /// does not depend on how nodes are listed in the file.
  const std::vector<std::size_t>& topo_order() const { return topo_; }
  std::size_t node_position(std::size_t node) const { return node_pos_[node]; }
  /// Producing node of tensor `t`, or npos for the source tensor.
  std::size_t producer(std::size_t t) const { return producer_[t]; }
  const std::vector<std::size_t>& consumers(std::size_t t) const { return consumers_[t]; }
  const std::vector<std::size_t>& node_inputs(std::size_t n) const { return node_in_[n]; }
  const std::vector<std::size_t>& node_outputs(std::size_t n) const { return node_out_[n]; }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  std::size_t intern(const std::string& tensor) {
    const auto [it, fresh] = tensor_ids_.emplace(tensor, tensor_names_.size());
    if (fresh) tensor_names_.push_back(tensor);
    return it->second;
  }

  void build(const std::string& source, const std::string& sink) {
    std::set<std::string> node_ids;
    for (const auto& n : nodes_) {
      if (!node_ids.insert(n.id).second) throw ValidationError("duplicate node id '" + n.id + "'");
      if (n.inputs.empty()) throw ValidationError("node '" + n.id + "' has no inputs (multiple sources)");
      if (n.outputs.empty()) throw ValidationError("node '" + n.id + "' has no outputs");
    }
    source_ = intern(source);
    for (const auto& n : nodes_) {
      std::vector<std::size_t> in;
      std::vector<std::size_t> out;
      for (const auto& t : n.inputs) in.push_back(intern(t));
      for (const auto& t : n.outputs) out.push_back(intern(t));
      node_in_.push_back(std::move(in));
      node_out_.push_back(std::move(out));
    }
    sink_ = intern(sink);

    producer_.assign(tensor_names_.size(), npos);
    consumers_.assign(tensor_names_.size(), {});
    for (std::size_t n = 0; n < nodes_.size(); ++n) {
      for (std::size_t t : node_out_[n]) {
        if (t == source_) throw ValidationError("graph input '" + source + "' is produced by node '" + nodes_[n].id + "'");
        if (producer_[t] != npos) {
          throw ValidationError("tensor '" + tensor_names_[t] + "' is produced by more than one node");
        }
        producer_[t] = n;
      }
      for (std::size_t t : node_in_[n]) {
        if (std::find(consumers_[t].begin(), consumers_[t].end(), n) == consumers_[t].end()) consumers_[t].push_back(n);
      }
    }
    for (std::size_t t = 0; t < tensor_names_.size(); ++t) {
      if (t != source_ && producer_[t] == npos) {
        throw ValidationError("dangling tensor '" + tensor_names_[t] + "' is consumed but never produced");
      }
      if (t != sink_ && consumers_[t].empty()) {
        throw ValidationError("tensor '" + tensor_names_[t] + "' is never consumed (multiple sinks)");
      }
    }
    if (sink_ == source_ && !nodes_.empty()) throw ValidationError("graph input and output coincide");
    if (!consumers_[sink_].empty()) throw ValidationError("graph output '" + sink + "' is consumed by another node");

    // Kahn's algorithm, smallest node id first.
    std::vector<std::size_t> pending(nodes_.size(), 0);
    for (std::size_t n = 0; n < nodes_.size(); ++n) {
      for (std::size_t t : node_in_[n]) {
        if (producer_[t] != npos) ++pending[n];
      }
    }
    auto later = [&](std::size_t a, std::size_t b) { return nodes_[a].id > nodes_[b].id; };
    std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(later)> ready(later);
    for (std::size_t n = 0; n < nodes_.size(); ++n) {
      if (pending[n] == 0) ready.push(n);
    }
    while (!ready.empty()) {
      const std::size_t n = ready.top();
      ready.pop();
      topo_.push_back(n);
      for (std::size_t t : node_out_[n]) {
        for (std::size_t c : consumers_[t]) {
          // A node consuming the same tensor twice is counted once per edge.
          const auto edges = std::count(node_in_[c].begin(), node_in_[c].end(), t);
          pending[c] -= static_cast<std::size_t>(edges);
          if (pending[c] == 0) ready.push(c);
        }
      }
    }
    if (topo_.size() != nodes_.size()) throw ValidationError("graph contains a cycle");
    node_pos_.assign(nodes_.size(), 0);
    for (std::size_t k = 0; k < topo_.size(); ++k) node_pos_[topo_[k]] = k;
  }

  std::string name_;
  std::vector<GraphNode> nodes_;
  std::vector<std::string> tensor_names_;
  std::unordered_map<std::string, std::size_t> tensor_ids_;
  std::vector<std::vector<std::size_t>> node_in_;
  std::vector<std::vector<std::size_t>> node_out_;
  std::vector<std::size_t> producer_;
  std::vector<std::vector<std::size_t>> consumers_;
  std::vector<std::size_t> topo_;
  std::vector<std::size_t> node_pos_;
  std::size_t source_ = 0;
  std::size_t sink_ = 0;
};

/// Tensors whose removal disconnects the source from the sink, in path order.
/// The source and sink themselves are always included.
inline std::vector<std::string> find_cut_tensors(const ComputationGraph& graph) {
  const std::size_t n_tensors = graph.num_tensors();
  const std::size_t source = graph.source_index();
  const std::size_t sink = graph.sink_index();

  auto sink_reachable_without = [&](std::size_t removed) {
    std::vector<char> seen(n_tensors, 0);
    std::vector<std::size_t> stack{source};
    seen[source] = 1;
    while (!stack.empty()) {
      const std::size_t t = stack.back();
      stack.pop_back();
      if (t == sink) return true;
      for (std::size_t node : graph.consumers(t)) {
        for (std::size_t out : graph.node_outputs(node)) {
          if (out != removed && !seen[out]) {
            seen[out] = 1;
            stack.push_back(out);
          }
        }
      }
    }
    return false;
  };

  // Position along the topological order; cut tensors are totally ordered by it.
  auto position = [&](std::size_t t) -> std::size_t {
    if (t == source) return 0;
    return graph.node_position(graph.producer(t)) + 1;
  };

  std::vector<std::size_t> cuts{source};
  for (std::size_t t = 0; t < n_tensors; ++t) {
    if (t == source || t == sink) continue;
    if (!sink_reachable_without(t)) cuts.push_back(t);
  }
  if (sink != source) cuts.push_back(sink);
  std::stable_sort(cuts.begin(), cuts.end(), [&](std::size_t a, std::size_t b) {
    if (a == sink || b == sink) return b == sink && a != sink;
    return position(a) < position(b);
  });

  std::vector<std::string> names;
  names.reserve(cuts.size());
  for (std::size_t t : cuts) names.push_back(graph.tensor_name(t));
  return names;
}

struct CandidateBlock {
  std::vector<std::string> nodes;  ///< node ids in topological order
  std::string entry;
  std::string exit;
};

/// Assigns every node to the span between two consecutive cut tensors.
inline std::vector<CandidateBlock> segment_candidate_blocks(const ComputationGraph& graph,
                                                            const std::vector<std::string>& cuts) {
  if (cuts.size() < 2) throw ValidationError("segmentation needs at least the source and sink cut tensors");
  std::vector<std::size_t> cut_rank(graph.num_tensors(), ComputationGraph::npos);
  for (std::size_t k = 0; k < cuts.size(); ++k) cut_rank[graph.tensor_index(cuts[k])] = k;

  // A tensor's segment is its own rank if it is a cut, else its producer's segment.
  std::vector<std::size_t> tensor_segment(graph.num_tensors(), 0);
  std::vector<std::size_t> node_segment(graph.nodes().size(), 0);
  for (std::size_t node : graph.topo_order()) {
    std::size_t seg = 0;
    for (std::size_t t : graph.node_inputs(node)) seg = std::max(seg, tensor_segment[t]);
    node_segment[node] = seg;
    for (std::size_t t : graph.node_outputs(node)) {
      tensor_segment[t] = cut_rank[t] != ComputationGraph::npos ? cut_rank[t] : seg;
    }
  }
  tensor_segment[graph.source_index()] = 0;

  std::vector<CandidateBlock> blocks(cuts.size() - 1);
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    blocks[k].entry = cuts[k];
    blocks[k].exit = cuts[k + 1];
  }
  for (std::size_t node : graph.topo_order()) {
    blocks.at(node_segment[node]).nodes.push_back(graph.nodes()[node].id);
  }
  return blocks;
}

enum class OpRole { anchor, mergeable };

/// Maps operator kinds to roles. A node anchors a computation block when it has
/// parameters and its kind is not listed as mergeable; normalization layers
/// are mergeable even though they carry parameters.
class OpKindTable {
 public:
  static OpKindTable defaults() {
    OpKindTable table;
    for (const char* op : {"conv", "conv2d", "convolution", "deconv", "convtranspose", "linear", "gemm", "fc",
                           "dense", "matmul"}) {
      table.set(op, OpRole::anchor);
    }
    for (const char* op : {"bn", "batchnorm", "batch_norm", "batchnorm2d", "ln", "layernorm", "layer_norm",
                           "groupnorm", "relu", "relu6", "sigmoid", "tanh", "hardswish", "gelu", "pool",
                           "maxpool", "avgpool", "globalavgpool", "adaptiveavgpool", "add", "identity",
                           "dropout", "flatten", "concat"}) {
      table.set(op, OpRole::mergeable);
    }
    return table;
  }

  void set(std::string op, OpRole role) { roles_[lower(std::move(op))] = role; }

  bool is_anchor(const GraphNode& node) const {
    if (node.params == 0) return false;
    const auto it = roles_.find(lower(node.op));
    return it == roles_.end() || it->second == OpRole::anchor;
  }

 private:
  static std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
  }

  std::map<std::string, OpRole> roles_;
};

struct ComputationBlock {
  std::size_t index = 0;
  std::string label;
  std::vector<std::string> nodes;
  std::string entry;
  std::string exit;
  std::uint64_t params = 0;
  std::uint64_t flops = 0;
};

namespace detail {

inline void relabel(std::vector<ComputationBlock>& blocks) {
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    blocks[k].index = k;
    blocks[k].label = "block" + std::to_string(k + 1);
  }
}

inline void absorb(ComputationBlock& into, const ComputationBlock& from) {
  into.nodes.insert(into.nodes.end(), from.nodes.begin(), from.nodes.end());
  into.exit = from.exit;
  into.params += from.params;
  into.flops += from.flops;
}

}  // namespace detail

/// Folds blocks without an anchor node into the preceding anchored block;
/// leading ones go into the first anchored block instead.
inline std::vector<ComputationBlock> merge_unparameterized(const std::vector<CandidateBlock>& blocks,
                                                           const ComputationGraph& graph,
                                                           const OpKindTable& kinds = OpKindTable::defaults()) {
  std::unordered_map<std::string, const GraphNode*> by_id;
  for (const auto& n : graph.nodes()) by_id.emplace(n.id, &n);

  std::vector<ComputationBlock> out;
  std::vector<ComputationBlock> leading;
  for (const auto& cand : blocks) {
    ComputationBlock block{0, {}, cand.nodes, cand.entry, cand.exit, 0, 0};
    bool anchored = false;
    for (const auto& id : cand.nodes) {
      const GraphNode& node = *by_id.at(id);
      block.params += node.params;
      block.flops += node.flops;
      anchored = anchored || kinds.is_anchor(node);
    }
    if (anchored) {
      if (!leading.empty()) {
        ComputationBlock merged = leading.front();
        for (std::size_t k = 1; k < leading.size(); ++k) detail::absorb(merged, leading[k]);
        detail::absorb(merged, block);
        block = std::move(merged);
        leading.clear();
      }
      out.push_back(std::move(block));
    } else if (out.empty()) {
      leading.push_back(std::move(block));
    } else {
      detail::absorb(out.back(), block);
    }
  }
  if (out.empty()) throw ValidationError("graph has no parameterized computation block");
  detail::relabel(out);
  return out;
}

/// Inclusive range [first, last] of block indices.
struct BlockRange {
  std::size_t first = 0;
  std::size_t last = 0;
  friend bool operator==(const BlockRange&, const BlockRange&) = default;
};

/// Merges consecutive ranges of blocks; `grouping` must tile [0, n) in order.
inline std::vector<ComputationBlock> coarsen_blocks(const std::vector<ComputationBlock>& blocks,
                                                    const std::vector<BlockRange>& grouping) {
  if (grouping.empty()) throw ValidationError("coarsening needs at least one group");
  std::size_t expected = 0;
  for (const auto& r : grouping) {
    if (r.first != expected || r.last < r.first || r.last >= blocks.size()) {
      throw ValidationError("grouping must consist of consecutive, non-overlapping ranges covering all blocks");
    }
    expected = r.last + 1;
  }
  if (expected != blocks.size()) throw ValidationError("grouping does not cover every block");
  for (std::size_t k = 1; k < blocks.size(); ++k) {
    if (blocks[k].entry != blocks[k - 1].exit) throw ValidationError("blocks are not sequentially connected");
  }
  std::vector<ComputationBlock> out;
  for (const auto& r : grouping) {
    ComputationBlock merged = blocks[r.first];
    for (std::size_t k = r.first + 1; k <= r.last; ++k) detail::absorb(merged, blocks[k]);
    out.push_back(std::move(merged));
  }
  detail::relabel(out);
  return out;
}

/// Splits `costs` into `groups` consecutive non-empty ranges minimizing the
/// largest range sum. Among optimal splits the one with the earliest
/// boundaries (lexicographically) wins.
inline std::vector<BlockRange> linear_partition(const std::vector<std::uint64_t>& costs, std::size_t groups) {
  const std::size_t n = costs.size();
  if (groups < 1 || groups > n) {
    throw ValidationError("cannot split " + std::to_string(n) + " blocks into " + std::to_string(groups) + " groups");
  }
  std::vector<std::uint64_t> prefix(n + 1, 0);
  for (std::size_t k = 0; k < n; ++k) prefix[k + 1] = prefix[k] + costs[k];
  auto range_sum = [&](std::size_t a, std::size_t b) { return prefix[b] - prefix[a]; };  // [a, b)

  constexpr auto kInf = static_cast<std::uint64_t>(-1);
  // best[g][i]: minimal max-sum when splitting the suffix starting at i into g groups.
  std::vector<std::vector<std::uint64_t>> best(groups + 1, std::vector<std::uint64_t>(n + 1, kInf));
  best[0][n] = 0;
  for (std::size_t g = 1; g <= groups; ++g) {
    for (std::size_t i = 0; i + g <= n; ++i) {
      for (std::size_t end = i + 1; end + (g - 1) <= n; ++end) {
        if (best[g - 1][end] == kInf) continue;
        best[g][i] = std::min(best[g][i], std::max(range_sum(i, end), best[g - 1][end]));
      }
    }
  }
  const std::uint64_t optimum = best[groups][0];

  std::vector<BlockRange> out;
  std::size_t start = 0;
  for (std::size_t g = groups; g >= 1; --g) {
    std::size_t end = start + 1;
    while (!(range_sum(start, end) <= optimum && best[g - 1][end] <= optimum)) ++end;
    out.push_back({start, end - 1});
    start = end;
  }
  return out;
}

/// Automatic coarsening into `groups` blocks of balanced FLOPs.
inline std::vector<ComputationBlock> coarsen_blocks_auto(const std::vector<ComputationBlock>& blocks,
                                                         std::size_t groups) {
  std::vector<std::uint64_t> flops;
  flops.reserve(blocks.size());
  for (const auto& b : blocks) flops.push_back(b.flops);
  return coarsen_blocks(blocks, linear_partition(flops, groups));
}

/// Full detector: cuts, candidate blocks, then merging.
inline std::vector<ComputationBlock> detect_blocks(const ComputationGraph& graph,
                                                   const OpKindTable& kinds = OpKindTable::defaults()) {
  return merge_unparameterized(segment_candidate_blocks(graph, find_cut_tensors(graph)), graph, kinds);
}

}  // namespace treemtl
