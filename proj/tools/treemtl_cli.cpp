// Copyright 2026 The TreeMTL Recommender Authors
//
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: enumerate, detect, build-table, recommend, eval-ranking.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "treemtl/treemtl.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;
constexpr int kExitNoFeasible = 4;

using namespace treemtl;

int run_enumerate(int tasks, int points, const std::string& out_path, std::uint64_t cap) {
  const auto layouts = enumerate_layouts(tasks, points, cap);
  std::ofstream file;
  if (!out_path.empty()) file = text::open_output(out_path);
  std::ostream& out = out_path.empty() ? std::cout : file;
  for (std::size_t k = 0; k < layouts.size(); ++k) out << k << ' ' << to_string(layouts[k]) << '\n';
  if (!out_path.empty()) std::cerr << layouts.size() << " layouts written to " << out_path << '\n';
  return 0;
}

int run_detect(const std::string& graph_path, std::size_t coarsen, const std::string& costs_out) {
  auto in = text::open_input(graph_path);
  const auto graph = ComputationGraph::parse(in);
  const auto cuts = find_cut_tensors(graph);
  const auto candidates = segment_candidate_blocks(graph, cuts);
  auto blocks = merge_unparameterized(candidates, graph);
  if (coarsen > 0) blocks = coarsen_blocks_auto(blocks, coarsen);

  std::cout << "graph " << (graph.name().empty() ? "<unnamed>" : graph.name()) << ": " << graph.nodes().size()
            << " nodes, " << graph.num_tensors() << " tensors, " << candidates.size() << " candidate blocks, "
            << blocks.size() << " computation blocks\n";
  std::printf("%-8s %-16s %-16s %14s %16s  %s\n", "block", "entry", "exit", "params", "flops", "nodes");
  for (const auto& b : blocks) {
    std::string nodes;
    for (const auto& id : b.nodes) nodes += (nodes.empty() ? "" : ",") + id;
    std::printf("%-8s %-16s %-16s %14llu %16llu  %s\n", b.label.c_str(), b.entry.c_str(), b.exit.c_str(),
                static_cast<unsigned long long>(b.params), static_cast<unsigned long long>(b.flops), nodes.c_str());
  }
  if (!costs_out.empty()) {
    auto out = text::open_output(costs_out);
    out << CostProfile::from_blocks(blocks).to_text();
    std::cerr << "cost profile written to " << costs_out << '\n';
  }
  return 0;
}

int run_build_table(int tasks, int points, const std::string& two_task_path, const std::string& costs_path,
                    const std::string& out_path, const BuildOptions& opts) {
  auto two_task_in = text::open_input(two_task_path);
  const auto two_task = TwoTaskTable::parse_csv(two_task_in, tasks, points);
  auto costs_in = text::open_input(costs_path);
  const auto profile = CostProfile::parse(costs_in);
  const auto table = build_table(tasks, points, two_task, profile, opts);
  auto out = text::open_output(out_path);
  table.write(out);
  if (!out) throw IoError("failed writing '" + out_path + "'");
  std::cerr << table.size() << " records written to " << out_path << '\n';
  std::cerr << "task weights:";
  for (double w : table.metadata().weights) std::cerr << ' ' << w;
  std::cerr << '\n';
  return 0;
}

PerformanceTable load_table(const std::string& path) {
  auto in = text::open_input(path);
  return PerformanceTable::read(in);
}

int run_recommend(const std::string& table_path, const Budget& budget) {
  const auto table = load_table(table_path);
  const auto result = recommend(table, budget);
  if (result.status == RecommendStatus::no_feasible_layout) {
    std::cerr << "no layout satisfies the budget\n";
    return kExitNoFeasible;
  }
  std::printf("%-6s %-7s %10s %10s %10s %8s  %s\n", "rank", "index", "score", "flops%", "params%", "models",
              "layout");
  for (std::size_t k = 0; k < result.records.size(); ++k) {
    const auto& r = result.records[k];
    std::printf("%-6zu #%-6zu %10.4f %10.2f %10.2f %8.3f  %s\n", k + 1, r.index, r.score, r.flops_pct,
                r.params_pct, r.models_equivalent, to_string(r.layout).c_str());
  }
  return 0;
}

int run_eval_ranking(const std::string& table_path, const std::string& oracle_path) {
  const auto table = load_table(table_path);
  auto in = text::open_input(oracle_path);
  const auto report = evaluate_ranking(table, parse_oracle_csv(in));
  std::printf("layouts: %zu\npearson (scores): %.6f\npearson (ranks): %.6f\n", report.count, report.score_pearson,
              report.rank_pearson);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tree-structured multi-task architecture recommender"};
  app.require_subcommand(1);

  int tasks = 0;
  int points = 0;
  std::uint64_t cap = kDefaultSpaceCap;

  auto* enumerate = app.add_subcommand("enumerate", "List every layout of the design space");
  std::string enumerate_out;
  enumerate->add_option("--tasks,-t", tasks, "Number of tasks")->required();
  enumerate->add_option("--points,-b", points, "Number of branching points")->required();
  enumerate->add_option("--out,-o", enumerate_out, "Output file (default: stdout)");
  enumerate->add_option("--cap", cap, "Maximum design space size")->capture_default_str();

  auto* detect = app.add_subcommand("detect", "Detect branching points in a computation graph");
  std::string graph_path;
  std::string costs_out;
  std::size_t coarsen = 0;
  detect->add_option("--graph,-g", graph_path, "Computation graph file")->required()->check(CLI::ExistingFile);
  detect->add_option("--coarsen", coarsen, "Merge into N FLOPs-balanced blocks");
  detect->add_option("--costs-out", costs_out, "Write the block cost profile to this file");

  auto* build = app.add_subcommand("build-table", "Estimate and cost every layout");
  std::string two_task_path;
  std::string costs_path;
  std::string table_out;
  std::string scheme = "softmax";
  BuildOptions build_opts;
  build->add_option("--tasks,-t", tasks, "Number of tasks")->required();
  build->add_option("--points,-b", points, "Number of branching points")->required();
  build->add_option("--two-task", two_task_path, "Two-task results CSV")->required()->check(CLI::ExistingFile);
  build->add_option("--costs", costs_path, "Cost profile file")->required()->check(CLI::ExistingFile);
  build->add_option("--out,-o", table_out, "Performance table output")->required();
  build->add_option("--scheme", scheme, "Weight normalization: softmax, sum, min-max")->capture_default_str();
  build->add_option("--embed-dim", build_opts.weights.svde.embed_dim, "SVDE embedding dimension")
      ->capture_default_str();
  build->add_option("--delay", build_opts.weights.svde.delay, "SVDE embedding delay")->capture_default_str();
  build->add_option("--cap", build_opts.space_cap, "Maximum design space size")->capture_default_str();

  auto* rec = app.add_subcommand("recommend", "Top-k layouts under a computation budget");
  std::string rec_table;
  Budget budget;
  std::optional<double> budget_flops;
  std::optional<double> budget_models;
  rec->add_option("--table", rec_table, "Performance table")->required()->check(CLI::ExistingFile);
  rec->add_option("--k,-k", budget.k, "Number of results")->capture_default_str();
  auto* flops_opt = rec->add_option("--budget-flops-pct", budget_flops, "Maximum backbone FLOPs change in percent");
  auto* models_opt = rec->add_option("--budget-models", budget_models, "Maximum backbone copies");
  flops_opt->excludes(models_opt);

  auto* eval = app.add_subcommand("eval-ranking", "Correlate predicted and measured layout performance");
  std::string eval_table;
  std::string oracle_path;
  eval->add_option("--table", eval_table, "Performance table")->required()->check(CLI::ExistingFile);
  eval->add_option("--oracle", oracle_path, "Measured 'index,value' CSV")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*enumerate) return run_enumerate(tasks, points, enumerate_out, cap);
    if (*detect) return run_detect(graph_path, coarsen, costs_out);
    if (*build) {
      build_opts.weights.scheme = parse_weight_normalization(scheme);
      return run_build_table(tasks, points, two_task_path, costs_path, table_out, build_opts);
    }
    if (*rec) {
      if (budget_flops) {
        budget.kind = BudgetKind::flops_pct;
        budget.limit = *budget_flops;
      } else if (budget_models) {
        budget.kind = BudgetKind::models;
        budget.limit = *budget_models;
      }
      return run_recommend(rec_table, budget);
    }
    if (*eval) return run_eval_ranking(eval_table, oracle_path);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return 0;
}
