// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The amnar Authors

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "amnar/dataset.hpp"

namespace amnar {

using Edge = std::pair<ClassId, ClassId>;

/// DAG over action classes 0..num_classes-1 plus one synthetic start node
/// (id num_classes) that precedes every execution.
class TaskGraph {
 public:
  TaskGraph() = default;
  /// Throws ConfigError for out-of-range endpoints, self-loops or cycles.
  TaskGraph(int num_classes, std::vector<Edge> edges);

  int num_classes() const noexcept { return num_classes_; }
  ClassId start_node() const noexcept { return num_classes_; }
  /// Action classes plus the start node.
  int num_nodes() const noexcept { return num_classes_ + 1; }
  bool is_node(ClassId v) const noexcept { return v >= 0 && v <= num_classes_; }
  bool is_action(ClassId v) const noexcept { return v >= 0 && v < num_classes_; }

  /// Lexicographically sorted edge list.
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  /// Ascending successor list of `node`; throws InvalidNodeError when out of range.
  std::span<const ClassId> successors(ClassId node) const;
  bool has_edge(ClassId u, ClassId v) const;
  std::size_t out_degree(ClassId node) const { return successors(node).size(); }

  friend bool operator==(const TaskGraph& a, const TaskGraph& b) {
    return a.num_classes_ == b.num_classes_ && a.edges_ == b.edges_;
  }

 private:
  int num_classes_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<ClassId>> adjacency_{std::vector<ClassId>{}};
};

/// Whether `v` can reach `target` following edges of `adjacency`.
bool reaches(const std::vector<std::vector<ClassId>>& adjacency, ClassId v, ClassId target);

/// Pair weights used by the greedy DAG builder. With `all_pairs` every
/// ordered pair i < j of a sequence counts; otherwise only adjacent pairs.
/// The start node is prepended to each sequence, background labels are
/// dropped, and self-pairs are skipped.
std::map<Edge, std::size_t> pair_weights(std::span<const std::vector<ClassId>> sequences, int num_classes,
                                         bool all_pairs = true);

/// Greedy maximum-weight DAG: candidate edges in descending weight (ties in
/// lexicographic order) are accepted unless they would close a cycle.
TaskGraph build_task_graph(std::span<const std::vector<ClassId>> sequences, int num_classes, bool all_pairs = true);

struct TransitionStats {
  std::map<Edge, std::size_t> counts;
  std::map<ClassId, std::map<ClassId, double>> probs;
};

/// Adjacent-pair transition counts and row-normalized probabilities.
/// Background labels are dropped; nothing is prepended.
TransitionStats transition_stats(std::span<const std::vector<ClassId>> sequences);

struct NonDeterminismMetrics {
  double non_deterministic_ratio = 0.0;
  double avg_valid_next = 0.0;
  double avg_max_transfer_prob = 0.0;
};

/// Action nodes with at least one predecessor (the start node included) of
/// out-degree greater than one.
std::set<ClassId> non_deterministic_actions(const TaskGraph& graph);

NonDeterminismMetrics graph_metrics(const TaskGraph& graph, const TransitionStats& stats);

// {"format_version":1,"num_classes":..,"start_node":..,"edges":[[u,v],...]}
std::string graph_to_json(const TaskGraph& graph);
TaskGraph graph_from_json(const std::string& text);
void write_graph(const std::filesystem::path& path, const TaskGraph& graph);
TaskGraph read_graph(const std::filesystem::path& path);

}  // namespace amnar
