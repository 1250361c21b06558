// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The amnar Authors

#pragma once

#include <set>
#include <span>
#include <vector>

#include "amnar/task_graph.hpp"

namespace amnar {

/// Dynamic-programming tables over an executed label sequence.
///
/// `length[i]` is the length of the longest chain of positions ending at i
/// whose consecutive labels are adjacent in the task graph (an edge in
/// either direction). `nodes[i]` is the union of the labels of every chain
/// that attains `length[i]`.
struct DPState {
  std::vector<int> length;
  std::vector<std::set<ClassId>> nodes;

  int max_length() const;
};

/// Next-action prediction result for one executed sequence.
struct MatchResultSet {
  /// Node sets of the chains ending at each position of maximal length.
  std::vector<std::set<ClassId>> longest;
  /// Merged executed-node set (action nodes only).
  std::set<ClassId> merged;
  /// Valid next actions, ascending.
  std::vector<ClassId> candidates;
};

/// Labels connect iff both are action nodes and an edge joins them.
bool labels_connected(const TaskGraph& graph, ClassId a, ClassId b);

DPState longest_subsequences(const TaskGraph& graph, std::span<const ClassId> executed);

/// Distinct node sets of the positions attaining the maximal chain length.
std::vector<std::set<ClassId>> collect_longest(const DPState& state);

/// Merges chains that share a node or touch through a graph edge until no
/// further merge applies, and returns the union restricted to action nodes.
std::set<ClassId> merge_into_sstar(std::span<const std::set<ClassId>> longest, const TaskGraph& graph);

/// Successors of the merged set that are not in it. When the merged set is
/// empty (no history, or nothing recognisable in it) the start node's
/// successors are returned.
std::vector<ClassId> children_of(const TaskGraph& graph, const std::set<ClassId>& merged);

MatchResultSet match_executed(const TaskGraph& graph, std::span<const ClassId> executed);

std::vector<ClassId> valid_next_actions(const TaskGraph& graph, std::span<const ClassId> executed);

}  // namespace amnar
