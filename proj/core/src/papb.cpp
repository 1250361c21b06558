// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The amnar Authors

#include "amnar/papb.hpp"

#include <algorithm>

namespace amnar {

namespace {

bool touches(const std::set<ClassId>& a, const std::set<ClassId>& b, const TaskGraph& graph) {
  for (ClassId x : a) {
    if (b.contains(x)) return true;
    for (ClassId y : b)
      if (labels_connected(graph, x, y)) return true;
  }
  return false;
}

}  // namespace

int DPState::max_length() const {
  return length.empty() ? 0 : *std::max_element(length.begin(), length.end());
}

bool labels_connected(const TaskGraph& graph, ClassId a, ClassId b) {
  if (!graph.is_action(a) || !graph.is_action(b)) return false;
  return graph.has_edge(a, b) || graph.has_edge(b, a);
}

DPState longest_subsequences(const TaskGraph& graph, std::span<const ClassId> executed) {
  const std::size_t n = executed.size();
  DPState s;
  s.length.assign(n, 1);
  s.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.nodes[i] = {executed[i]};
    for (std::size_t j = 0; j < i; ++j) {
      if (!labels_connected(graph, executed[i], executed[j])) continue;
      if (s.length[j] + 1 > s.length[i]) {
        s.length[i] = s.length[j] + 1;
        s.nodes[i] = s.nodes[j];
        s.nodes[i].insert(executed[i]);
      } else if (s.length[j] + 1 == s.length[i]) {
        s.nodes[i].insert(s.nodes[j].begin(), s.nodes[j].end());
      }
    }
  }
  return s;
}

std::vector<std::set<ClassId>> collect_longest(const DPState& state) {
  std::vector<std::set<ClassId>> out;
  const int k = state.max_length();
  for (std::size_t i = 0; i < state.length.size(); ++i) {
    if (state.length[i] != k) continue;
    if (std::find(out.begin(), out.end(), state.nodes[i]) == out.end()) out.push_back(state.nodes[i]);
  }
  return out;
}

std::set<ClassId> merge_into_sstar(std::span<const std::set<ClassId>> longest, const TaskGraph& graph) {
  std::vector<std::set<ClassId>> groups(longest.begin(), longest.end());
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t a = 0; a < groups.size() && !changed; ++a) {
      for (std::size_t b = a + 1; b < groups.size(); ++b) {
        if (!touches(groups[a], groups[b], graph)) continue;
        groups[a].insert(groups[b].begin(), groups[b].end());
        groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(b));
        changed = true;
        break;
      }
    }
  }
  // Groups that never touched are kept side by side.
  std::set<ClassId> merged;
  for (const auto& g : groups)
    for (ClassId v : g)
      if (graph.is_action(v)) merged.insert(v);
  return merged;
}

std::vector<ClassId> children_of(const TaskGraph& graph, const std::set<ClassId>& merged) {
  std::set<ClassId> out;
  if (merged.empty()) {
    for (ClassId v : graph.successors(graph.start_node()))
      if (graph.is_action(v)) out.insert(v);
  } else {
    for (ClassId a : merged)
      for (ClassId v : graph.successors(a))
        if (!merged.contains(v)) out.insert(v);
  }
  return {out.begin(), out.end()};
}

MatchResultSet match_executed(const TaskGraph& graph, std::span<const ClassId> executed) {
  MatchResultSet r;
  const auto state = longest_subsequences(graph, executed);
  r.longest = collect_longest(state);
  r.merged = merge_into_sstar(r.longest, graph);
  r.candidates = children_of(graph, r.merged);
  return r;
}

std::vector<ClassId> valid_next_actions(const TaskGraph& graph, std::span<const ClassId> executed) {
  return match_executed(graph, executed).candidates;
}

}  // namespace amnar
