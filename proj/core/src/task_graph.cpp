// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The amnar Authors

#include "amnar/task_graph.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "amnar/error.hpp"

namespace amnar {

namespace {

std::vector<ClassId> prepared_sequence(const std::vector<ClassId>& seq, int num_classes) {
  std::vector<ClassId> out;
  out.reserve(seq.size() + 1);
  out.push_back(num_classes);
  for (ClassId y : seq) {
    if (y == kBackground) continue;
    if (y < 0 || y >= num_classes)
      throw InvalidNodeError("label " + std::to_string(y) + " outside class range [0," + std::to_string(num_classes) + ")");
    out.push_back(y);
  }
  return out;
}

}  // namespace

TaskGraph::TaskGraph(int num_classes, std::vector<Edge> edges) : num_classes_(num_classes) {
  if (num_classes < 0) throw ConfigError("num_classes must be non-negative");
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  adjacency_.assign(static_cast<std::size_t>(num_nodes()), {});
  for (const auto& [u, v] : edges) {
    if (!is_node(u) || !is_node(v))
      throw ConfigError("edge (" + std::to_string(u) + "," + std::to_string(v) + ") references an unknown node");
    if (u == v) throw ConfigError("self-loop on node " + std::to_string(u));
    if (reaches(adjacency_, v, u))
      throw ConfigError("edge (" + std::to_string(u) + "," + std::to_string(v) + ") closes a cycle");
    adjacency_[static_cast<std::size_t>(u)].push_back(v);
  }
  // Edges were inserted in lexicographic order, so each list is ascending.
  edges_ = std::move(edges);
}

std::span<const ClassId> TaskGraph::successors(ClassId node) const {
  if (!is_node(node)) throw InvalidNodeError("node " + std::to_string(node) + " is not in the task graph");
  return adjacency_[static_cast<std::size_t>(node)];
}

bool TaskGraph::has_edge(ClassId u, ClassId v) const {
  if (!is_node(u)) return false;
  const auto& a = adjacency_[static_cast<std::size_t>(u)];
  return std::binary_search(a.begin(), a.end(), v);
}

bool reaches(const std::vector<std::vector<ClassId>>& adjacency, ClassId v, ClassId target) {
  if (v == target) return true;
  std::vector<char> seen(adjacency.size(), 0);
  std::vector<ClassId> stack{v};
  seen[static_cast<std::size_t>(v)] = 1;
  while (!stack.empty()) {
    const ClassId x = stack.back();
    stack.pop_back();
    for (ClassId y : adjacency[static_cast<std::size_t>(x)]) {
      if (y == target) return true;
      if (!seen[static_cast<std::size_t>(y)]) {
        seen[static_cast<std::size_t>(y)] = 1;
        stack.push_back(y);
      }
    }
  }
  return false;
}

std::map<Edge, std::size_t> pair_weights(std::span<const std::vector<ClassId>> sequences, int num_classes,
                                         bool all_pairs) {
  std::map<Edge, std::size_t> weights;
  for (const auto& raw : sequences) {
    const auto seq = prepared_sequence(raw, num_classes);
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
      const std::size_t j_end = all_pairs ? seq.size() : i + 2;
      for (std::size_t j = i + 1; j < j_end; ++j) {
        if (seq[i] == seq[j]) continue;
        ++weights[{seq[i], seq[j]}];
      }
    }
  }
  return weights;
}

TaskGraph build_task_graph(std::span<const std::vector<ClassId>> sequences, int num_classes, bool all_pairs) {
  if (num_classes < 0) throw ConfigError("num_classes must be non-negative");
  const auto weights = pair_weights(sequences, num_classes, all_pairs);
  std::vector<std::pair<Edge, std::size_t>> ranked(weights.begin(), weights.end());
  // map order is lexicographic; a stable sort on weight keeps it for ties.
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::vector<ClassId>> adjacency(static_cast<std::size_t>(num_classes) + 1);
  std::vector<Edge> accepted;
  for (const auto& [edge, w] : ranked) {
    const auto [u, v] = edge;
    if (reaches(adjacency, v, u)) continue;
    adjacency[static_cast<std::size_t>(u)].push_back(v);
    accepted.push_back(edge);
  }
  return TaskGraph(num_classes, std::move(accepted));
}

TransitionStats transition_stats(std::span<const std::vector<ClassId>> sequences) {
  TransitionStats stats;
  for (const auto& raw : sequences) {
    ClassId prev = kBackground;
    bool have_prev = false;
    for (ClassId y : raw) {
      if (y == kBackground) continue;
      if (have_prev) ++stats.counts[{prev, y}];
      prev = y;
      have_prev = true;
    }
  }
  std::map<ClassId, std::size_t> row_totals;
  for (const auto& [e, n] : stats.counts) row_totals[e.first] += n;
  for (const auto& [e, n] : stats.counts)
    stats.probs[e.first][e.second] = static_cast<double>(n) / static_cast<double>(row_totals[e.first]);
  return stats;
}

std::set<ClassId> non_deterministic_actions(const TaskGraph& graph) {
  std::set<ClassId> out;
  for (ClassId u = 0; u < graph.num_nodes(); ++u) {
    const auto succ = graph.successors(u);
    if (succ.size() <= 1) continue;
    for (ClassId v : succ)
      if (graph.is_action(v)) out.insert(v);
  }
  return out;
}

NonDeterminismMetrics graph_metrics(const TaskGraph& graph, const TransitionStats& stats) {
  NonDeterminismMetrics m;
  if (graph.num_classes() > 0)
    m.non_deterministic_ratio =
        static_cast<double>(non_deterministic_actions(graph).size()) / static_cast<double>(graph.num_classes());

  std::size_t non_sinks = 0, out_edges = 0;
  for (ClassId u = 0; u < graph.num_classes(); ++u) {
    const auto d = graph.out_degree(u);
    if (d == 0) continue;
    ++non_sinks;
    out_edges += d;
  }
  if (non_sinks > 0) m.avg_valid_next = static_cast<double>(out_edges) / static_cast<double>(non_sinks);

  double sum_max = 0.0;
  for (const auto& [src, row] : stats.probs) {
    double best = 0.0;
    for (const auto& [dst, p] : row) best = std::max(best, p);
    sum_max += best;
  }
  if (!stats.probs.empty()) m.avg_max_transfer_prob = sum_max / static_cast<double>(stats.probs.size());
  return m;
}

std::string graph_to_json(const TaskGraph& graph) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [u, v] : graph.edges()) edges.push_back({u, v});
  nlohmann::json o = {{"format_version", 1},
                      {"num_classes", graph.num_classes()},
                      {"start_node", graph.start_node()},
                      {"edges", std::move(edges)}};
  return o.dump();
}

TaskGraph graph_from_json(const std::string& text) {
  try {
    const auto o = nlohmann::json::parse(text);
    const int version = o.at("format_version").get<int>();
    if (version != 1) throw FormatError("graph: unsupported format_version " + std::to_string(version));
    const int n = o.at("num_classes").get<int>();
    if (o.contains("start_node") && o.at("start_node").get<int>() != n)
      throw FormatError("graph: start_node must equal num_classes");
    std::vector<Edge> edges;
    for (const auto& e : o.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw FormatError("graph: each edge must be a [u,v] pair");
      edges.emplace_back(e[0].get<int>(), e[1].get<int>());
    }
    return TaskGraph(n, std::move(edges));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("graph: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("graph: ") + e.what());
  }
}

void write_graph(const std::filesystem::path& path, const TaskGraph& graph) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << graph_to_json(graph) << '\n';
}

TaskGraph read_graph(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open graph file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return graph_from_json(ss.str());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace amnar
