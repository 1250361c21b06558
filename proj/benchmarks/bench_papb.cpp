// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The amnar Authors

#include <random>

#include <benchmark/benchmark.h>

#include "amnar/papb.hpp"
#include "amnar/synthgen.hpp"

namespace {

// Layered DAG from the synthetic generator plus a noisy walk through it.
void BM_ValidNextActions(benchmark::State& state) {
  amnar::SynthConfig cfg;
  cfg.n_classes = static_cast<int>(state.range(0));
  cfg.branching = 2.5;
  cfg.branch_span = 6;
  auto rng = amnar::stream(1, 0);
  const auto g = amnar::sample_graph(cfg, rng);
  std::vector<amnar::ClassId> executed;
  amnar::ClassId at = g.start_node();
  while (!g.successors(at).empty()) {
    const auto next = g.successors(at);
    at = next[rng() % next.size()];
    executed.push_back(rng() % 10 < 2 ? static_cast<amnar::ClassId>(rng() % static_cast<unsigned>(cfg.n_classes)) : at);
  }
  for (auto _ : state) benchmark::DoNotOptimize(amnar::valid_next_actions(g, executed));
  state.counters["history"] = static_cast<double>(executed.size());
}
BENCHMARK(BM_ValidNextActions)->Arg(16)->Arg(64)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
