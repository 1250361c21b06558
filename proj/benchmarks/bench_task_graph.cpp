// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The amnar Authors

#include <random>

#include <benchmark/benchmark.h>

#include "amnar/task_graph.hpp"

namespace {

void BM_BuildTaskGraph(benchmark::State& state) {
  const int classes = static_cast<int>(state.range(0));
  std::mt19937_64 rng(3);
  std::vector<std::vector<amnar::ClassId>> seqs(100);
  for (auto& s : seqs) {
    s.resize(static_cast<std::size_t>(classes));
    for (auto& y : s) y = static_cast<amnar::ClassId>(rng() % static_cast<unsigned>(classes));
  }
  for (auto _ : state) benchmark::DoNotOptimize(amnar::build_task_graph(seqs, classes));
}
BENCHMARK(BM_BuildTaskGraph)->Arg(8)->Arg(24)->Arg(48)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
