// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The amnar Authors

#include <random>

#include <benchmark/benchmark.h>

#include "amnar/rrb.hpp"

namespace {

Eigen::MatrixXd noise(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

amnar::RRBConfig config(int dim) {
  amnar::RRBConfig c;
  c.dim = dim;
  return c;
}

void BM_PredictResiduals(benchmark::State& state) {
  const auto cfg = config(static_cast<int>(state.range(0)));
  const auto params = amnar::init_params(cfg, 1);
  const auto context = noise(state.range(1), cfg.dim, 2);
  const auto queries = noise(3, cfg.dim, 3);
  for (auto _ : state) benchmark::DoNotOptimize(amnar::predict_residuals(queries, context, cfg, params));
}
BENCHMARK(BM_PredictResiduals)->Args({8, 64})->Args({8, 512})->Args({64, 512});

void BM_LossAndGradient(benchmark::State& state) {
  const auto cfg = config(static_cast<int>(state.range(0)));
  const auto params = amnar::init_params(cfg, 1);
  const auto context = noise(state.range(1), cfg.dim, 2);
  const Eigen::VectorXd center = noise(cfg.dim, 1, 3), target = noise(cfg.dim, 1, 4);
  amnar::RRBParams grad = amnar::RRBParams::zeros(cfg);
  for (auto _ : state)
    benchmark::DoNotOptimize(amnar::loss_and_gradient(cfg, params, context, center, target, &grad));
}
BENCHMARK(BM_LossAndGradient)->Args({8, 64})->Args({8, 512})->Args({64, 512});

}  // namespace

BENCHMARK_MAIN();
