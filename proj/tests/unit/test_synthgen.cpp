// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The amnar Authors

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "amnar/error.hpp"
#include "amnar/papb.hpp"
#include "amnar/synthgen.hpp"
#include "graph_oracle.hpp"
#include "support.hpp"

using namespace amnar;

namespace {

SynthConfig small_config() {
  SynthConfig cfg;
  cfg.n_classes = 8;
  cfg.n_train = 6;
  cfg.n_test = 6;
  cfg.dim = 6;
  return cfg;
}

std::vector<ClassId> labels_of(const VideoRecord& v) {
  std::vector<ClassId> out;
  for (const auto& s : v.segments)
    if (!s.is_background()) out.push_back(s.label);
  return out;
}

}  // namespace

TEST(SynthConfig, ValidationAndJson) {
  SynthConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.dim = 7;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.omission_rate = 0.6;
  cfg.addition_rate = 0.6;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.seed = 99;
  cfg.noise_sigma = 0.25;
  const auto back = synth_config_from_json(synth_config_to_json(cfg));
  EXPECT_EQ(back.seed, 99u);
  EXPECT_DOUBLE_EQ(back.noise_sigma, 0.25);
  EXPECT_THROW(synth_config_from_json(R"({"bogus": 1})"), FormatError);
  EXPECT_THROW(synth_config_from_json(R"({"dim": "x"})"), FormatError);
  EXPECT_EQ(synth_config_from_json(R"({"n_classes": 5})").n_classes, 5);
}

TEST(SampleGraph, BranchingOneIsAChain) {
  SynthConfig cfg = small_config();
  cfg.branching = 1.0;
  auto rng = stream(1, 0);
  const auto g = sample_graph(cfg, rng);
  std::vector<Edge> expected{{cfg.n_classes, 0}};
  for (int u = 0; u + 1 < cfg.n_classes; ++u) expected.emplace_back(u, u + 1);
  std::sort(expected.begin(), expected.end());
  EXPECT_EQ(g.edges(), expected);
}

TEST(SampleGraph, AcyclicAndMeanOutDegree) {
  SynthConfig cfg;
  cfg.n_classes = 20;
  cfg.branching = 2.4;
  cfg.branch_span = 6;
  double total = 0.0, counted = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    auto rng = stream(s, 0);
    const auto g = sample_graph(cfg, rng);
    ASSERT_FALSE(oracle::has_cycle(g.num_nodes(), g.edges()));
    // Classes far enough from the end have a full pool of children.
    for (ClassId u = 0; u + cfg.branch_span < cfg.n_classes; ++u) {
      total += static_cast<double>(g.successors(u).size());
      counted += 1.0;
    }
  }
  EXPECT_NEAR(total / counted, cfg.branching, 0.2 * cfg.branching);
}

TEST(SampleWorld, DeterministicAndSeparated) {
  const SynthConfig cfg = small_config();
  const auto a = sample_world(cfg);
  const auto b = sample_world(cfg);
  EXPECT_EQ(a.graph, b.graph);
  ASSERT_EQ(a.centers.size(), static_cast<std::size_t>(cfg.n_classes));
  for (const auto& [c, v] : a.centers) {
    EXPECT_TRUE(v.isApprox(b.centers.at(c)));
    EXPECT_TRUE(v.tail(cfg.drift_dims).isZero());
    for (const auto& [d, w] : a.centers)
      if (c < d) {
        EXPECT_GE((v - w).norm(), cfg.center_spacing);
      }
  }
}

TEST(RenderVideo, NoiselessFramesEqualCenters) {
  SynthConfig cfg = small_config();
  cfg.noise_sigma = 0.0;
  cfg.drift_amplitude = 0.0;
  const auto world = sample_world(cfg);
  auto rng = stream(3, 1);
  const auto v = generate_normal_video("v", world, cfg, rng);
  EXPECT_NO_THROW(v.validate());
  for (const auto& s : v.segments)
    for (std::size_t f = s.st; f < s.ed; ++f) {
      const Eigen::VectorXd row = v.features.values().row(static_cast<Eigen::Index>(f)).transpose();
      if (s.is_background())
        EXPECT_TRUE(row.isZero());
      else
        EXPECT_TRUE(row.isApprox(world.centers.at(s.label)));
    }
}

TEST(RenderVideo, NormalVideosFollowTheGraph) {
  SynthConfig cfg = small_config();
  cfg.branching = 2.5;
  const auto world = sample_world(cfg);
  for (std::uint64_t s = 0; s < 50; ++s) {
    auto rng = stream(s, 7);
    const auto v = generate_normal_video("v", world, cfg, rng);
    const auto seq = labels_of(v);
    ASSERT_FALSE(seq.empty());
    EXPECT_TRUE(world.graph.has_edge(world.graph.start_node(), seq.front()));
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) EXPECT_TRUE(world.graph.has_edge(seq[i], seq[i + 1]));
    EXPECT_TRUE(world.graph.successors(seq.back()).empty());
    EXPECT_TRUE(v.error_spans.empty());
  }
}

TEST(RenderVideo, FrameMeanWithinNoiseBound) {
  SynthConfig cfg = small_config();
  cfg.drift_amplitude = 0.0;
  cfg.noise_sigma = 0.7;
  cfg.min_segment_frames = 200;
  cfg.max_segment_frames = 200;
  const auto world = sample_world(cfg);
  auto rng = stream(4, 1);
  const auto v = generate_normal_video("v", world, cfg, rng);
  for (const auto& s : v.segments) {
    if (s.is_background()) continue;
    const Eigen::VectorXd mean = action_feature(v.features, s);
    const double bound = 3.0 * cfg.noise_sigma / std::sqrt(static_cast<double>(s.length()));
    for (int c = 0; c < cfg.dim; ++c) EXPECT_NEAR(mean(c), world.centers.at(s.label)(c), bound);
  }
}

TEST(InjectErrors, ZeroRatesLeavePlanUnchanged) {
  const SynthConfig cfg = small_config();
  const auto world = sample_world(cfg);
  auto rng = stream(5, 1);
  const auto plan = plan_normal_video("v", world, cfg, rng);
  const auto out = inject_errors(plan, world, cfg, rng);
  ASSERT_EQ(out.steps.size(), plan.steps.size());
  for (std::size_t i = 0; i < plan.steps.size(); ++i) {
    EXPECT_EQ(out.steps[i].label, plan.steps[i].label);
    EXPECT_TRUE(out.steps[i].error_kind.empty());
  }
}

TEST(InjectErrors, DeviationDisplacementHasMarginNorm) {
  SynthConfig cfg = small_config();
  cfg.deviation_rate = 1.0;
  cfg.deviation_margin = 4.0;
  cfg.noise_sigma = 0.3;
  cfg.min_segment_frames = 50;
  cfg.max_segment_frames = 50;
  const auto world = sample_world(cfg);
  auto rng = stream(6, 1);
  const auto plan = inject_errors(plan_normal_video("v", world, cfg, rng), world, cfg, rng);
  const auto v = render_video(plan, world, cfg, rng);
  std::size_t seen = 0;
  for (std::size_t i = 0; i < plan.steps.size(); ++i) {
    const auto& s = plan.steps[i];
    if (s.error_kind != "deviation") continue;
    ++seen;
    EXPECT_NEAR(s.displacement.norm(), cfg.deviation_margin, 1e-12);
    const Eigen::VectorXd mean = action_feature(v.features, v.segments[i]);
    EXPECT_GE((mean - plan.drift - world.centers.at(s.label)).norm(), cfg.deviation_margin - 3.0 * cfg.noise_sigma);
  }
  EXPECT_GT(seen, 0u);
}

TEST(InjectErrors, KindsAreOffGraphAndNeverConsecutive) {
  SynthConfig cfg = small_config();
  cfg.n_classes = 12;
  cfg.branching = 1.6;
  cfg.omission_rate = 0.15;
  cfg.addition_rate = 0.15;
  cfg.modification_rate = 0.15;
  cfg.deviation_rate = 0.15;
  const auto world = sample_world(cfg);
  std::map<std::string, int> kinds;
  for (std::uint64_t s = 0; s < 200; ++s) {
    auto rng = stream(s, 9);
    const auto normal = plan_normal_video("v", world, cfg, rng);
    const auto plan = inject_errors(normal, world, cfg, rng);
    std::vector<ClassId> executed;
    bool previous = false;
    std::size_t removed = 0;
    for (const auto& step : plan.steps) {
      const bool err = !step.error_kind.empty();
      if (err) ++kinds[step.error_kind];
      if (err && step.error_kind != "addition") {
        EXPECT_FALSE(previous);
      }
      if (step.error_kind == "addition" || step.error_kind == "modification" || step.error_kind == "omission") {
        const auto valid = valid_next_actions(world.graph, executed);
        EXPECT_EQ(std::find(valid.begin(), valid.end(), step.label), valid.end()) << step.error_kind;
      }
      if (step.error_kind == "omission") ++removed;
      previous = err;
      executed.push_back(step.label);
    }
    std::size_t added = 0;
    for (const auto& step : plan.steps) added += step.error_kind == "addition" ? 1 : 0;
    EXPECT_EQ(plan.steps.size(), normal.steps.size() + added - removed);
  }
  for (const char* k : {"omission", "addition", "modification", "deviation"}) EXPECT_GT(kinds[k], 0) << k;
}

TEST(PerturbSegments, MislabelFraction) {
  SynthConfig cfg = small_config();
  cfg.asm_mislabel_rate = 0.2;
  cfg.asm_boundary_jitter = 3;
  const auto world = sample_world(cfg);
  std::size_t total = 0, changed = 0;
  for (std::uint64_t s = 0; total < 4000; ++s) {
    auto rng = stream(s, 11);
    const auto v = generate_normal_video("v", world, cfg, rng);
    const auto pred = perturb_segments(v.segments, v.features.frames(), cfg, rng);
    ASSERT_EQ(pred.size(), v.segments.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
      EXPECT_GE(pred[i].length(), 1u);
      if (i + 1 < pred.size()) {
        EXPECT_EQ(pred[i].ed, pred[i + 1].st);
      }
      EXPECT_LE(std::max(pred[i].st, v.segments[i].st) - std::min(pred[i].st, v.segments[i].st), 3u);
      if (v.segments[i].is_background()) {
        EXPECT_TRUE(pred[i].is_background());
        continue;
      }
      ++total;
      changed += pred[i].label != v.segments[i].label ? 1 : 0;
    }
    EXPECT_EQ(pred.front().st, 0u);
    EXPECT_EQ(pred.back().ed, v.features.frames());
  }
  EXPECT_NEAR(static_cast<double>(changed) / static_cast<double>(total), cfg.asm_mislabel_rate, 0.02);
}

TEST(GenerateDataset, DeterministicAcrossJobs) {
  SynthConfig cfg = small_config();
  cfg.modification_rate = 0.2;
  cfg.deviation_rate = 0.2;
  const auto a = generate_dataset(cfg, 1);
  const auto b = generate_dataset(cfg, 3);
  ASSERT_EQ(a.test.size(), b.test.size());
  for (std::size_t i = 0; i < a.test.size(); ++i) {
    EXPECT_EQ(a.test[i].id, b.test[i].id);
    EXPECT_EQ(a.test[i].segments, b.test[i].segments);
    EXPECT_EQ(a.test[i].error_spans, b.test[i].error_spans);
    EXPECT_TRUE(a.test[i].features.values() == b.test[i].features.values());
  }
  for (const auto& v : a.train) EXPECT_TRUE(v.error_spans.empty());
  EXPECT_EQ(a.train.front().id, "train_0000");
  EXPECT_EQ(a.test.front().id, "test_0000");
}

TEST(GenerateDataset, MarginDoesNotShiftOtherDraws) {
  SynthConfig cfg = small_config();
  cfg.deviation_rate = 0.3;
  const auto a = generate_dataset(cfg);
  cfg.deviation_margin = 9.0;
  const auto b = generate_dataset(cfg);
  for (std::size_t i = 0; i < a.test.size(); ++i) EXPECT_EQ(a.test[i].error_spans, b.test[i].error_spans);
  for (std::size_t i = 0; i < a.train.size(); ++i)
    EXPECT_TRUE(a.train[i].features.values() == b.train[i].features.values());
}

TEST(EmitDataset, RoundTripAndByteIdentical) {
  SynthConfig cfg = small_config();
  cfg.omission_rate = 0.2;
  cfg.asm_mislabel_rate = 0.1;
  cfg.asm_boundary_jitter = 2;
  const auto data = generate_dataset(cfg);
  testing_support::TempDir d1, d2;
  emit_dataset(data, d1.path());
  emit_dataset(generate_dataset(cfg), d2.path());
  for (const char* f : {"graph.json", "config.json", "train_segments.jsonl", "test_segments.jsonl",
                        "test_errors.jsonl", "test_frame_labels.jsonl"})
    EXPECT_EQ(testing_support::slurp(d1 / f), testing_support::slurp(d2 / f)) << f;
  EXPECT_EQ(testing_support::slurp(d1 / "features" / "test_0000.amnf"),
            testing_support::slurp(d2 / "features" / "test_0000.amnf"));

  const auto back = load_dataset(d1.path());
  EXPECT_EQ(back.world.graph, data.world.graph);
  EXPECT_EQ(back.config.seed, cfg.seed);
  ASSERT_EQ(back.test.size(), data.test.size());
  for (std::size_t i = 0; i < data.test.size(); ++i) {
    EXPECT_EQ(back.test[i].segments, data.test[i].segments);
    EXPECT_EQ(back.test[i].error_spans, data.test[i].error_spans);
    EXPECT_EQ(back.test[i].frame_labels, data.test[i].frame_labels);
    // Feature files hold 32-bit floats.
    EXPECT_TRUE(back.test[i].features.values().isApprox(data.test[i].features.values(), 1e-6));
    EXPECT_EQ(back.predicted.at(data.test[i].id), data.predicted.at(data.test[i].id));
  }
}
