// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The amnar Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "amnar/dataset.hpp"
#include "amnar/task_graph.hpp"

namespace amnar {

/// Knobs of the synthetic procedural-task generator.
struct SynthConfig {
  std::uint64_t seed = 7;
  int n_classes = 12;
  double branching = 2.0;  // mean children per non-sink class
  int branch_span = 4;     // children are drawn from the next `branch_span` classes
  int dim = 8;
  int drift_dims = 2;      // trailing channels carrying the per-video drift
  int min_segment_frames = 6;
  int max_segment_frames = 14;
  int min_background_frames = 4;  // leading background segment; 0 disables it
  int max_background_frames = 8;
  double center_spacing = 4.0;
  double noise_sigma = 0.5;
  double drift_amplitude = 3.0;
  int n_train = 120;
  int n_test = 80;
  double omission_rate = 0.0;
  double addition_rate = 0.0;
  double modification_rate = 0.0;
  double deviation_rate = 0.0;
  double deviation_margin = 3.0;
  double asm_mislabel_rate = 0.0;
  int asm_boundary_jitter = 0;

  /// Throws ConfigError.
  void validate() const;
};

std::string synth_config_to_json(const SynthConfig& cfg);
/// Unknown keys are rejected; missing keys keep their defaults.
SynthConfig synth_config_from_json(const std::string& text);

/// Fixed quantities shared by every video of a dataset.
struct SynthWorld {
  TaskGraph graph;
  std::map<ClassId, Eigen::VectorXd> centers;  // true class means
};

/// Deterministic sub-stream of the master seed.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

/// Random DAG over topologically numbered classes: class u always links to
/// u+1 and to further classes within the branching span, so branching 1
/// gives a chain. The start node links to class 0.
TaskGraph sample_graph(const SynthConfig& cfg, std::mt19937_64& rng);

/// Well-separated class centers occupying the non-drift channels.
std::map<ClassId, Eigen::VectorXd> sample_centers(const SynthConfig& cfg, std::mt19937_64& rng);

SynthWorld sample_world(const SynthConfig& cfg);

/// One step of an execution before frames are rendered.
struct PlannedStep {
  ClassId label = kBackground;
  std::size_t frames = 0;
  Eigen::VectorXd displacement;  // added to every frame; empty = none
  std::string error_kind;        // empty = normal
};

struct VideoPlan {
  std::string id;
  Eigen::VectorXd drift;
  std::vector<PlannedStep> steps;
};

/// Walk from the start node to a sink, choosing uniformly among children.
VideoPlan plan_normal_video(const std::string& id, const SynthWorld& world, const SynthConfig& cfg,
                            std::mt19937_64& rng);

/// Applies omission / addition / modification / deviation errors at the
/// configured per-step rates. At most one error per step, and the step after
/// an error is left untouched. A deviation moves the step by the margin along
/// a random direction of the center channels; drift channels are untouched.
VideoPlan inject_errors(const VideoPlan& plan, const SynthWorld& world, const SynthConfig& cfg, std::mt19937_64& rng);

/// Frames are center + drift + displacement + N(0, sigma^2). Error spans are
/// recorded on the segments annotated with an error kind; an omission is
/// annotated on the step that follows the removed one.
VideoRecord render_video(const VideoPlan& plan, const SynthWorld& world, const SynthConfig& cfg, std::mt19937_64& rng);

VideoRecord generate_normal_video(const std::string& id, const SynthWorld& world, const SynthConfig& cfg,
                                  std::mt19937_64& rng);

/// Emulated action-segmentation output: mislabelled classes and jittered
/// boundaries over the ground-truth segments.
std::vector<ActionSegment> perturb_segments(const std::vector<ActionSegment>& gt, std::size_t frames,
                                            const SynthConfig& cfg, std::mt19937_64& rng);

struct SynthDataset {
  SynthConfig config;
  SynthWorld world;
  std::vector<VideoRecord> train;  // normal only
  std::vector<VideoRecord> test;
  std::map<std::string, std::vector<ActionSegment>> predicted;  // per video, both splits
};

SynthDataset generate_dataset(const SynthConfig& cfg, std::size_t jobs = 1);

/// Writes graph.json, config.json, features/<id>.amnf, {train,test}_segments.jsonl
/// (gt and pred), {train,test}_frame_labels.jsonl and test_errors.jsonl.
void emit_dataset(const SynthDataset& data, const std::filesystem::path& out_dir);

/// Reads back what emit_dataset wrote. True centers are not stored and stay empty.
SynthDataset load_dataset(const std::filesystem::path& dir);

}  // namespace amnar
