// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The amnar Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "amnar/dataset.hpp"
#include "amnar/rrb.hpp"
#include "amnar/task_graph.hpp"

namespace amnar {

inline constexpr double kDefaultQuantile = 0.85;

/// Per-class error thresholds from quantile calibration.
struct ThresholdTable {
  double q = kDefaultQuantile;
  std::map<ClassId, double> thresholds;
  std::map<ClassId, std::size_t> counts;
  /// Quantile of all calibration distances pooled; fallback for unseen classes.
  double global = 0.0;

  bool contains(ClassId cls) const { return thresholds.contains(cls); }
};

struct MatchResult {
  double d_min = 0.0;
  ClassId matched = kBackground;
};

struct SegmentVerdict {
  ActionSegment segment;
  double d_min = 0.0;
  ClassId matched = kBackground;
  std::vector<ClassId> candidates;
  bool is_error = false;
  double score = 0.0;  // d_min / theta(label)
};

/// Nearest normal representation by Euclidean distance; ties go to the
/// smaller class id. Throws NoCandidateError on an empty set.
MatchResult match(const Eigen::Ref<const Eigen::VectorXd>& action, const NormalSet& normals);

/// Nearest-rank quantile: the ceil(q*n)-th smallest value (1-based).
double nearest_rank_quantile(std::vector<double> values, double q);

/// Classes with no distances are skipped with a warning.
ThresholdTable calibrate(const std::map<ClassId, std::vector<double>>& distances, double q = kDefaultQuantile);

/// Strict: an action is an error only when it lies beyond the threshold.
inline bool flag(double d_min, double theta) { return d_min > theta; }

/// Strictly increasing in d_min for a fixed threshold.
double error_score(double d_min, double theta);

enum class CandidateMode {
  kAll,           // every valid next action
  kSingleRandom,  // one valid next action drawn at random (ablation)
};

enum class MissingThresholdPolicy { kError, kGlobal };

struct DetectOptions {
  CandidateMode mode = CandidateMode::kAll;
  /// Ignore the learned residual and match against the centers (ablation).
  bool zero_residual = false;
  MissingThresholdPolicy missing_threshold = MissingThresholdPolicy::kGlobal;
  std::uint64_t seed = 0;  // for kSingleRandom
};

/// Distances and matches for every non-background segment, without
/// thresholding. Shared by calibration and detection.
struct SegmentMatch {
  ActionSegment segment;
  std::vector<ClassId> candidates;
  MatchResult match;
};

/// Candidates without a center are dropped; an empty set falls back to every
/// class that has one.
std::vector<SegmentMatch> match_video(const FeatureMatrix& features, std::span<const ActionSegment> segments,
                                      const RRBModel& model, const TaskGraph& graph, const DetectOptions& options = {});

/// Runs prediction, reconstruction and matching over the video's segments.
std::vector<SegmentVerdict> detect_video(const VideoRecord& video, const RRBModel& model, const TaskGraph& graph,
                                         const ThresholdTable& thresholds, const DetectOptions& options = {});

/// Matching distances of normal videos, grouped by segment label.
std::map<ClassId, std::vector<double>> calibration_distances(std::span<const VideoRecord> videos,
                                                             const RRBModel& model, const TaskGraph& graph,
                                                             const DetectOptions& options = {});

// {"q":0.85,"thresholds":{"<class>":theta},...}
void write_thresholds(const std::filesystem::path& path, const ThresholdTable& table);
ThresholdTable read_thresholds(const std::filesystem::path& path);

struct VerdictRecord {
  std::string video;
  SegmentVerdict verdict;
};

void write_verdicts(const std::filesystem::path& path, const std::vector<VerdictRecord>& records);
std::vector<VerdictRecord> read_verdicts(const std::filesystem::path& path);

}  // namespace amnar
