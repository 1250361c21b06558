// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The amnar Authors

#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "amnar/dataset.hpp"
#include "amnar/detector.hpp"
#include "amnar/task_graph.hpp"

namespace amnar {

struct EvalOptions {
  /// A segment is erroneous when error spans cover more than this fraction of it.
  double error_overlap = 0.5;
  /// Balanced accuracy (mean of per-class recalls) instead of plain accuracy.
  bool balanced = true;
};

struct Decision {
  bool predicted_error = false;
  bool actual_error = false;
};

bool segment_is_erroneous(const ActionSegment& seg, std::span<const ErrorSpan> spans, double min_overlap = 0.5);

/// Error detection accuracy. Balanced: mean recall over the error and
/// normal classes (plain recall when one of them is absent). Throws
/// UndefinedMetricError on empty input.
double eda(std::span<const Decision> decisions, bool balanced = true);

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Throws UndefinedMetricError unless both classes occur.
double roc_auc(std::span<const double> scores, const std::vector<bool>& labels);

using VideoVerdicts = std::map<std::string, std::vector<SegmentVerdict>>;
using VideoErrors = std::map<std::string, std::vector<ErrorSpan>>;

/// Ground-truth decisions aligned with verdicts, in video then segment order.
std::vector<Decision> align_decisions(const VideoVerdicts& verdicts, const VideoErrors& errors,
                                      double error_overlap = 0.5);

/// Frame-wise accuracy of the error/normal decision over frames of segments
/// whose label is a non-deterministic action of `graph`.
double nondet_frame_accuracy(const VideoVerdicts& verdicts, const VideoErrors& errors, const TaskGraph& graph);

struct VideoBreakdown {
  std::size_t segments = 0;
  std::size_t error_segments = 0;
  std::size_t correct = 0;
};

struct EvalReport {
  double eda = 0.0;        // per EvalOptions::balanced
  double eda_plain = 0.0;  // plain segment accuracy
  double eda_balanced = 0.0;
  std::optional<double> auc;
  std::optional<double> nondet_frame_acc;
  std::size_t error_segments = 0;
  std::size_t normal_segments = 0;
  std::map<std::string, VideoBreakdown> per_video;
};

EvalReport evaluate(const VideoVerdicts& verdicts, const VideoErrors& errors, const TaskGraph* graph = nullptr,
                    const EvalOptions& options = {});

std::string report_to_json(const EvalReport& report);

/// Per-video timeline: ground-truth error spans above, verdicts below.
std::string render_timeline_svg(const VideoVerdicts& verdicts, const VideoErrors& errors);

}  // namespace amnar
