// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The amnar Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace amnar {

/// Action-class identifier. Real classes are 0..S-1.
using ClassId = int;

/// Label carried by segments that belong to no action class.
inline constexpr ClassId kBackground = -1;

/// N x D frame features; row i is the feature of frame i. Values are finite.
class FeatureMatrix {
 public:
  explicit FeatureMatrix(std::size_t dim);
  explicit FeatureMatrix(Eigen::MatrixXd values);

  std::size_t frames() const noexcept { return static_cast<std::size_t>(values_.rows()); }
  std::size_t dim() const noexcept { return dim_; }
  const Eigen::MatrixXd& values() const noexcept { return values_; }

  /// First `n` frames as a read-only block.
  Eigen::Block<const Eigen::MatrixXd> head(std::size_t n) const;

  friend bool operator==(const FeatureMatrix& a, const FeatureMatrix& b) {
    return a.dim_ == b.dim_ && a.values_.rows() == b.values_.rows() && a.values_ == b.values_;
  }

 private:
  Eigen::MatrixXd values_;
  std::size_t dim_;
};

/// Labeled half-open frame interval [st, ed).
struct ActionSegment {
  ClassId label = kBackground;
  std::size_t st = 0;
  std::size_t ed = 0;

  std::size_t length() const noexcept { return ed > st ? ed - st : 0; }
  bool is_background() const noexcept { return label == kBackground; }
  friend bool operator==(const ActionSegment&, const ActionSegment&) = default;
};

struct ErrorSpan {
  std::size_t st = 0;
  std::size_t ed = 0;
  std::string kind;
  friend bool operator==(const ErrorSpan&, const ErrorSpan&) = default;
};

struct VideoRecord {
  std::string id;
  FeatureMatrix features{1};
  std::vector<ActionSegment> segments;
  std::optional<std::vector<ClassId>> frame_labels;
  std::vector<ErrorSpan> error_spans;

  /// Throws InvalidSegmentError / FormatError when an invariant is broken.
  void validate() const;
};

/// Per-class mean action feature over normal samples.
struct ClusterCenters {
  std::map<ClassId, Eigen::VectorXd> centers;
  std::map<ClassId, std::size_t> counts;

  bool contains(ClassId cls) const { return centers.contains(cls); }
  /// Throws MissingCenterError when absent.
  const Eigen::VectorXd& at(ClassId cls) const;
  std::vector<ClassId> classes() const;
};

/// One (context, target) pair for the reconstruction network.
struct TrainingSample {
  std::shared_ptr<const FeatureMatrix> video;
  std::size_t context_frames = 0;  // ed of the previous segment
  ClassId target_class = kBackground;
  Eigen::VectorXd target_feature;

  Eigen::Block<const Eigen::MatrixXd> context() const { return video->head(context_frames); }
};

// -- feature files ----------------------------------------------------------

std::vector<std::uint8_t> encode_features(const FeatureMatrix& m);
FeatureMatrix decode_features(std::span<const std::uint8_t> bytes);

void write_features(const std::filesystem::path& path, const FeatureMatrix& m);
FeatureMatrix load_features(const std::filesystem::path& path);

// -- feature aggregation and sample curation --------------------------------

/// Mean of rows st..ed-1.
Eigen::VectorXd action_feature(const FeatureMatrix& features, const ActionSegment& seg);

/// Fraction of `pred` covered by the ground-truth segment it intersects most.
double overlap_ratio(const ActionSegment& pred, std::span<const ActionSegment> gt);

/// Keeps (in order) the predictions whose overlap ratio is at least `tau`.
std::vector<ActionSegment> filter_segments(std::span<const ActionSegment> preds,
                                           std::span<const ActionSegment> gts, double tau);

/// Most frequent frame label inside the segment; ties go to the smaller id.
ClassId majority_label(const ActionSegment& seg, std::span<const ClassId> frame_labels);

ClusterCenters cluster_centers(std::span<const std::pair<ClassId, Eigen::VectorXd>> samples);

}  // namespace amnar
