// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The amnar Authors

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "amnar/dataset.hpp"

namespace amnar {

enum class SegmentSource { kGroundTruth, kPredicted };

const char* to_string(SegmentSource s) noexcept;
SegmentSource parse_segment_source(const std::string& s);

/// One line of a segments file.
struct SegmentRecord {
  std::string video;
  ActionSegment segment;
  SegmentSource source = SegmentSource::kGroundTruth;
};

struct ErrorRecord {
  std::string video;
  ErrorSpan span;
};

// JSON-lines readers/writers. Reader errors name the file and line.
std::vector<SegmentRecord> read_segments(const std::filesystem::path& path);
void write_segments(const std::filesystem::path& path, const std::vector<SegmentRecord>& records);

std::map<std::string, std::vector<ClassId>> read_frame_labels(const std::filesystem::path& path);
void write_frame_labels(const std::filesystem::path& path, const std::map<std::string, std::vector<ClassId>>& labels);

std::vector<ErrorRecord> read_error_spans(const std::filesystem::path& path);
void write_error_spans(const std::filesystem::path& path, const std::vector<ErrorRecord>& records);

/// Segments of one source grouped per video and sorted by start frame.
std::map<std::string, std::vector<ActionSegment>> group_segments(const std::vector<SegmentRecord>& records,
                                                                 SegmentSource source);
std::map<std::string, std::vector<ErrorSpan>> group_error_spans(const std::vector<ErrorRecord>& records);

/// Feature file of a video inside a features directory: `<dir>/<id>.amnf`.
std::filesystem::path feature_path(const std::filesystem::path& dir, const std::string& video);

// -- training-sample curation ----------------------------------------------

enum class SampleStrategy { kHybrid, kGroundTruthOnly, kPredictedOnly };

/// A curated training example, by reference into a video.
struct SampleRef {
  std::string video;
  ActionSegment segment;      // label is the (relabelled) target class
  std::size_t context_end = 0;  // ed of the previous segment in the same stream
  SegmentSource source = SegmentSource::kGroundTruth;
};

struct CurationInput {
  std::map<std::string, std::vector<ActionSegment>> gt;
  std::map<std::string, std::vector<ActionSegment>> pred;
  std::map<std::string, std::vector<ClassId>> frame_labels;
};

/// Builds training references. Ground-truth segments are taken as-is; predicted
/// segments are kept when their overlap ratio reaches `tau` and relabelled by
/// frame majority. Background targets are dropped. A sample at the start of a
/// stream has an empty context; it only contributes to the cluster centers.
std::vector<SampleRef> curate_samples(const CurationInput& in, double tau, SampleStrategy strategy);

void write_sample_refs(const std::filesystem::path& path, const std::vector<SampleRef>& refs);
std::vector<SampleRef> read_sample_refs(const std::filesystem::path& path);

using FeatureStore = std::map<std::string, std::shared_ptr<const FeatureMatrix>>;

/// Materializes samples against already-loaded features.
std::vector<TrainingSample> materialize_samples(const FeatureStore& store, const std::vector<SampleRef>& refs);

/// Materializes samples, loading each referenced video once from `features_dir`.
std::vector<TrainingSample> load_training_samples(const std::filesystem::path& features_dir,
                                                  const std::vector<SampleRef>& refs);

}  // namespace amnar
