// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The amnar Authors

#include "amnar/dataset_io.hpp"

#include <algorithm>
#include <fstream>
#include <functional>

#include <nlohmann/json.hpp>

#include "amnar/error.hpp"

namespace amnar {

using nlohmann::json;

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

// Calls `fn(object, line_number)` for every non-blank line.
void for_each_json_line(const std::filesystem::path& path, const std::function<void(const json&, std::size_t)>& fn) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
      fn(obj, lineno);
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

std::size_t frame_index(const json& obj, const char* key) {
  const auto v = obj.at(key).get<long long>();
  if (v < 0) throw FormatError(std::string("field '") + key + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

}  // namespace

const char* to_string(SegmentSource s) noexcept {
  return s == SegmentSource::kGroundTruth ? "gt" : "pred";
}

SegmentSource parse_segment_source(const std::string& s) {
  if (s == "gt") return SegmentSource::kGroundTruth;
  if (s == "pred") return SegmentSource::kPredicted;
  throw FormatError("field 'source' must be \"gt\" or \"pred\", got \"" + s + "\"");
}

std::vector<SegmentRecord> read_segments(const std::filesystem::path& path) {
  std::vector<SegmentRecord> out;
  for_each_json_line(path, [&](const json& o, std::size_t) {
    SegmentRecord r;
    r.video = o.at("video").get<std::string>();
    r.segment.label = o.at("label").get<ClassId>();
    r.segment.st = frame_index(o, "st");
    r.segment.ed = frame_index(o, "ed");
    if (r.segment.st >= r.segment.ed) throw FormatError("segment with st >= ed");
    r.source = parse_segment_source(o.value("source", std::string("gt")));
    out.push_back(std::move(r));
  });
  return out;
}

void write_segments(const std::filesystem::path& path, const std::vector<SegmentRecord>& records) {
  auto out = open_out(path);
  for (const auto& r : records) {
    json o = {{"video", r.video},
              {"label", r.segment.label},
              {"st", r.segment.st},
              {"ed", r.segment.ed},
              {"source", to_string(r.source)}};
    out << o.dump() << '\n';
  }
}

std::map<std::string, std::vector<ClassId>> read_frame_labels(const std::filesystem::path& path) {
  std::map<std::string, std::vector<ClassId>> out;
  for_each_json_line(path, [&](const json& o, std::size_t) {
    out[o.at("video").get<std::string>()] = o.at("labels").get<std::vector<ClassId>>();
  });
  return out;
}

void write_frame_labels(const std::filesystem::path& path, const std::map<std::string, std::vector<ClassId>>& labels) {
  auto out = open_out(path);
  for (const auto& [video, seq] : labels) out << json{{"video", video}, {"labels", seq}}.dump() << '\n';
}

std::vector<ErrorRecord> read_error_spans(const std::filesystem::path& path) {
  std::vector<ErrorRecord> out;
  for_each_json_line(path, [&](const json& o, std::size_t) {
    ErrorRecord r;
    r.video = o.at("video").get<std::string>();
    r.span.st = frame_index(o, "st");
    r.span.ed = frame_index(o, "ed");
    r.span.kind = o.at("kind").get<std::string>();
    out.push_back(std::move(r));
  });
  return out;
}

void write_error_spans(const std::filesystem::path& path, const std::vector<ErrorRecord>& records) {
  auto out = open_out(path);
  for (const auto& r : records)
    out << json{{"video", r.video}, {"st", r.span.st}, {"ed", r.span.ed}, {"kind", r.span.kind}}.dump() << '\n';
}

std::map<std::string, std::vector<ActionSegment>> group_segments(const std::vector<SegmentRecord>& records,
                                                                 SegmentSource source) {
  std::map<std::string, std::vector<ActionSegment>> out;
  for (const auto& r : records)
    if (r.source == source) out[r.video].push_back(r.segment);
  for (auto& [_, segs] : out)
    std::stable_sort(segs.begin(), segs.end(), [](const auto& a, const auto& b) { return a.st < b.st; });
  return out;
}

std::map<std::string, std::vector<ErrorSpan>> group_error_spans(const std::vector<ErrorRecord>& records) {
  std::map<std::string, std::vector<ErrorSpan>> out;
  for (const auto& r : records) out[r.video].push_back(r.span);
  return out;
}

std::filesystem::path feature_path(const std::filesystem::path& dir, const std::string& video) {
  return dir / (video + ".amnf");
}

std::vector<SampleRef> curate_samples(const CurationInput& in, double tau, SampleStrategy strategy) {
  std::vector<SampleRef> out;
  auto push_stream = [&](const std::string& video, const std::vector<ActionSegment>& segs, SegmentSource source,
                         auto&& keep_and_relabel) {
    for (std::size_t i = 0; i < segs.size(); ++i) {
      const std::size_t context_end = i > 0 ? segs[i - 1].ed : 0;
      ActionSegment seg = segs[i];
      if (!keep_and_relabel(seg)) continue;
      if (seg.is_background()) continue;
      out.push_back({video, seg, context_end, source});
    }
  };

  if (strategy != SampleStrategy::kPredictedOnly) {
    for (const auto& [video, segs] : in.gt)
      push_stream(video, segs, SegmentSource::kGroundTruth, [](ActionSegment&) { return true; });
  }
  if (strategy == SampleStrategy::kPredictedOnly) {
    for (const auto& [video, segs] : in.pred)
      push_stream(video, segs, SegmentSource::kPredicted, [](ActionSegment&) { return true; });
  } else if (strategy == SampleStrategy::kHybrid) {
    for (const auto& [video, segs] : in.pred) {
      auto gt_it = in.gt.find(video);
      const std::vector<ActionSegment> no_gt;
      const auto& gts = gt_it == in.gt.end() ? no_gt : gt_it->second;
      auto labels_it = in.frame_labels.find(video);
      if (labels_it == in.frame_labels.end())
        throw FormatError("no frame labels for video '" + video + "' (needed to relabel predicted segments)");
      const auto& labels = labels_it->second;
      push_stream(video, segs, SegmentSource::kPredicted, [&](ActionSegment& seg) {
        if (overlap_ratio(seg, gts) < tau) return false;
        seg.label = majority_label(seg, labels);
        return true;
      });
    }
  }
  return out;
}

void write_sample_refs(const std::filesystem::path& path, const std::vector<SampleRef>& refs) {
  auto out = open_out(path);
  for (const auto& r : refs)
    out << json{{"video", r.video},
                {"label", r.segment.label},
                {"st", r.segment.st},
                {"ed", r.segment.ed},
                {"context_ed", r.context_end},
                {"source", to_string(r.source)}}
               .dump()
        << '\n';
}

std::vector<SampleRef> read_sample_refs(const std::filesystem::path& path) {
  std::vector<SampleRef> out;
  for_each_json_line(path, [&](const json& o, std::size_t) {
    SampleRef r;
    r.video = o.at("video").get<std::string>();
    r.segment.label = o.at("label").get<ClassId>();
    r.segment.st = frame_index(o, "st");
    r.segment.ed = frame_index(o, "ed");
    r.context_end = frame_index(o, "context_ed");
    r.source = parse_segment_source(o.value("source", std::string("gt")));
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<TrainingSample> materialize_samples(const FeatureStore& store, const std::vector<SampleRef>& refs) {
  std::vector<TrainingSample> out;
  out.reserve(refs.size());
  for (const auto& r : refs) {
    auto it = store.find(r.video);
    if (it == store.end()) throw FormatError("no features for video '" + r.video + "'");
    TrainingSample s;
    s.video = it->second;
    s.context_frames = r.context_end;
    s.target_class = r.segment.label;
    s.target_feature = action_feature(*s.video, r.segment);
    if (s.context_frames > s.video->frames())
      throw InvalidSegmentError("sample context of " + std::to_string(s.context_frames) + " frames invalid for video '" +
                                r.video + "'");
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<TrainingSample> load_training_samples(const std::filesystem::path& features_dir,
                                                  const std::vector<SampleRef>& refs) {
  FeatureStore store;
  for (const auto& r : refs) {
    if (store.contains(r.video)) continue;
    store.emplace(r.video, std::make_shared<const FeatureMatrix>(load_features(feature_path(features_dir, r.video))));
  }
  return materialize_samples(store, refs);
}

}  // namespace amnar
