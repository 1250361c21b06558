// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The amnar Authors

#include "amnar/detector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "amnar/error.hpp"
#include "amnar/papb.hpp"

namespace amnar {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

MatchResult match(const Eigen::Ref<const Eigen::VectorXd>& action, const NormalSet& normals) {
  if (normals.classes.empty()) throw NoCandidateError("no normal representation to match against");
  MatchResult best{std::numeric_limits<double>::infinity(), kBackground};
  for (std::size_t i = 0; i < normals.classes.size(); ++i) {
    const double d = (normals.normals.row(static_cast<Eigen::Index>(i)).transpose() - action).norm();
    const ClassId cls = normals.classes[i];
    if (d < best.d_min || (d == best.d_min && cls < best.matched)) best = {d, cls};
  }
  return best;
}

double nearest_rank_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw UndefinedMetricError("quantile of an empty sample");
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("quantile must lie in (0,1)");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  // Tolerance keeps exact products such as 0.85 * 100 from rounding up a rank.
  auto rank = static_cast<std::size_t>(std::ceil(q * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

ThresholdTable calibrate(const std::map<ClassId, std::vector<double>>& distances, double q) {
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("quantile must lie in (0,1)");
  ThresholdTable table;
  table.q = q;
  std::vector<double> pooled;
  for (const auto& [cls, values] : distances) {
    if (values.empty()) {
      spdlog::warn("class {} has no calibration distances; no threshold recorded", cls);
      continue;
    }
    table.thresholds[cls] = nearest_rank_quantile(values, q);
    table.counts[cls] = values.size();
    pooled.insert(pooled.end(), values.begin(), values.end());
  }
  if (!pooled.empty()) table.global = nearest_rank_quantile(std::move(pooled), q);
  return table;
}

double error_score(double d_min, double theta) { return d_min / std::max(theta, 1e-12); }

std::vector<SegmentMatch> match_video(const FeatureMatrix& features, std::span<const ActionSegment> segments,
                                      const RRBModel& model, const TaskGraph& graph, const DetectOptions& options) {
  std::vector<SegmentMatch> out;
  std::vector<ClassId> executed;
  executed.reserve(segments.size());
  std::mt19937_64 rng(options.seed);
  for (std::size_t t = 0; t < segments.size(); ++t) {
    const auto& seg = segments[t];
    if (!seg.is_background()) {
      std::vector<ClassId> candidates = valid_next_actions(graph, executed);
      std::erase_if(candidates, [&](ClassId c) { return !model.centers.contains(c); });
      if (candidates.empty()) {
        spdlog::debug("no valid next action at segment {}; matching against every class", t);
        candidates = model.centers.classes();
      }
      if (options.mode == CandidateMode::kSingleRandom && candidates.size() > 1) {
        std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
        candidates = {candidates[pick(rng)]};
      }
      const std::size_t context_end = t > 0 ? segments[t - 1].ed : 0;
      NormalSet normals = reconstruct_normals(candidates, features.head(options.zero_residual ? 0 : context_end), model);
      out.push_back({seg, std::move(candidates), match(action_feature(features, seg), normals)});
    }
    executed.push_back(seg.label);
  }
  return out;
}

std::vector<SegmentVerdict> detect_video(const VideoRecord& video, const RRBModel& model, const TaskGraph& graph,
                                         const ThresholdTable& thresholds, const DetectOptions& options) {
  DetectOptions opts = options;
  opts.seed = options.seed ^ fnv1a(video.id);
  std::vector<SegmentVerdict> out;
  for (auto& m : match_video(video.features, video.segments, model, graph, opts)) {
    double theta = 0.0;
    if (auto it = thresholds.thresholds.find(m.segment.label); it != thresholds.thresholds.end()) {
      theta = it->second;
    } else if (opts.missing_threshold == MissingThresholdPolicy::kGlobal) {
      spdlog::debug("{}: no threshold for class {}; using the global threshold", video.id, m.segment.label);
      theta = thresholds.global;
    } else {
      throw MissingThresholdError(video.id + ": no threshold for action class " + std::to_string(m.segment.label));
    }
    SegmentVerdict v;
    v.segment = m.segment;
    v.d_min = m.match.d_min;
    v.matched = m.match.matched;
    v.candidates = std::move(m.candidates);
    v.is_error = flag(v.d_min, theta);
    v.score = error_score(v.d_min, theta);
    out.push_back(std::move(v));
  }
  return out;
}

std::map<ClassId, std::vector<double>> calibration_distances(std::span<const VideoRecord> videos,
                                                             const RRBModel& model, const TaskGraph& graph,
                                                             const DetectOptions& options) {
  std::map<ClassId, std::vector<double>> out;
  for (const auto& v : videos) {
    DetectOptions opts = options;
    opts.seed = options.seed ^ fnv1a(v.id);
    for (const auto& m : match_video(v.features, v.segments, model, graph, opts))
      out[m.segment.label].push_back(m.match.d_min);
  }
  return out;
}

void write_thresholds(const std::filesystem::path& path, const ThresholdTable& table) {
  nlohmann::json th = nlohmann::json::object();
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [cls, v] : table.thresholds) {
    th[std::to_string(cls)] = v;
    counts[std::to_string(cls)] = table.counts.contains(cls) ? table.counts.at(cls) : 0;
  }
  nlohmann::json o = {{"q", table.q}, {"thresholds", th}, {"counts", counts}, {"global", table.global}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << o.dump() << '\n';
}

ThresholdTable read_thresholds(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open threshold file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    const auto o = nlohmann::json::parse(ss.str());
    ThresholdTable t;
    t.q = o.at("q").get<double>();
    for (const auto& [k, v] : o.at("thresholds").items()) {
      const double theta = v.get<double>();
      if (!std::isfinite(theta) || theta < 0.0) throw FormatError("threshold for class " + k + " must be finite and >= 0");
      t.thresholds[std::stoi(k)] = theta;
    }
    if (o.contains("counts"))
      for (const auto& [k, v] : o.at("counts").items()) t.counts[std::stoi(k)] = v.get<std::size_t>();
    t.global = o.value("global", 0.0);
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_verdicts(const std::filesystem::path& path, const std::vector<VerdictRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  for (const auto& r : records) {
    const auto& v = r.verdict;
    nlohmann::json o = {{"video", r.video},          {"st", v.segment.st},     {"ed", v.segment.ed},
                        {"label", v.segment.label},  {"d_min", v.d_min},       {"matched", v.matched},
                        {"is_error", v.is_error},    {"score", v.score}};
    out << o.dump() << '\n';
  }
}

std::vector<VerdictRecord> read_verdicts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open verdict file " + path.string());
  std::vector<VerdictRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto o = nlohmann::json::parse(line);
      VerdictRecord r;
      r.video = o.at("video").get<std::string>();
      r.verdict.segment.st = o.at("st").get<std::size_t>();
      r.verdict.segment.ed = o.at("ed").get<std::size_t>();
      r.verdict.segment.label = o.at("label").get<ClassId>();
      r.verdict.d_min = o.at("d_min").get<double>();
      r.verdict.matched = o.at("matched").get<ClassId>();
      r.verdict.is_error = o.at("is_error").get<bool>();
      r.verdict.score = o.at("score").get<double>();
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace amnar
