// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The amnar Authors

#include "amnar/evaluation.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "amnar/error.hpp"

namespace amnar {

namespace {

const std::vector<ErrorSpan>& spans_of(const VideoErrors& errors, const std::string& video) {
  static const std::vector<ErrorSpan> kNone;
  auto it = errors.find(video);
  return it == errors.end() ? kNone : it->second;
}

// Number of frames of [st, ed) covered by the union of the spans.
std::size_t covered_frames(std::size_t st, std::size_t ed, std::span<const ErrorSpan> spans) {
  std::vector<std::pair<std::size_t, std::size_t>> clipped;
  for (const auto& s : spans) {
    const std::size_t lo = std::max(st, s.st), hi = std::min(ed, s.ed);
    if (hi > lo) clipped.emplace_back(lo, hi);
  }
  std::sort(clipped.begin(), clipped.end());
  std::size_t total = 0, reach = st;
  for (const auto& [lo, hi] : clipped) {
    const std::size_t from = std::max(lo, reach);
    if (hi > from) total += hi - from;
    reach = std::max(reach, hi);
  }
  return total;
}

bool frame_in_spans(std::size_t f, std::span<const ErrorSpan> spans) {
  return std::any_of(spans.begin(), spans.end(), [f](const ErrorSpan& s) { return f >= s.st && f < s.ed; });
}

}  // namespace

bool segment_is_erroneous(const ActionSegment& seg, std::span<const ErrorSpan> spans, double min_overlap) {
  if (seg.length() == 0) return false;
  const double frac = static_cast<double>(covered_frames(seg.st, seg.ed, spans)) / static_cast<double>(seg.length());
  return frac > min_overlap;
}

double eda(std::span<const Decision> decisions, bool balanced) {
  if (decisions.empty()) throw UndefinedMetricError("error detection accuracy of zero segments");
  std::size_t pos = 0, neg = 0, tp = 0, tn = 0;
  for (const auto& d : decisions) {
    if (d.actual_error) {
      ++pos;
      tp += d.predicted_error ? 1 : 0;
    } else {
      ++neg;
      tn += d.predicted_error ? 0 : 1;
    }
  }
  if (!balanced) return static_cast<double>(tp + tn) / static_cast<double>(decisions.size());
  if (pos == 0) return static_cast<double>(tn) / static_cast<double>(neg);
  if (neg == 0) return static_cast<double>(tp) / static_cast<double>(pos);
  return 0.5 * (static_cast<double>(tp) / static_cast<double>(pos) + static_cast<double>(tn) / static_cast<double>(neg));
}

double roc_auc(std::span<const double> scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw UndefinedMetricError("scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the mid-rank (1-based) keeps tie ranks integral.
  std::vector<double> rank2(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    for (std::size_t k = i; k < j; ++k) rank2[order[k]] = static_cast<double>(i + 1 + j);
    i = j;
  }
  double pos = 0, neg = 0, rank_sum2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i]) {
      ++pos;
      rank_sum2 += rank2[i];
    } else {
      ++neg;
    }
  }
  if (pos == 0 || neg == 0) throw UndefinedMetricError("AUC needs both positive and negative examples");
  const double u = 0.5 * rank_sum2 - pos * (pos + 1) / 2.0;
  return u / (pos * neg);
}

std::vector<Decision> align_decisions(const VideoVerdicts& verdicts, const VideoErrors& errors, double error_overlap) {
  std::vector<Decision> out;
  for (const auto& [video, list] : verdicts) {
    const auto& spans = spans_of(errors, video);
    for (const auto& v : list) out.push_back({v.is_error, segment_is_erroneous(v.segment, spans, error_overlap)});
  }
  return out;
}

double nondet_frame_accuracy(const VideoVerdicts& verdicts, const VideoErrors& errors, const TaskGraph& graph) {
  const auto nondet = non_deterministic_actions(graph);
  std::size_t frames = 0, correct = 0;
  for (const auto& [video, list] : verdicts) {
    const auto& spans = spans_of(errors, video);
    for (const auto& v : list) {
      if (!nondet.contains(v.segment.label)) continue;
      for (std::size_t f = v.segment.st; f < v.segment.ed; ++f) {
        ++frames;
        if (frame_in_spans(f, spans) == v.is_error) ++correct;
      }
    }
  }
  if (frames == 0) throw UndefinedMetricError("no frames of non-deterministic actions");
  return static_cast<double>(correct) / static_cast<double>(frames);
}

EvalReport evaluate(const VideoVerdicts& verdicts, const VideoErrors& errors, const TaskGraph* graph,
                    const EvalOptions& options) {
  EvalReport r;
  const auto decisions = align_decisions(verdicts, errors, options.error_overlap);
  r.eda_plain = eda(decisions, false);
  r.eda_balanced = eda(decisions, true);
  r.eda = options.balanced ? r.eda_balanced : r.eda_plain;

  std::vector<double> scores;
  std::vector<bool> labels;
  std::size_t k = 0;
  for (const auto& [video, list] : verdicts) {
    auto& b = r.per_video[video];
    for (const auto& v : list) {
      const auto& d = decisions[k++];
      ++b.segments;
      b.error_segments += d.actual_error ? 1 : 0;
      b.correct += d.actual_error == d.predicted_error ? 1 : 0;
      scores.push_back(v.score);
      labels.push_back(d.actual_error);
    }
  }
  for (const auto& d : decisions) (d.actual_error ? r.error_segments : r.normal_segments)++;
  if (r.error_segments > 0 && r.normal_segments > 0) {
    r.auc = roc_auc(scores, labels);
  }
  if (graph) {
    try {
      r.nondet_frame_acc = nondet_frame_accuracy(verdicts, errors, *graph);
    } catch (const UndefinedMetricError&) {
      r.nondet_frame_acc.reset();
    }
  }
  return r;
}

std::string report_to_json(const EvalReport& r) {
  nlohmann::json per_video = nlohmann::json::object();
  for (const auto& [video, b] : r.per_video)
    per_video[video] = {{"segments", b.segments},
                        {"error_segments", b.error_segments},
                        {"accuracy", b.segments ? static_cast<double>(b.correct) / static_cast<double>(b.segments) : 0.0}};
  nlohmann::json o = {{"eda", r.eda},
                      {"eda_balanced", r.eda_balanced},
                      {"eda_plain", r.eda_plain},
                      {"auc", r.auc ? nlohmann::json(*r.auc) : nlohmann::json(nullptr)},
                      {"nondet_frame_acc", r.nondet_frame_acc ? nlohmann::json(*r.nondet_frame_acc) : nlohmann::json(nullptr)},
                      {"error_segments", r.error_segments},
                      {"normal_segments", r.normal_segments},
                      {"per_video", per_video}};
  return o.dump(2);
}

std::string render_timeline_svg(const VideoVerdicts& verdicts, const VideoErrors& errors) {
  constexpr double kWidth = 800.0, kRow = 28.0, kLabel = 120.0;
  std::ostringstream svg;
  const double height = kRow * static_cast<double>(verdicts.size()) + 10.0;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth + kLabel << "\" height=\"" << height << "\">\n";
  double y = 5.0;
  for (const auto& [video, list] : verdicts) {
    std::size_t frames = 1;
    for (const auto& v : list) frames = std::max(frames, v.segment.ed);
    for (const auto& s : spans_of(errors, video)) frames = std::max(frames, s.ed);
    const double scale = kWidth / static_cast<double>(frames);
    svg << "  <text x=\"2\" y=\"" << y + 16 << "\" font-size=\"11\">" << video << "</text>\n";
    for (const auto& s : spans_of(errors, video))
      svg << "  <rect x=\"" << kLabel + scale * static_cast<double>(s.st) << "\" y=\"" << y << "\" width=\""
          << scale * static_cast<double>(s.ed - s.st) << "\" height=\"8\" fill=\"#d62728\"><title>" << s.kind
          << "</title></rect>\n";
    for (const auto& v : list)
      svg << "  <rect x=\"" << kLabel + scale * static_cast<double>(v.segment.st) << "\" y=\"" << y + 10
          << "\" width=\"" << scale * static_cast<double>(v.segment.length()) << "\" height=\"12\" fill=\""
          << (v.is_error ? "#ff7f0e" : "#2ca02c") << "\" stroke=\"white\"><title>label " << v.segment.label
          << " d_min " << v.d_min << "</title></rect>\n";
    y += kRow;
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace amnar
