// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The amnar Authors

#include "amnar/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "amnar/error.hpp"

namespace amnar {

namespace {

constexpr char kMagic[4] = {'A', 'M', 'N', 'F'};
constexpr std::uint16_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 2 + 4 + 4;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[off + i]) << (8 * i);
  return v;
}

std::size_t intersection(const ActionSegment& a, const ActionSegment& b) {
  const std::size_t lo = std::max(a.st, b.st);
  const std::size_t hi = std::min(a.ed, b.ed);
  return hi > lo ? hi - lo : 0;
}

}  // namespace

FeatureMatrix::FeatureMatrix(std::size_t dim) : values_(0, static_cast<Eigen::Index>(dim)), dim_(dim) {
  if (dim == 0) throw FormatError("feature dimension must be at least 1");
}

FeatureMatrix::FeatureMatrix(Eigen::MatrixXd values) : values_(std::move(values)) {
  dim_ = static_cast<std::size_t>(values_.cols());
  if (dim_ == 0) throw FormatError("feature dimension must be at least 1");
  if (!values_.allFinite()) throw FormatError("feature matrix contains a non-finite value");
}

Eigen::Block<const Eigen::MatrixXd> FeatureMatrix::head(std::size_t n) const {
  if (n > frames()) throw InvalidSegmentError("context of " + std::to_string(n) + " frames exceeds video length " + std::to_string(frames()));
  return values_.topRows(static_cast<Eigen::Index>(n));
}

void VideoRecord::validate() const {
  const std::size_t n = features.frames();
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    if (s.st >= s.ed || s.ed > n)
      throw InvalidSegmentError(id + ": segment " + std::to_string(i) + " [" + std::to_string(s.st) + "," +
                                std::to_string(s.ed) + ") outside video of " + std::to_string(n) + " frames");
    if (i > 0 && segments[i - 1].ed > s.st)
      throw InvalidSegmentError(id + ": segments " + std::to_string(i - 1) + " and " + std::to_string(i) +
                                " overlap or are unsorted");
  }
  if (frame_labels && frame_labels->size() != n)
    throw FormatError(id + ": frame_labels has " + std::to_string(frame_labels->size()) + " entries, expected " +
                      std::to_string(n));
}

const Eigen::VectorXd& ClusterCenters::at(ClassId cls) const {
  auto it = centers.find(cls);
  if (it == centers.end()) throw MissingCenterError(cls);
  return it->second;
}

std::vector<ClassId> ClusterCenters::classes() const {
  std::vector<ClassId> out;
  out.reserve(centers.size());
  for (const auto& [cls, _] : centers) out.push_back(cls);
  return out;
}

std::vector<std::uint8_t> encode_features(const FeatureMatrix& m) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + 4 * m.frames() * m.dim());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u16(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(m.frames()));
  put_u32(out, static_cast<std::uint32_t>(m.dim()));
  const auto& v = m.values();
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      const auto f = static_cast<float>(v(r, c));
      if (!std::isfinite(f))
        throw FormatError("value at frame " + std::to_string(r) + ", channel " + std::to_string(c) +
                          " does not fit a 32-bit float");
      put_u32(out, std::bit_cast<std::uint32_t>(f));
    }
  }
  return out;
}

FeatureMatrix decode_features(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes)
    throw FormatError("truncated header at byte offset " + std::to_string(bytes.size()));
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad magic at byte offset 0");
  const auto version = static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
  if (version != kVersion)
    throw FormatError("unsupported version " + std::to_string(version) + " at byte offset 4");
  const std::size_t n = get_u32(bytes, 6);
  const std::size_t d = get_u32(bytes, 10);
  if (d == 0) throw FormatError("zero feature dimension at byte offset 10");
  const std::size_t expected = kHeaderBytes + 4 * n * d;
  if (bytes.size() < expected)
    throw FormatError("truncated payload at byte offset " + std::to_string(bytes.size()) + " (expected " +
                      std::to_string(expected) + " bytes)");
  if (bytes.size() > expected)
    throw FormatError("trailing data at byte offset " + std::to_string(expected));

  Eigen::MatrixXd values(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::size_t off = kHeaderBytes;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c, off += 4) {
      const float f = std::bit_cast<float>(get_u32(bytes, off));
      if (!std::isfinite(f)) throw FormatError("non-finite value at byte offset " + std::to_string(off));
      values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = f;
    }
  }
  if (n == 0) return FeatureMatrix(d);
  return FeatureMatrix(std::move(values));
}

void write_features(const std::filesystem::path& path, const FeatureMatrix& m) {
  const auto bytes = encode_features(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

FeatureMatrix load_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open feature file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_features(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Eigen::VectorXd action_feature(const FeatureMatrix& features, const ActionSegment& seg) {
  if (seg.st >= seg.ed) throw InvalidSegmentError("empty segment [" + std::to_string(seg.st) + "," + std::to_string(seg.ed) + ")");
  if (seg.ed > features.frames())
    throw InvalidSegmentError("segment end " + std::to_string(seg.ed) + " beyond " + std::to_string(features.frames()) + " frames");
  const auto rows = features.values().middleRows(static_cast<Eigen::Index>(seg.st), static_cast<Eigen::Index>(seg.length()));
  return rows.colwise().mean().transpose();
}

double overlap_ratio(const ActionSegment& pred, std::span<const ActionSegment> gt) {
  if (pred.length() == 0) throw InvalidSegmentError("overlap ratio of an empty segment");
  std::size_t best = 0;
  for (const auto& g : gt) best = std::max(best, intersection(pred, g));
  return static_cast<double>(best) / static_cast<double>(pred.length());
}

std::vector<ActionSegment> filter_segments(std::span<const ActionSegment> preds,
                                           std::span<const ActionSegment> gts, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("overlap threshold must lie in [0,1]");
  std::vector<ActionSegment> kept;
  for (const auto& p : preds)
    if (overlap_ratio(p, gts) >= tau) kept.push_back(p);
  return kept;
}

ClassId majority_label(const ActionSegment& seg, std::span<const ClassId> frame_labels) {
  if (seg.st >= seg.ed) throw InvalidSegmentError("majority label of an empty segment");
  if (seg.ed > frame_labels.size()) throw InvalidSegmentError("segment exceeds frame label sequence");
  std::map<ClassId, std::size_t> counts;
  for (std::size_t i = seg.st; i < seg.ed; ++i) ++counts[frame_labels[i]];
  // std::map iterates ascending, so strict > keeps the smallest id on ties.
  ClassId best = counts.begin()->first;
  std::size_t best_count = 0;
  for (const auto& [cls, n] : counts) {
    if (n > best_count) {
      best = cls;
      best_count = n;
    }
  }
  return best;
}

ClusterCenters cluster_centers(std::span<const std::pair<ClassId, Eigen::VectorXd>> samples) {
  ClusterCenters out;
  for (const auto& [cls, v] : samples) {
    if (cls == kBackground) continue;
    auto [it, inserted] = out.centers.try_emplace(cls, Eigen::VectorXd::Zero(v.size()));
    if (it->second.size() != v.size()) throw FormatError("cluster sample dimension mismatch for class " + std::to_string(cls));
    it->second += v;
    ++out.counts[cls];
  }
  for (auto& [cls, c] : out.centers) c /= static_cast<double>(out.counts[cls]);
  return out;
}

}  // namespace amnar
