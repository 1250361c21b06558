// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The amnar Authors

#include "amnar/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "amnar/dataset_io.hpp"
#include "amnar/error.hpp"
#include "amnar/papb.hpp"
#include "amnar/parallel.hpp"

namespace amnar {

namespace {

using Eigen::VectorXd;

constexpr std::uint64_t kTrainSplit = 1;
constexpr std::uint64_t kTestSplit = 2;
enum Purpose : std::uint64_t { kPlan = 1, kErrors = 2, kRender = 3, kAsm = 4 };

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double uniform01(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

VectorXd random_unit(std::mt19937_64& rng, int size) {
  std::normal_distribution<double> n01(0.0, 1.0);
  VectorXd v(size);
  do {
    for (int i = 0; i < size; ++i) v(i) = n01(rng);
  } while (v.norm() < 1e-12);
  return v / v.norm();
}

std::string video_id(const char* split, int i) {
  std::ostringstream os;
  os << split << '_';
  os.width(4);
  os.fill('0');
  os << i;
  return os.str();
}

std::vector<ClassId> executed_labels(const std::vector<PlannedStep>& steps) {
  std::vector<ClassId> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.label);
  return out;
}

// Action classes that are neither a valid next action nor already executed.
std::vector<ClassId> off_graph_classes(const SynthWorld& world, const std::vector<ClassId>& executed,
                                       ClassId exclude) {
  const auto valid = valid_next_actions(world.graph, executed);
  const std::set<ClassId> blocked(valid.begin(), valid.end());
  const std::set<ClassId> done(executed.begin(), executed.end());
  std::vector<ClassId> out;
  for (ClassId c = 0; c < world.graph.num_classes(); ++c)
    if (c != exclude && !blocked.contains(c) && !done.contains(c)) out.push_back(c);
  return out;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_classes < 2) throw ConfigError("n_classes must be at least 2");
  if (branching < 1.0) throw ConfigError("branching must be at least 1");
  if (branch_span < 1) throw ConfigError("branch_span must be at least 1");
  if (dim < 2 || dim % 2 != 0) throw ConfigError("dim must be even and at least 2");
  if (drift_dims < 0 || drift_dims >= dim) throw ConfigError("drift_dims must lie in [0, dim)");
  if (min_segment_frames < 1 || max_segment_frames < min_segment_frames)
    throw ConfigError("segment frame range must satisfy 1 <= min <= max");
  if (min_background_frames < 0 || max_background_frames < min_background_frames)
    throw ConfigError("background frame range must satisfy 0 <= min <= max");
  if (!(center_spacing > 0.0)) throw ConfigError("center_spacing must be positive");
  if (noise_sigma < 0.0 || drift_amplitude < 0.0 || deviation_margin < 0.0)
    throw ConfigError("noise_sigma, drift_amplitude and deviation_margin must be non-negative");
  if (n_train < 0 || n_test < 0) throw ConfigError("video counts must be non-negative");
  for (double r : {omission_rate, addition_rate, modification_rate, deviation_rate, asm_mislabel_rate})
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("rates must lie in [0,1]");
  if (omission_rate + addition_rate + modification_rate + deviation_rate > 1.0)
    throw ConfigError("error rates must sum to at most 1");
  if (asm_boundary_jitter < 0) throw ConfigError("asm_boundary_jitter must be non-negative");
}

namespace {

template <class T>
using Field = std::pair<const char*, T SynthConfig::*>;

constexpr Field<int> kIntFields[] = {
    {"n_classes", &SynthConfig::n_classes},
    {"branch_span", &SynthConfig::branch_span},
    {"dim", &SynthConfig::dim},
    {"drift_dims", &SynthConfig::drift_dims},
    {"min_segment_frames", &SynthConfig::min_segment_frames},
    {"max_segment_frames", &SynthConfig::max_segment_frames},
    {"min_background_frames", &SynthConfig::min_background_frames},
    {"max_background_frames", &SynthConfig::max_background_frames},
    {"n_train", &SynthConfig::n_train},
    {"n_test", &SynthConfig::n_test},
    {"asm_boundary_jitter", &SynthConfig::asm_boundary_jitter},
};

constexpr Field<double> kDoubleFields[] = {
    {"branching", &SynthConfig::branching},
    {"center_spacing", &SynthConfig::center_spacing},
    {"noise_sigma", &SynthConfig::noise_sigma},
    {"drift_amplitude", &SynthConfig::drift_amplitude},
    {"omission_rate", &SynthConfig::omission_rate},
    {"addition_rate", &SynthConfig::addition_rate},
    {"modification_rate", &SynthConfig::modification_rate},
    {"deviation_rate", &SynthConfig::deviation_rate},
    {"deviation_margin", &SynthConfig::deviation_margin},
    {"asm_mislabel_rate", &SynthConfig::asm_mislabel_rate},
};

}  // namespace

std::string synth_config_to_json(const SynthConfig& cfg) {
  nlohmann::json o;
  o["seed"] = cfg.seed;
  for (const auto& [name, member] : kIntFields) o[name] = cfg.*member;
  for (const auto& [name, member] : kDoubleFields) o[name] = cfg.*member;
  return o.dump(2);
}

SynthConfig synth_config_from_json(const std::string& text) {
  SynthConfig cfg;
  nlohmann::json o;
  try {
    o = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("synth config: ") + e.what());
  }
  if (!o.is_object()) throw FormatError("synth config must be a JSON object");
  for (const auto& [key, value] : o.items()) {
    try {
      if (key == "seed") {
        cfg.seed = value.get<std::uint64_t>();
        continue;
      }
      bool known = false;
      for (const auto& [name, member] : kIntFields)
        if (key == name) cfg.*member = value.get<int>(), known = true;
      for (const auto& [name, member] : kDoubleFields)
        if (key == name) cfg.*member = value.get<double>(), known = true;
      if (!known) throw FormatError("synth config: unknown field '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("synth config: field '" + key + "': " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(a * 0x100000001B3ULL + b)));
}

TaskGraph sample_graph(const SynthConfig& cfg, std::mt19937_64& rng) {
  const int n = cfg.n_classes;
  std::vector<Edge> edges{{n, 0}};
  const int whole = static_cast<int>(std::floor(cfg.branching));
  const double frac = cfg.branching - whole;
  for (int u = 0; u + 1 < n; ++u) {
    int k = whole + (uniform01(rng) < frac ? 1 : 0);
    edges.emplace_back(u, u + 1);
    std::vector<ClassId> pool;
    for (int v = u + 2; v < n && v <= u + cfg.branch_span; ++v) pool.push_back(v);
    std::shuffle(pool.begin(), pool.end(), rng);
    for (int i = 0; i < k - 1 && i < static_cast<int>(pool.size()); ++i) edges.emplace_back(u, pool[static_cast<std::size_t>(i)]);
  }
  return TaskGraph(n, std::move(edges));
}

std::map<ClassId, VectorXd> sample_centers(const SynthConfig& cfg, std::mt19937_64& rng) {
  const int active = cfg.dim - cfg.drift_dims;
  double half_width = cfg.center_spacing;
  for (;;) {
    std::map<ClassId, VectorXd> centers;
    std::uniform_real_distribution<double> coord(-half_width, half_width);
    bool ok = true;
    for (ClassId c = 0; c < cfg.n_classes && ok; ++c) {
      ok = false;
      for (int attempt = 0; attempt < 2000 && !ok; ++attempt) {
        VectorXd v = VectorXd::Zero(cfg.dim);
        for (int i = 0; i < active; ++i) v(i) = coord(rng);
        ok = std::all_of(centers.begin(), centers.end(),
                         [&](const auto& kv) { return (kv.second - v).norm() >= cfg.center_spacing; });
        if (ok) centers[c] = std::move(v);
      }
    }
    if (ok) return centers;
    half_width *= 1.25;
  }
}

SynthWorld sample_world(const SynthConfig& cfg) {
  cfg.validate();
  auto graph_rng = stream(cfg.seed, 0, 0);
  auto center_rng = stream(cfg.seed, 0, 1);
  SynthWorld w;
  w.graph = sample_graph(cfg, graph_rng);
  w.centers = sample_centers(cfg, center_rng);
  return w;
}

VideoPlan plan_normal_video(const std::string& id, const SynthWorld& world, const SynthConfig& cfg,
                            std::mt19937_64& rng) {
  VideoPlan plan;
  plan.id = id;
  plan.drift = VectorXd::Zero(cfg.dim);
  if (cfg.drift_dims > 0)
    plan.drift.tail(cfg.drift_dims) = cfg.drift_amplitude * random_unit(rng, cfg.drift_dims);
  else
    plan.drift = cfg.drift_amplitude * random_unit(rng, cfg.dim);

  if (cfg.max_background_frames > 0) {
    const int bg = uniform_int(rng, cfg.min_background_frames, cfg.max_background_frames);
    if (bg > 0) plan.steps.push_back({kBackground, static_cast<std::size_t>(bg), {}, {}});
  }
  ClassId node = world.graph.start_node();
  for (;;) {
    const auto children = world.graph.successors(node);
    if (children.empty()) break;
    node = children[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(children.size()) - 1))];
    const int len = uniform_int(rng, cfg.min_segment_frames, cfg.max_segment_frames);
    plan.steps.push_back({node, static_cast<std::size_t>(len), {}, {}});
  }
  return plan;
}

VideoPlan inject_errors(const VideoPlan& plan, const SynthWorld& world, const SynthConfig& cfg, std::mt19937_64& rng) {
  VideoPlan out;
  out.id = plan.id;
  out.drift = plan.drift;
  const auto& in = plan.steps;
  bool previous_error = false;
  for (std::size_t i = 0; i < in.size(); ++i) {
    const PlannedStep& step = in[i];
    if (step.label == kBackground || previous_error) {
      out.steps.push_back(step);
      previous_error = false;
      continue;
    }
    const double u = uniform01(rng);
    double edge = cfg.omission_rate;
    const auto executed = executed_labels(out.steps);
    if (u < edge) {
      // Omit this step, provided the following one then falls off the graph.
      if (i + 1 < in.size() && in[i + 1].label != kBackground) {
        const auto valid = valid_next_actions(world.graph, executed);
        if (std::find(valid.begin(), valid.end(), in[i + 1].label) == valid.end()) {
          PlannedStep next = in[i + 1];
          next.error_kind = "omission";
          out.steps.push_back(std::move(next));
          ++i;
          previous_error = true;
          continue;
        }
      }
      out.steps.push_back(step);
      continue;
    }
    if (u < (edge += cfg.addition_rate)) {
      const auto pool = off_graph_classes(world, executed, step.label);
      if (!pool.empty()) {
        PlannedStep extra;
        extra.label = pool[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(pool.size()) - 1))];
        extra.frames = static_cast<std::size_t>(uniform_int(rng, cfg.min_segment_frames, cfg.max_segment_frames));
        extra.error_kind = "addition";
        out.steps.push_back(std::move(extra));
      }
      out.steps.push_back(step);
      continue;
    }
    if (u < (edge += cfg.modification_rate)) {
      const auto pool = off_graph_classes(world, executed, step.label);
      PlannedStep changed = step;
      if (!pool.empty()) {
        changed.label = pool[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(pool.size()) - 1))];
        changed.error_kind = "modification";
        previous_error = true;
      }
      out.steps.push_back(std::move(changed));
      continue;
    }
    if (u < (edge += cfg.deviation_rate)) {
      PlannedStep moved = step;
      moved.displacement = VectorXd::Zero(cfg.dim);
      const int active = cfg.dim - cfg.drift_dims;
      moved.displacement.head(active) = cfg.deviation_margin * random_unit(rng, active);
      moved.error_kind = "deviation";
      out.steps.push_back(std::move(moved));
      previous_error = true;
      continue;
    }
    out.steps.push_back(step);
  }
  return out;
}

VideoRecord render_video(const VideoPlan& plan, const SynthWorld& world, const SynthConfig& cfg, std::mt19937_64& rng) {
  std::size_t total = 0;
  for (const auto& s : plan.steps) total += s.frames;
  Eigen::MatrixXd frames(static_cast<Eigen::Index>(total), cfg.dim);
  std::vector<ClassId> labels;
  labels.reserve(total);
  std::normal_distribution<double> noise(0.0, cfg.noise_sigma);

  VideoRecord v;
  v.id = plan.id;
  std::size_t t = 0;
  for (const auto& s : plan.steps) {
    VectorXd mean = plan.drift;
    if (s.label != kBackground) mean += world.centers.at(s.label);
    if (s.displacement.size() > 0) mean += s.displacement;
    for (std::size_t f = 0; f < s.frames; ++f) {
      for (int c = 0; c < cfg.dim; ++c)
        frames(static_cast<Eigen::Index>(t + f), c) = mean(c) + (cfg.noise_sigma > 0.0 ? noise(rng) : 0.0);
      labels.push_back(s.label);
    }
    v.segments.push_back({s.label, t, t + s.frames});
    if (!s.error_kind.empty()) v.error_spans.push_back({t, t + s.frames, s.error_kind});
    t += s.frames;
  }
  v.features = total == 0 ? FeatureMatrix(static_cast<std::size_t>(cfg.dim)) : FeatureMatrix(std::move(frames));
  v.frame_labels = std::move(labels);
  return v;
}

VideoRecord generate_normal_video(const std::string& id, const SynthWorld& world, const SynthConfig& cfg,
                                  std::mt19937_64& rng) {
  return render_video(plan_normal_video(id, world, cfg, rng), world, cfg, rng);
}

std::vector<ActionSegment> perturb_segments(const std::vector<ActionSegment>& gt, std::size_t frames,
                                            const SynthConfig& cfg, std::mt19937_64& rng) {
  std::vector<ActionSegment> out = gt;
  const int j = cfg.asm_boundary_jitter;
  for (std::size_t i = 0; i + 1 < out.size() && j > 0; ++i) {
    auto& a = out[i];
    auto& b = out[i + 1];
    if (a.ed != b.st) continue;
    const long lo = static_cast<long>(a.st) + 1;
    const long hi = static_cast<long>(b.ed) - 1;
    const long moved = std::clamp(static_cast<long>(a.ed) + uniform_int(rng, -j, j), lo, hi);
    a.ed = b.st = static_cast<std::size_t>(moved);
  }
  for (auto& s : out) {
    if (s.is_background() || cfg.n_classes < 2) continue;
    if (uniform01(rng) < cfg.asm_mislabel_rate) {
      const int other = uniform_int(rng, 0, cfg.n_classes - 2);
      s.label = other >= s.label ? other + 1 : other;
    }
  }
  for (const auto& s : out)
    if (s.ed > frames) throw InvalidSegmentError("perturbed segment beyond video end");
  return out;
}

SynthDataset generate_dataset(const SynthConfig& cfg, std::size_t jobs) {
  SynthDataset d;
  d.config = cfg;
  d.world = sample_world(cfg);
  d.train.resize(static_cast<std::size_t>(cfg.n_train));
  d.test.resize(static_cast<std::size_t>(cfg.n_test));
  std::vector<std::vector<ActionSegment>> train_pred(d.train.size()), test_pred(d.test.size());

  parallel_for(d.train.size(), jobs, [&](std::size_t i) {
    auto plan_rng = stream(cfg.seed, kTrainSplit << 32 | i, kPlan);
    auto render_rng = stream(cfg.seed, kTrainSplit << 32 | i, kRender);
    auto asm_rng = stream(cfg.seed, kTrainSplit << 32 | i, kAsm);
    const auto plan = plan_normal_video(video_id("train", static_cast<int>(i)), d.world, cfg, plan_rng);
    d.train[i] = render_video(plan, d.world, cfg, render_rng);
    train_pred[i] = perturb_segments(d.train[i].segments, d.train[i].features.frames(), cfg, asm_rng);
  });
  parallel_for(d.test.size(), jobs, [&](std::size_t i) {
    auto plan_rng = stream(cfg.seed, kTestSplit << 32 | i, kPlan);
    auto error_rng = stream(cfg.seed, kTestSplit << 32 | i, kErrors);
    auto render_rng = stream(cfg.seed, kTestSplit << 32 | i, kRender);
    auto asm_rng = stream(cfg.seed, kTestSplit << 32 | i, kAsm);
    const auto normal = plan_normal_video(video_id("test", static_cast<int>(i)), d.world, cfg, plan_rng);
    const auto plan = inject_errors(normal, d.world, cfg, error_rng);
    d.test[i] = render_video(plan, d.world, cfg, render_rng);
    test_pred[i] = perturb_segments(d.test[i].segments, d.test[i].features.frames(), cfg, asm_rng);
  });
  for (std::size_t i = 0; i < d.train.size(); ++i) d.predicted[d.train[i].id] = std::move(train_pred[i]);
  for (std::size_t i = 0; i < d.test.size(); ++i) d.predicted[d.test[i].id] = std::move(test_pred[i]);
  return d;
}

namespace {

void emit_split(const std::vector<VideoRecord>& videos, const SynthDataset& data, const std::filesystem::path& dir,
                const std::string& split) {
  std::vector<SegmentRecord> segs;
  std::map<std::string, std::vector<ClassId>> labels;
  for (const auto& v : videos) {
    write_features(feature_path(dir / "features", v.id), v.features);
    for (const auto& s : v.segments) segs.push_back({v.id, s, SegmentSource::kGroundTruth});
    for (const auto& s : data.predicted.at(v.id)) segs.push_back({v.id, s, SegmentSource::kPredicted});
    labels[v.id] = v.frame_labels.value_or(std::vector<ClassId>{});
  }
  write_segments(dir / (split + "_segments.jsonl"), segs);
  write_frame_labels(dir / (split + "_frame_labels.jsonl"), labels);
}

std::vector<VideoRecord> load_split(const std::filesystem::path& dir, const std::string& split,
                                    std::map<std::string, std::vector<ActionSegment>>& predicted) {
  const auto records = read_segments(dir / (split + "_segments.jsonl"));
  const auto gt = group_segments(records, SegmentSource::kGroundTruth);
  for (auto& [video, segs] : group_segments(records, SegmentSource::kPredicted)) predicted[video] = std::move(segs);
  const auto labels = read_frame_labels(dir / (split + "_frame_labels.jsonl"));
  std::vector<VideoRecord> out;
  for (const auto& [video, segs] : gt) {
    VideoRecord v;
    v.id = video;
    v.features = load_features(feature_path(dir / "features", video));
    v.segments = segs;
    if (auto it = labels.find(video); it != labels.end()) v.frame_labels = it->second;
    v.validate();
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace

void emit_dataset(const SynthDataset& data, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "features", ec);
  if (ec) throw Error("cannot create " + (out_dir / "features").string() + ": " + ec.message());
  write_graph(out_dir / "graph.json", data.world.graph);
  {
    std::ofstream cfg(out_dir / "config.json", std::ios::trunc);
    if (!cfg) throw Error("cannot open " + (out_dir / "config.json").string() + " for writing");
    cfg << synth_config_to_json(data.config) << '\n';
  }
  emit_split(data.train, data, out_dir, "train");
  emit_split(data.test, data, out_dir, "test");
  std::vector<ErrorRecord> errors;
  for (const auto& v : data.test)
    for (const auto& s : v.error_spans) errors.push_back({v.id, s});
  write_error_spans(out_dir / "test_errors.jsonl", errors);
}

SynthDataset load_dataset(const std::filesystem::path& dir) {
  SynthDataset d;
  {
    std::ifstream in(dir / "config.json");
    if (!in) throw Error("cannot open " + (dir / "config.json").string());
    std::stringstream ss;
    ss << in.rdbuf();
    d.config = synth_config_from_json(ss.str());
  }
  d.world.graph = read_graph(dir / "graph.json");
  d.train = load_split(dir, "train", d.predicted);
  d.test = load_split(dir, "test", d.predicted);
  const auto errors = group_error_spans(read_error_spans(dir / "test_errors.jsonl"));
  for (auto& v : d.test)
    if (auto it = errors.find(v.id); it != errors.end()) v.error_spans = it->second;
  return d;
}

}  // namespace amnar
