// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The amnar Authors

#include "cli.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "amnar/dataset.hpp"
#include "amnar/dataset_io.hpp"
#include "amnar/detector.hpp"
#include "amnar/error.hpp"
#include "amnar/evaluation.hpp"
#include "amnar/papb.hpp"
#include "amnar/parallel.hpp"
#include "amnar/rrb.hpp"
#include "amnar/synthgen.hpp"
#include "amnar/task_graph.hpp"

namespace amnar::cli {

namespace {

using nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::optional<std::uint64_t> env_seed() {
  const char* raw = std::getenv("AMNAR_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(raw, &used);
    if (used != std::string(raw).size()) throw std::invalid_argument(raw);
    return v;
  } catch (const std::exception&) {
    throw UsageError(std::string("AMNAR_SEED is not an unsigned integer: ") + raw);
  }
}

// An explicit --seed wins; otherwise AMNAR_SEED replaces the configured seed.
std::uint64_t resolve_seed(const CLI::Option* flag, std::uint64_t flag_value, std::uint64_t configured) {
  if (flag != nullptr && flag->count() > 0) return flag_value;
  if (auto s = env_seed()) return *s;
  return configured;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<ClassId>> label_sequences(const std::map<std::string, std::vector<ActionSegment>>& videos) {
  std::vector<std::vector<ClassId>> out;
  for (const auto& [id, segs] : videos) {
    std::vector<ClassId> seq;
    for (const auto& s : segs)
      if (!s.is_background()) seq.push_back(s.label);
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<VideoRecord> load_videos(const std::filesystem::path& features_dir,
                                     const std::map<std::string, std::vector<ActionSegment>>& segments) {
  std::vector<VideoRecord> out;
  for (const auto& [id, segs] : segments) {
    VideoRecord v;
    v.id = id;
    v.features = load_features(feature_path(features_dir, id));
    v.segments = segs;
    v.validate();
    out.push_back(std::move(v));
  }
  return out;
}

DetectOptions detect_options(const std::string& mode, std::uint64_t seed, bool strict_thresholds) {
  DetectOptions o;
  o.seed = seed;
  o.missing_threshold = strict_thresholds ? MissingThresholdPolicy::kError : MissingThresholdPolicy::kGlobal;
  if (mode == "full") {
    o.mode = CandidateMode::kAll;
  } else if (mode == "single") {
    o.mode = CandidateMode::kSingleRandom;
  } else if (mode == "centers") {
    o.zero_residual = true;
  } else {
    throw UsageError("unknown --mode '" + mode + "' (expected full, single or centers)");
  }
  return o;
}

struct Context {
  std::ostream& out;
  std::ostream& err;
  json resolved;

  void announce(const std::string& command) {
    resolved["command"] = command;
    err << resolved.dump() << '\n';
  }
};

SegmentSource source_flag(const std::string& s) {
  try {
    return parse_segment_source(s);
  } catch (const Error&) {
    throw UsageError("unknown --source '" + s + "' (expected gt or pred)");
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Error detection for procedural activity videos", "amnar"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  Context ctx{out, err, json::object()};
  std::function<void()> action;

  // -- build-graph ------------------------------------------------------------
  std::string segments_path, graph_path, out_path, source = "gt";
  int num_classes = 0;
  bool adjacent_only = false;
  {
    auto* c = app.add_subcommand("build-graph", "Build a task graph from action sequences");
    c->add_option("--segments", segments_path, "Segments JSONL")->required()->check(CLI::ExistingFile);
    c->add_option("--source", source, "Segment source to read (gt or pred)");
    c->add_option("--num-classes", num_classes, "Number of action classes")->required()->check(CLI::PositiveNumber);
    c->add_option("--out", out_path, "Graph JSON to write")->required();
    c->add_flag("--adjacent-only", adjacent_only, "Weight only adjacent pairs");
    c->callback([&] {
      action = [&] {
        ctx.resolved = {{"segments", segments_path}, {"source", source}, {"num_classes", num_classes},
                        {"out", out_path}, {"adjacent_only", adjacent_only}};
        ctx.announce("build-graph");
        const auto seqs = label_sequences(group_segments(read_segments(segments_path), source_flag(source)));
        write_graph(out_path, build_task_graph(seqs, num_classes, !adjacent_only));
      };
    });
  }

  // -- graph-metrics ----------------------------------------------------------
  {
    auto* c = app.add_subcommand("graph-metrics", "Non-determinism statistics of a task graph");
    c->add_option("--graph", graph_path, "Graph JSON")->required()->check(CLI::ExistingFile);
    c->add_option("--segments", segments_path, "Segments JSONL for transition statistics")
        ->required()
        ->check(CLI::ExistingFile);
    c->add_option("--source", source, "Segment source to read (gt or pred)");
    c->callback([&] {
      action = [&] {
        ctx.resolved = {{"graph", graph_path}, {"segments", segments_path}, {"source", source}};
        ctx.announce("graph-metrics");
        const auto graph = read_graph(graph_path);
        const auto seqs = label_sequences(group_segments(read_segments(segments_path), source_flag(source)));
        const auto m = graph_metrics(graph, transition_stats(seqs));
        const auto nd = non_deterministic_actions(graph);
        ctx.out << json{{"non_deterministic_ratio", m.non_deterministic_ratio},
                        {"avg_valid_next", m.avg_valid_next},
                        {"avg_max_transfer_prob", m.avg_max_transfer_prob},
                        {"non_deterministic_actions", std::vector<ClassId>(nd.begin(), nd.end())}}
                       .dump()
                << '\n';
      };
    });
  }

  // -- predict-next -----------------------------------------------------------
  std::vector<ClassId> executed;
  {
    auto* c = app.add_subcommand("predict-next", "Valid next actions after an executed sequence");
    c->add_option("--graph", graph_path, "Graph JSON")->required()->check(CLI::ExistingFile);
    c->add_option("--executed", executed, "Comma-separated executed labels")->delimiter(',');
    c->callback([&] {
      action = [&] {
        ctx.resolved = {{"graph", graph_path}, {"executed", executed}};
        ctx.announce("predict-next");
        ctx.out << json(valid_next_actions(read_graph(graph_path), executed)).dump() << '\n';
      };
    });
  }

  // -- prep -------------------------------------------------------------------
  std::string features_dir, frame_labels_path;
  double tau = 0.6;
  bool gt_only = false, pred_only = false;
  {
    auto* c = app.add_subcommand("prep", "Curate training samples");
    c->add_option("--features-dir", features_dir, "Directory of .amnf feature files")
        ->required()
        ->check(CLI::ExistingDirectory);
    c->add_option("--segments", segments_path, "Segments JSONL (gt and pred)")->required()->check(CLI::ExistingFile);
    c->add_option("--frame-labels", frame_labels_path, "Frame labels JSONL")->check(CLI::ExistingFile);
    c->add_option("--tau", tau, "Overlap threshold for predicted segments")->check(CLI::Range(0.0, 1.0));
    auto* g = c->add_flag("--gt-only", gt_only, "Use ground-truth segments only");
    auto* p = c->add_flag("--pred-only", pred_only, "Use predicted segments only, unfiltered");
    g->excludes(p);
    c->add_option("--out", out_path, "Sample list JSONL to write")->required();
    c->callback([&] {
      action = [&] {
        const auto strategy = gt_only     ? SampleStrategy::kGroundTruthOnly
                              : pred_only ? SampleStrategy::kPredictedOnly
                                          : SampleStrategy::kHybrid;
        const char* names[] = {"hybrid", "gt-only", "pred-only"};
        ctx.resolved = {{"features_dir", features_dir}, {"segments", segments_path},
                        {"frame_labels", frame_labels_path}, {"tau", tau},
                        {"strategy", names[static_cast<int>(strategy)]}, {"out", out_path}};
        ctx.announce("prep");
        if (strategy == SampleStrategy::kHybrid && frame_labels_path.empty())
          throw UsageError("hybrid curation needs --frame-labels");
        const auto records = read_segments(segments_path);
        CurationInput in;
        in.gt = group_segments(records, SegmentSource::kGroundTruth);
        in.pred = group_segments(records, SegmentSource::kPredicted);
        if (!frame_labels_path.empty()) in.frame_labels = read_frame_labels(frame_labels_path);
        const auto refs = curate_samples(in, tau, strategy);
        for (const auto& r : refs)
          if (!std::filesystem::exists(feature_path(features_dir, r.video)))
            throw Error("missing feature file " + feature_path(features_dir, r.video).string());
        write_sample_refs(out_path, refs);
        ctx.err << "prep: " << refs.size() << " samples\n";
      };
    });
  }

  // -- train ------------------------------------------------------------------
  std::string samples_path;
  TrainOptions train_opts;
  std::uint64_t seed_flag = 0;
  RRBConfig rrb;
  {
    auto* c = app.add_subcommand("train", "Train the reconstruction network");
    c->add_option("--features-dir", features_dir, "Directory of .amnf feature files")
        ->required()
        ->check(CLI::ExistingDirectory);
    c->add_option("--samples", samples_path, "Sample list from prep")->required()->check(CLI::ExistingFile);
    c->add_option("--out", out_path, "Model JSON to write")->required();
    c->add_option("--epochs", train_opts.epochs, "Training epochs")->check(CLI::PositiveNumber);
    c->add_option("--batch", train_opts.batch, "Minibatch size")->check(CLI::PositiveNumber);
    c->add_option("--lr", train_opts.lr0, "Initial learning rate")->check(CLI::PositiveNumber);
    c->add_option("--window", rrb.attn_window, "Attention window in frames")->check(CLI::PositiveNumber);
    c->add_option("--conv-layers", rrb.conv_layers, "Dilated convolution layers")->check(CLI::NonNegativeNumber);
    c->add_option("--heads", rrb.heads, "Attention heads")->check(CLI::PositiveNumber);
    auto* seed = c->add_option("--seed", seed_flag, "Random seed");
    c->callback([&, seed] {
      action = [&, seed] {
        train_opts.seed = resolve_seed(seed, seed_flag, 0);
        ctx.resolved = {{"features_dir", features_dir}, {"samples", samples_path}, {"out", out_path},
                        {"epochs", train_opts.epochs}, {"batch", train_opts.batch}, {"lr0", train_opts.lr0},
                        {"window", rrb.attn_window}, {"conv_layers", rrb.conv_layers}, {"heads", rrb.heads},
                        {"seed", train_opts.seed}};
        ctx.announce("train");
        const auto samples = load_training_samples(features_dir, read_sample_refs(samples_path));
        if (samples.empty()) throw TrainingError("no training samples in " + samples_path);
        rrb.dim = static_cast<int>(samples.front().video->dim());
        rrb.validate();
        train_opts.on_epoch = [&](int epoch, double lr, double loss) {
          if (epoch == 0 || (epoch + 1) % 10 == 0 || epoch + 1 == train_opts.epochs)
            ctx.err << "epoch " << epoch + 1 << " lr " << lr << " loss " << loss << '\n';
        };
        write_model(out_path, train(samples, rrb, train_opts).model);
      };
    });
  }

  // -- calibrate --------------------------------------------------------------
  std::string model_path, thresholds_path;
  double q = kDefaultQuantile;
  {
    auto* c = app.add_subcommand("calibrate", "Per-class thresholds from normal videos");
    c->add_option("--features-dir", features_dir, "Directory of .amnf feature files")
        ->required()
        ->check(CLI::ExistingDirectory);
    c->add_option("--segments", segments_path, "Segments JSONL of normal videos")
        ->required()
        ->check(CLI::ExistingFile);
    c->add_option("--source", source, "Segment source to read (gt or pred)");
    c->add_option("--model", model_path, "Model JSON")->required()->check(CLI::ExistingFile);
    c->add_option("--graph", graph_path, "Graph JSON")->required()->check(CLI::ExistingFile);
    c->add_option("--q", q, "Quantile of the normal distance distribution")->check(CLI::Range(0.0, 1.0));
    c->add_option("--out", out_path, "Threshold JSON to write")->required();
    c->callback([&] {
      action = [&] {
        ctx.resolved = {{"features_dir", features_dir}, {"segments", segments_path}, {"source", source},
                        {"model", model_path}, {"graph", graph_path}, {"q", q}, {"out", out_path}};
        ctx.announce("calibrate");
        if (!(q > 0.0 && q < 1.0)) throw UsageError("--q must lie strictly between 0 and 1");
        const auto videos = load_videos(features_dir, group_segments(read_segments(segments_path), source_flag(source)));
        const auto model = read_model(model_path);
        const auto graph = read_graph(graph_path);
        write_thresholds(out_path, calibrate(calibration_distances(videos, model, graph), q));
      };
    });
  }

  // -- detect -----------------------------------------------------------------
  std::string mode = "full";
  std::size_t jobs = 1;
  bool strict_thresholds = false;
  {
    auto* c = app.add_subcommand("detect", "Flag erroneous action segments");
    c->add_option("--features-dir", features_dir, "Directory of .amnf feature files")
        ->required()
        ->check(CLI::ExistingDirectory);
    c->add_option("--segments", segments_path, "Segments JSONL")->required()->check(CLI::ExistingFile);
    c->add_option("--source", source, "Segment source to read (gt or pred)");
    c->add_option("--model", model_path, "Model JSON")->required()->check(CLI::ExistingFile);
    c->add_option("--graph", graph_path, "Graph JSON")->required()->check(CLI::ExistingFile);
    c->add_option("--thresholds", thresholds_path, "Threshold JSON")->required()->check(CLI::ExistingFile);
    c->add_option("--out", out_path, "Verdicts JSONL to write")->required();
    c->add_option("--mode", mode, "full, single (one random candidate) or centers (no residual)");
    c->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    c->add_flag("--strict-thresholds", strict_thresholds, "Fail on classes without a threshold");
    auto* seed = c->add_option("--seed", seed_flag, "Random seed for --mode single");
    c->callback([&, seed] {
      action = [&, seed] {
        const auto s = resolve_seed(seed, seed_flag, 0);
        ctx.resolved = {{"features_dir", features_dir}, {"segments", segments_path}, {"source", source},
                        {"model", model_path}, {"graph", graph_path}, {"thresholds", thresholds_path},
                        {"out", out_path}, {"mode", mode}, {"jobs", jobs},
                        {"strict_thresholds", strict_thresholds}, {"seed", s}};
        ctx.announce("detect");
        const auto opts = detect_options(mode, s, strict_thresholds);
        const auto videos = load_videos(features_dir, group_segments(read_segments(segments_path), source_flag(source)));
        const auto model = read_model(model_path);
        const auto graph = read_graph(graph_path);
        const auto table = read_thresholds(thresholds_path);
        std::vector<std::vector<SegmentVerdict>> per_video(videos.size());
        parallel_for(videos.size(), jobs,
                     [&](std::size_t i) { per_video[i] = detect_video(videos[i], model, graph, table, opts); });
        std::vector<VerdictRecord> records;
        for (std::size_t i = 0; i < videos.size(); ++i)
          for (auto& v : per_video[i]) records.push_back({videos[i].id, std::move(v)});
        write_verdicts(out_path, records);
      };
    });
  }

  // -- eval -------------------------------------------------------------------
  std::string verdicts_path, errors_path, svg_path;
  bool plain = false;
  double overlap = 0.5;
  {
    auto* c = app.add_subcommand("eval", "Score verdicts against annotated error spans");
    c->add_option("--verdicts", verdicts_path, "Verdicts JSONL")->required()->check(CLI::ExistingFile);
    c->add_option("--errors", errors_path, "Error spans JSONL")->required()->check(CLI::ExistingFile);
    c->add_option("--graph", graph_path, "Graph JSON, enables the non-deterministic frame accuracy")
        ->check(CLI::ExistingFile);
    c->add_option("--out", out_path, "Report JSON to write instead of stdout");
    c->add_option("--svg", svg_path, "Timeline SVG to write");
    c->add_option("--overlap", overlap, "Covered fraction that makes a segment erroneous")
        ->check(CLI::Range(0.0, 1.0));
    c->add_flag("--plain", plain, "Report plain instead of balanced accuracy as eda");
    c->callback([&] {
      action = [&] {
        ctx.resolved = {{"verdicts", verdicts_path}, {"errors", errors_path}, {"graph", graph_path},
                        {"out", out_path}, {"svg", svg_path}, {"overlap", overlap}, {"balanced", !plain}};
        ctx.announce("eval");
        VideoVerdicts verdicts;
        for (auto& r : read_verdicts(verdicts_path)) verdicts[r.video].push_back(std::move(r.verdict));
        const auto errors = group_error_spans(read_error_spans(errors_path));
        std::optional<TaskGraph> graph;
        if (!graph_path.empty()) graph = read_graph(graph_path);
        const auto report = evaluate(verdicts, errors, graph ? &*graph : nullptr, EvalOptions{overlap, !plain});
        const auto text = report_to_json(report);
        if (out_path.empty())
          ctx.out << text << '\n';
        else
          write_text(out_path, text + '\n');
        if (!svg_path.empty()) write_text(svg_path, render_timeline_svg(verdicts, errors));
      };
    });
  }

  // -- simulate ---------------------------------------------------------------
  std::string config_path;
  {
    auto* c = app.add_subcommand("simulate", "Generate a synthetic procedural-task dataset");
    c->add_option("--config", config_path, "SynthConfig JSON; defaults when omitted")->check(CLI::ExistingFile);
    c->add_option("--out", out_path, "Output directory")->required();
    c->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    auto* seed = c->add_option("--seed", seed_flag, "Random seed");
    c->callback([&, seed] {
      action = [&, seed] {
        SynthConfig cfg = config_path.empty() ? SynthConfig{} : synth_config_from_json(read_text(config_path));
        cfg.seed = resolve_seed(seed, seed_flag, cfg.seed);
        ctx.resolved = json::parse(synth_config_to_json(cfg));
        ctx.resolved["out"] = out_path;
        ctx.resolved["jobs"] = jobs;
        ctx.announce("simulate");
        emit_dataset(generate_dataset(cfg, jobs), out_path);
      };
    });
  }

  // -- grad-check -------------------------------------------------------------
  int dim = 4, frames = 20;
  double eps = 1e-5, tolerance = 1e-4;
  {
    auto* c = app.add_subcommand("grad-check", "Compare analytic and numerical gradients");
    c->add_option("--dim", dim, "Feature dimension (even)")->check(CLI::PositiveNumber);
    c->add_option("--frames", frames, "Context length")->check(CLI::NonNegativeNumber);
    c->add_option("--window", rrb.attn_window, "Attention window")->check(CLI::PositiveNumber);
    c->add_option("--eps", eps, "Finite-difference step")->check(CLI::PositiveNumber);
    c->add_option("--tolerance", tolerance, "Largest accepted relative error")->check(CLI::PositiveNumber);
    auto* seed = c->add_option("--seed", seed_flag, "Random seed");
    c->callback([&, seed] {
      action = [&, seed] {
        const auto s = resolve_seed(seed, seed_flag, 0);
        rrb.dim = dim;
        ctx.resolved = {{"dim", dim}, {"frames", frames}, {"window", rrb.attn_window}, {"eps", eps},
                        {"tolerance", tolerance}, {"seed", s}};
        ctx.announce("grad-check");
        rrb.validate();
        RRBParams params = init_params(rrb, s);
        std::mt19937_64 rng(s + 1);
        std::normal_distribution<double> n01(0.0, 1.0);
        for (auto& t : tensors(params))
          for (Eigen::Index i = 0; i < t.size(); ++i) t.data[i] += 0.1 * n01(rng);
        Eigen::MatrixXd context(frames, dim);
        for (Eigen::Index i = 0; i < context.size(); ++i) context.data()[i] = n01(rng);
        Eigen::VectorXd center(dim), target(dim);
        for (int i = 0; i < dim; ++i) center(i) = n01(rng), target(i) = n01(rng);
        const auto r = gradient_check(rrb, params, context, center, target, eps);
        const bool pass = r.max_rel_error < tolerance;
        ctx.out << json{{"max_rel_error", r.max_rel_error}, {"worst_tensor", r.worst_tensor},
                        {"worst_index", r.worst_index}, {"checked", r.checked}, {"pass", pass}}
                       .dump()
                << '\n';
        if (!pass) throw Error("gradient check failed: " + std::to_string(r.max_rel_error));
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  try {
    if (action) action();
    return kExitOk;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomain;
  }
}

}  // namespace amnar::cli
