// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The amnar Authors

#include "amnar/rrb.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "amnar/error.hpp"

namespace amnar {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Index idx(int v) { return static_cast<Index>(v); }

// rows t of `out` receive depthwise taps over `in`: out[t] += taps[k] * in[t - (P-1-k)]
MatrixXd depthwise_causal(const MatrixXd& in, const MatrixXd& taps, const VectorXd& bias) {
  const Index n = in.rows();
  const Index p = taps.rows();
  MatrixXd out = bias.transpose().replicate(n, 1);
  for (Index k = 0; k < p; ++k) {
    const Index shift = p - 1 - k;
    if (shift >= n) continue;
    out.bottomRows(n - shift).array() += in.topRows(n - shift).array().rowwise() * taps.row(k).array();
  }
  return out;
}

void depthwise_causal_backward(const MatrixXd& in, const MatrixXd& taps, const MatrixXd& d_out, MatrixXd& d_taps,
                               VectorXd& d_bias, MatrixXd& d_in) {
  const Index n = in.rows();
  const Index p = taps.rows();
  d_bias += d_out.colwise().sum().transpose();
  for (Index k = 0; k < p; ++k) {
    const Index shift = p - 1 - k;
    if (shift >= n) continue;
    d_taps.row(k) += (d_out.bottomRows(n - shift).array() * in.topRows(n - shift).array()).colwise().sum().matrix();
    d_in.topRows(n - shift).array() += d_out.bottomRows(n - shift).array().rowwise() * taps.row(k).array();
  }
}

void softmax_rows(MatrixXd& s) {
  for (Index r = 0; r < s.rows(); ++r) {
    const double m = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - m).exp().matrix();
    s.row(r) /= s.row(r).sum();
  }
}

// Gradient of the attention block w.r.t. its parameters and its attended
// sequence, given d(residual).
MatrixXd attention_backward(const MatrixXd& queries_raw, const RRBConfig& config, const RRBParams& params,
                            const AttentionCache& c, const MatrixXd& d_res, RRBParams& g, Index seq_rows) {
  const Index dh = idx(config.head_dim());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  g.out_weight += d_res.transpose() * c.projected;
  g.out_bias += d_res.colwise().sum().transpose();
  const MatrixXd d_proj = d_res * params.out_weight;

  MatrixXd d_q = MatrixXd::Zero(c.queries.rows(), c.queries.cols());
  MatrixXd d_k = MatrixXd::Zero(c.keys.rows(), c.keys.cols());
  MatrixXd d_v = MatrixXd::Zero(c.values.rows(), c.values.cols());
  for (int h = 0; h < config.heads; ++h) {
    const Index off = h * dh;
    const auto& a = c.weights[static_cast<std::size_t>(h)];
    const MatrixXd dz = d_proj.middleCols(off, dh);
    const MatrixXd o = c.head_out.middleCols(off, dh);
    g.head_proj[static_cast<std::size_t>(h)] += dz.transpose() * o;
    g.head_bias[static_cast<std::size_t>(h)] += dz.colwise().sum().transpose();
    const MatrixXd d_o = dz * params.head_proj[static_cast<std::size_t>(h)];

    const MatrixXd d_a = d_o * c.values.middleCols(off, dh).transpose();
    d_v.middleCols(off, dh) += a.transpose() * d_o;
    const VectorXd row_dot = (a.array() * d_a.array()).rowwise().sum();
    const MatrixXd d_s = (a.array() * (d_a.colwise() - row_dot).array()).matrix();
    d_q.middleCols(off, dh) += scale * d_s * c.keys.middleCols(off, dh);
    d_k.middleCols(off, dh) += scale * d_s.transpose() * c.queries.middleCols(off, dh);
  }
  g.query_scale += (d_q.array() * queries_raw.array()).colwise().sum().transpose().matrix();
  g.query_bias += d_q.colwise().sum().transpose();

  MatrixXd d_window = MatrixXd::Zero(c.window.rows(), c.window.cols());
  VectorXd unused_key_bias = VectorXd::Zero(d_k.cols());
  depthwise_causal_backward(c.window, params.key_taps, d_k, g.key_taps, unused_key_bias, d_window);
  depthwise_causal_backward(c.window, params.value_taps, d_v, g.value_taps, g.value_bias, d_window);

  MatrixXd d_seq = MatrixXd::Zero(seq_rows, c.window.cols());
  d_seq.bottomRows(c.window.rows()) = d_window;
  return d_seq;
}

void conv_backward(const RRBConfig& config, const RRBParams& params, const ConvCache& cache, MatrixXd d_out,
                   RRBParams& g) {
  const Index t = d_out.rows();
  for (int l = config.conv_layers - 1; l >= 0; --l) {
    const auto ul = static_cast<std::size_t>(l);
    const MatrixXd& x = cache.inputs[ul];
    const MatrixXd d_pre = (d_out.array() * (cache.pre[ul].array() > 0.0).cast<double>()).matrix();
    g.conv[ul].bias += d_pre.colwise().sum().transpose();
    const bool need_input_grad = l > 0;
    for (int k = 0; k < config.kernel; ++k) {
      const Index shift = idx((config.kernel - 1 - k) * config.dilation(l));
      if (shift >= t) continue;
      const auto& w = params.conv[ul].taps[static_cast<std::size_t>(k)];
      g.conv[ul].taps[static_cast<std::size_t>(k)] += d_pre.bottomRows(t - shift).transpose() * x.topRows(t - shift);
      if (need_input_grad) d_out.topRows(t - shift) += d_pre.bottomRows(t - shift) * w;
    }
  }
}

nlohmann::json matrix_to_json(const MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

void RRBConfig::validate() const {
  if (dim < 1) throw ConfigError("dim must be positive");
  if (heads < 1) throw ConfigError("heads must be positive");
  if (dim % heads != 0)
    throw ConfigError("dim " + std::to_string(dim) + " is not divisible across " + std::to_string(heads) + " heads");
  if (conv_layers < 0 || kernel < 1 || dilation_base < 1 || proj_kernel < 1)
    throw ConfigError("conv_layers, kernel, dilation_base and proj_kernel must be positive");
  if (attn_window < 1) throw ConfigError("attention window must be at least 1");
}

int RRBConfig::dilation(int layer) const {
  int d = 1;
  for (int i = 0; i < layer; ++i) d *= dilation_base;
  return d;
}

RRBParams RRBParams::zeros(const RRBConfig& config) {
  config.validate();
  const Index d = idx(config.dim);
  const Index dh = idx(config.head_dim());
  RRBParams p;
  p.conv.resize(static_cast<std::size_t>(config.conv_layers));
  for (auto& layer : p.conv) {
    layer.taps.assign(static_cast<std::size_t>(config.kernel), MatrixXd::Zero(d, d));
    layer.bias = VectorXd::Zero(d);
  }
  p.query_scale = VectorXd::Zero(d);
  p.query_bias = VectorXd::Zero(d);
  p.key_taps = MatrixXd::Zero(idx(config.proj_kernel), d);
  p.value_taps = MatrixXd::Zero(idx(config.proj_kernel), d);
  p.value_bias = VectorXd::Zero(d);
  p.head_proj.assign(static_cast<std::size_t>(config.heads), MatrixXd::Zero(dh, dh));
  p.head_bias.assign(static_cast<std::size_t>(config.heads), VectorXd::Zero(dh));
  p.out_weight = MatrixXd::Zero(d, d);
  p.out_bias = VectorXd::Zero(d);
  return p;
}

std::vector<TensorView> tensors(RRBParams& p) {
  std::vector<TensorView> out;
  auto add_m = [&](std::string name, MatrixXd& m) { out.push_back({std::move(name), m.data(), m.rows(), m.cols()}); };
  auto add_v = [&](std::string name, VectorXd& v) { out.push_back({std::move(name), v.data(), v.size(), 1}); };
  for (std::size_t l = 0; l < p.conv.size(); ++l) {
    for (std::size_t k = 0; k < p.conv[l].taps.size(); ++k)
      add_m("conv." + std::to_string(l) + ".tap." + std::to_string(k), p.conv[l].taps[k]);
    add_v("conv." + std::to_string(l) + ".bias", p.conv[l].bias);
  }
  add_v("attn.query_scale", p.query_scale);
  add_v("attn.query_bias", p.query_bias);
  add_m("attn.key_taps", p.key_taps);
  add_m("attn.value_taps", p.value_taps);
  add_v("attn.value_bias", p.value_bias);
  for (std::size_t h = 0; h < p.head_proj.size(); ++h) {
    add_m("attn.head." + std::to_string(h) + ".proj", p.head_proj[h]);
    add_v("attn.head." + std::to_string(h) + ".bias", p.head_bias[h]);
  }
  add_m("out.weight", p.out_weight);
  add_v("out.bias", p.out_bias);
  return out;
}

std::size_t parameter_count(const RRBParams& params) {
  auto copy = params;
  std::size_t n = 0;
  for (const auto& t : tensors(copy)) n += static_cast<std::size_t>(t.size());
  return n;
}

RRBParams init_params(const RRBConfig& config, std::uint64_t seed) {
  RRBParams p = RRBParams::zeros(config);
  std::mt19937_64 rng(seed);
  const double conv_std = 0.5 / std::sqrt(static_cast<double>(config.kernel * config.dim));
  std::normal_distribution<double> conv_init(0.0, conv_std);
  std::normal_distribution<double> jitter(0.0, 0.05);
  auto fill = [&](auto& m, auto& dist) {
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  };
  for (auto& layer : p.conv)
    for (auto& w : layer.taps) fill(w, conv_init);
  fill(p.query_scale, jitter);
  p.query_scale.array() += 1.0;
  fill(p.key_taps, jitter);
  p.key_taps.row(p.key_taps.rows() - 1).array() += 1.0;
  fill(p.value_taps, jitter);
  p.value_taps.row(p.value_taps.rows() - 1).array() += 1.0;
  for (auto& m : p.head_proj) {
    fill(m, jitter);
    m += MatrixXd::Identity(m.rows(), m.cols());
  }
  // out_weight / out_bias stay zero: an untrained model reproduces the centers.
  return p;
}

MatrixXd causal_dilated_conv(const Eigen::Ref<const MatrixXd>& context, const RRBConfig& config,
                             const RRBParams& params, ConvCache* cache) {
  MatrixXd x = context;
  const Index t = x.rows();
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  for (int l = 0; l < config.conv_layers; ++l) {
    const auto& layer = params.conv[static_cast<std::size_t>(l)];
    MatrixXd pre = layer.bias.transpose().replicate(t, 1);
    for (int k = 0; k < config.kernel; ++k) {
      const Index shift = idx((config.kernel - 1 - k) * config.dilation(l));
      if (shift >= t) continue;
      pre.bottomRows(t - shift).noalias() +=
          x.topRows(t - shift) * layer.taps[static_cast<std::size_t>(k)].transpose();
    }
    MatrixXd y = x + pre.cwiseMax(0.0);
    if (cache) {
      cache->inputs.push_back(std::move(x));
      cache->pre.push_back(std::move(pre));
    }
    x = std::move(y);
  }
  return x;
}

MatrixXd local_cross_attention(const Eigen::Ref<const MatrixXd>& queries, const Eigen::Ref<const MatrixXd>& sequence,
                               const RRBConfig& config, const RRBParams& params, AttentionCache* cache) {
  AttentionCache local;
  AttentionCache& c = cache ? *cache : local;
  const Index n = std::min<Index>(idx(config.attn_window), sequence.rows());
  const Index dh = idx(config.head_dim());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  c.window = sequence.bottomRows(n);
  c.keys = depthwise_causal(c.window, params.key_taps, VectorXd::Zero(c.window.cols()));
  c.values = depthwise_causal(c.window, params.value_taps, params.value_bias);
  c.queries = (queries.array().rowwise() * params.query_scale.transpose().array()).rowwise() +
              params.query_bias.transpose().array();
  c.weights.resize(static_cast<std::size_t>(config.heads));
  c.head_out.resize(queries.rows(), queries.cols());
  c.projected.resize(queries.rows(), queries.cols());
  for (int h = 0; h < config.heads; ++h) {
    const Index off = h * dh;
    auto& a = c.weights[static_cast<std::size_t>(h)];
    a = scale * c.queries.middleCols(off, dh) * c.keys.middleCols(off, dh).transpose();
    softmax_rows(a);
    c.head_out.middleCols(off, dh) = a * c.values.middleCols(off, dh);
    c.projected.middleCols(off, dh) =
        (c.head_out.middleCols(off, dh) * params.head_proj[static_cast<std::size_t>(h)].transpose()).rowwise() +
        params.head_bias[static_cast<std::size_t>(h)].transpose();
  }
  return (c.projected * params.out_weight.transpose()).rowwise() + params.out_bias.transpose();
}

MatrixXd predict_residuals(const Eigen::Ref<const MatrixXd>& queries, const Eigen::Ref<const MatrixXd>& context,
                           const RRBConfig& config, const RRBParams& params) {
  if (context.rows() == 0) return MatrixXd::Zero(queries.rows(), queries.cols());
  const MatrixXd conv = causal_dilated_conv(context, config, params);
  // One query at a time, so a candidate's residual does not depend on the
  // other candidates it is batched with (not even in the last bit).
  MatrixXd out(queries.rows(), queries.cols());
  for (Index i = 0; i < queries.rows(); ++i) out.row(i) = local_cross_attention(queries.row(i), conv, config, params);
  return out;
}

NormalSet reconstruct_normals(std::span<const ClassId> candidates, const Eigen::Ref<const MatrixXd>& context,
                              const RRBModel& model) {
  NormalSet out;
  out.classes.assign(candidates.begin(), candidates.end());
  const Index d = idx(model.config.dim);
  out.centers.resize(static_cast<Index>(candidates.size()), d);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = model.centers.at(candidates[i]);
    if (c.size() != d) throw ConfigError("cluster center dimension does not match the model");
    out.centers.row(static_cast<Index>(i)) = c.transpose();
  }
  if (context.cols() != d && context.rows() > 0) throw ConfigError("context dimension does not match the model");
  out.residuals = candidates.empty() ? MatrixXd(0, d) : predict_residuals(out.centers, context, model.config, model.params);
  out.normals = out.centers + out.residuals;
  return out;
}

double loss(const Eigen::Ref<const VectorXd>& normal, const Eigen::Ref<const VectorXd>& action) {
  return (normal - action).squaredNorm();
}

double loss_and_gradient(const RRBConfig& config, const RRBParams& params, const Eigen::Ref<const MatrixXd>& context,
                         const Eigen::Ref<const VectorXd>& center, const Eigen::Ref<const VectorXd>& target,
                         RRBParams* grad) {
  const MatrixXd query = center.transpose();
  if (context.rows() == 0) {
    return loss(center, target);
  }
  ConvCache conv_cache;
  AttentionCache attn_cache;
  const MatrixXd conv = causal_dilated_conv(context, config, params, grad ? &conv_cache : nullptr);
  const MatrixXd res = local_cross_attention(query, conv, config, params, grad ? &attn_cache : nullptr);
  const VectorXd diff = center + res.row(0).transpose() - target;
  const double value = diff.squaredNorm();
  if (grad) {
    const MatrixXd d_res = 2.0 * diff.transpose();
    MatrixXd d_conv = attention_backward(query, config, params, attn_cache, d_res, *grad, conv.rows());
    conv_backward(config, params, conv_cache, std::move(d_conv), *grad);
  }
  return value;
}

namespace {

void descend(RRBParams& params, RRBParams& grad, double step) {
  auto p = tensors(params);
  auto g = tensors(grad);
  for (std::size_t i = 0; i < p.size(); ++i) p[i].map() -= step * g[i].map();
}

void check_finite(double value, std::string_view where) {
  if (!std::isfinite(value)) throw TrainingError("non-finite loss " + std::to_string(value) + " " + std::string(where));
}

}  // namespace

double train_step(const TrainingSample& sample, RRBModel& model, double lr) {
  const auto& center = model.centers.at(sample.target_class);
  RRBParams grad = RRBParams::zeros(model.config);
  const double value =
      loss_and_gradient(model.config, model.params, sample.context(), center, sample.target_feature, &grad);
  check_finite(value, "in training step");
  descend(model.params, grad, lr);
  return value;
}

double cosine_lr(double lr0, int epoch, int epochs) {
  if (epochs <= 0) return lr0;
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(epochs)));
}

double mean_loss(std::span<const TrainingSample> samples, const RRBModel& model) {
  if (samples.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : samples)
    total += loss_and_gradient(model.config, model.params, s.context(), model.centers.at(s.target_class),
                               s.target_feature, nullptr);
  return total / static_cast<double>(samples.size());
}

TrainResult train(std::span<const TrainingSample> samples, const RRBConfig& config, const TrainOptions& options) {
  config.validate();
  if (samples.empty()) throw ConfigError("training set is empty");
  if (options.batch < 1) throw ConfigError("batch size must be positive");
  if (options.epochs < 0) throw ConfigError("epochs must be non-negative");

  std::vector<std::pair<ClassId, VectorXd>> labelled;
  labelled.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.target_feature.size() != config.dim)
      throw ConfigError("sample feature dimension " + std::to_string(s.target_feature.size()) +
                        " does not match model dim " + std::to_string(config.dim));
    labelled.emplace_back(s.target_class, s.target_feature);
  }

  TrainResult result;
  result.model.config = config;
  result.model.params = init_params(config, options.seed);
  result.model.centers = cluster_centers(labelled);

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 shuffle_rng(options.seed ^ 0x9E3779B97F4A7C15ULL);
  const auto batch = static_cast<std::size_t>(options.batch);
  auto& model = result.model;

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    const double lr = cosine_lr(options.lr0, epoch, options.epochs);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      RRBParams grad = RRBParams::zeros(config);
      for (std::size_t i = start; i < end; ++i) {
        const auto& s = samples[order[i]];
        const double value = loss_and_gradient(config, model.params, s.context(), model.centers.at(s.target_class),
                                               s.target_feature, &grad);
        check_finite(value, "at epoch " + std::to_string(epoch));
        epoch_total += value;
      }
      descend(model.params, grad, lr / static_cast<double>(end - start));
    }
    const double mean = epoch_total / static_cast<double>(order.size());
    result.epoch_loss.push_back(mean);
    if (options.on_epoch) options.on_epoch(epoch, lr, mean);
  }
  return result;
}

GradCheckReport gradient_check(const RRBConfig& config, const RRBParams& params,
                               const Eigen::Ref<const MatrixXd>& context, const Eigen::Ref<const VectorXd>& center,
                               const Eigen::Ref<const VectorXd>& target, double eps,
                               const std::function<void(RRBParams&)>& tamper) {
  RRBParams analytic = RRBParams::zeros(config);
  loss_and_gradient(config, params, context, center, target, &analytic);
  if (tamper) tamper(analytic);

  RRBParams probe = params;
  auto probe_views = tensors(probe);
  auto grad_views = tensors(analytic);
  GradCheckReport report;
  for (std::size_t t = 0; t < probe_views.size(); ++t) {
    const auto& view = probe_views[t];
    for (Index i = 0; i < view.size(); ++i) {
      const double saved = view.data[i];
      view.data[i] = saved + eps;
      const double up = loss_and_gradient(config, probe, context, center, target, nullptr);
      view.data[i] = saved - eps;
      const double down = loss_and_gradient(config, probe, context, center, target, nullptr);
      view.data[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = grad_views[t].data[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_tensor = view.name;
        report.worst_index = i;
      }
    }
  }
  return report;
}

std::string model_to_json(const RRBModel& model) {
  nlohmann::json config = {{"dim", model.config.dim},
                           {"conv_layers", model.config.conv_layers},
                           {"kernel", model.config.kernel},
                           {"dilation_base", model.config.dilation_base},
                           {"attn_window", model.config.attn_window},
                           {"heads", model.config.heads},
                           {"proj_kernel", model.config.proj_kernel}};
  nlohmann::json centers = nlohmann::json::object();
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [cls, c] : model.centers.centers) {
    centers[std::to_string(cls)] = std::vector<double>(c.data(), c.data() + c.size());
    counts[std::to_string(cls)] = model.centers.counts.at(cls);
  }
  nlohmann::json params = nlohmann::json::object();
  auto copy = model.params;
  for (const auto& t : tensors(copy)) {
    if (t.cols == 1)
      params[t.name] = std::vector<double>(t.data, t.data + t.rows);
    else
      params[t.name] = matrix_to_json(t.map());
  }
  nlohmann::json o = {{"format_version", 1},
                      {"config", std::move(config)},
                      {"centers", std::move(centers)},
                      {"center_counts", std::move(counts)},
                      {"params", std::move(params)}};
  return o.dump();
}

RRBModel model_from_json(const std::string& text) {
  try {
    const auto o = nlohmann::json::parse(text);
    if (o.at("format_version").get<int>() != 1) throw FormatError("model: unsupported format_version");
    RRBModel m;
    const auto& c = o.at("config");
    m.config.dim = c.at("dim").get<int>();
    m.config.conv_layers = c.value("conv_layers", 5);
    m.config.kernel = c.value("kernel", 3);
    m.config.dilation_base = c.value("dilation_base", 3);
    m.config.attn_window = c.value("attn_window", 32);
    m.config.heads = c.value("heads", 2);
    m.config.proj_kernel = c.value("proj_kernel", 3);
    m.config.validate();

    for (const auto& [key, value] : o.at("centers").items()) {
      const ClassId cls = std::stoi(key);
      const auto v = value.get<std::vector<double>>();
      if (static_cast<int>(v.size()) != m.config.dim) throw FormatError("model: center '" + key + "' has wrong dimension");
      m.centers.centers[cls] = Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
      m.centers.counts[cls] = 1;
    }
    if (o.contains("center_counts"))
      for (const auto& [key, value] : o.at("center_counts").items()) m.centers.counts[std::stoi(key)] = value.get<std::size_t>();

    m.params = RRBParams::zeros(m.config);
    const auto& p = o.at("params");
    for (auto& t : tensors(m.params)) {
      if (!p.contains(t.name)) throw FormatError("model: missing tensor '" + t.name + "'");
      const auto& j = p.at(t.name);
      if (t.cols == 1) {
        const auto v = j.get<std::vector<double>>();
        if (static_cast<Index>(v.size()) != t.rows) throw FormatError("model: tensor '" + t.name + "' has wrong shape");
        std::copy(v.begin(), v.end(), t.data);
      } else {
        const auto rows = j.get<std::vector<std::vector<double>>>();
        if (static_cast<Index>(rows.size()) != t.rows) throw FormatError("model: tensor '" + t.name + "' has wrong shape");
        auto map = t.map();
        for (Index r = 0; r < t.rows; ++r) {
          const auto& row = rows[static_cast<std::size_t>(r)];
          if (static_cast<Index>(row.size()) != t.cols) throw FormatError("model: tensor '" + t.name + "' has wrong shape");
          for (Index col = 0; col < t.cols; ++col) map(r, col) = row[static_cast<std::size_t>(col)];
        }
      }
      if (!t.map().allFinite()) throw FormatError("model: tensor '" + t.name + "' has non-finite values");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("model: ") + e.what());
  }
}

void write_model(const std::filesystem::path& path, const RRBModel& model) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << model_to_json(model) << '\n';
}

RRBModel read_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return model_from_json(ss.str());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace amnar
