// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The amnar Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "amnar/dataset.hpp"

namespace amnar {

/// Shape of the reconstruction network.
struct RRBConfig {
  int dim = 0;
  int conv_layers = 5;
  int kernel = 3;
  int dilation_base = 3;  // layer i uses dilation base^i
  int attn_window = 32;
  int heads = 2;
  int proj_kernel = 3;  // depthwise key/value projection

  /// Throws ConfigError.
  void validate() const;
  int dilation(int layer) const;
  int head_dim() const { return dim / heads; }

  friend bool operator==(const RRBConfig&, const RRBConfig&) = default;
};

struct ConvLayerParams {
  /// taps[k] is D x D; tap kernel-1 reads the current frame, tap k reads
  /// (kernel-1-k)*dilation frames back.
  std::vector<Eigen::MatrixXd> taps;
  Eigen::VectorXd bias;
};

/// Trainable tensors. Layout mirrors RRBConfig.
struct RRBParams {
  std::vector<ConvLayerParams> conv;
  // Depthwise projection of the (length-one) query: only the current tap
  // of a causal kernel ever sees data, so it reduces to a channel scale.
  Eigen::VectorXd query_scale;
  Eigen::VectorXd query_bias;
  // Keys carry no bias: a shift shared by every key cancels in the softmax.
  Eigen::MatrixXd key_taps;  // proj_kernel x D, last row = current frame
  Eigen::MatrixXd value_taps;
  Eigen::VectorXd value_bias;
  std::vector<Eigen::MatrixXd> head_proj;  // per head, head_dim x head_dim
  std::vector<Eigen::VectorXd> head_bias;
  Eigen::MatrixXd out_weight;  // D x D, zero at init
  Eigen::VectorXd out_bias;

  /// Zero tensors of the shapes implied by `config`.
  static RRBParams zeros(const RRBConfig& config);
};

/// Named view of one parameter tensor (column-major storage).
struct TensorView {
  std::string name;
  double* data;
  Eigen::Index rows;
  Eigen::Index cols;

  Eigen::Map<Eigen::MatrixXd> map() const { return {data, rows, cols}; }
  Eigen::Index size() const { return rows * cols; }
};

std::vector<TensorView> tensors(RRBParams& params);
std::size_t parameter_count(const RRBParams& params);

/// Reconstruction model bundle: configuration, parameters, class centers.
struct RRBModel {
  RRBConfig config;
  RRBParams params;
  ClusterCenters centers;
};

/// Per-candidate reconstructions: normals.row(i) = centers(i) + residuals.row(i).
struct NormalSet {
  std::vector<ClassId> classes;
  Eigen::MatrixXd centers;
  Eigen::MatrixXd residuals;
  Eigen::MatrixXd normals;
};

RRBParams init_params(const RRBConfig& config, std::uint64_t seed);

// -- forward pieces ----------------------------------------------------------

struct ConvCache {
  std::vector<Eigen::MatrixXd> inputs;  // per layer
  std::vector<Eigen::MatrixXd> pre;     // per layer, before the rectifier
};

/// Stacked causal dilated convolutions with a residual skip per layer:
/// out = x + relu(b + sum_k W_k x[t - (kernel-1-k) d]). Rows are frames.
Eigen::MatrixXd causal_dilated_conv(const Eigen::Ref<const Eigen::MatrixXd>& context, const RRBConfig& config,
                                    const RRBParams& params, ConvCache* cache = nullptr);

struct AttentionCache {
  Eigen::MatrixXd window;   // last min(W, T) frames of the attended sequence
  Eigen::MatrixXd keys;
  Eigen::MatrixXd values;
  Eigen::MatrixXd queries;  // projected
  std::vector<Eigen::MatrixXd> weights;  // per head, |C| x n
  Eigen::MatrixXd head_out;  // |C| x D, attention outputs before projection
  Eigen::MatrixXd projected;  // |C| x D, after per-head projection
};

/// Windowed multi-head cross-attention from class embeddings onto `sequence`,
/// returning one residual row per query row.
Eigen::MatrixXd local_cross_attention(const Eigen::Ref<const Eigen::MatrixXd>& queries,
                                      const Eigen::Ref<const Eigen::MatrixXd>& sequence, const RRBConfig& config,
                                      const RRBParams& params, AttentionCache* cache = nullptr);

/// Residuals for the given class embeddings. An empty context yields zero
/// residuals (the centers themselves).
Eigen::MatrixXd predict_residuals(const Eigen::Ref<const Eigen::MatrixXd>& queries,
                                  const Eigen::Ref<const Eigen::MatrixXd>& context, const RRBConfig& config,
                                  const RRBParams& params);

/// Throws MissingCenterError when a candidate has no center.
NormalSet reconstruct_normals(std::span<const ClassId> candidates, const Eigen::Ref<const Eigen::MatrixXd>& context,
                              const RRBModel& model);

// -- training ----------------------------------------------------------------

/// Squared Euclidean distance.
double loss(const Eigen::Ref<const Eigen::VectorXd>& normal, const Eigen::Ref<const Eigen::VectorXd>& action);

/// Loss of a single-query reconstruction and, when `grad` is given, its
/// gradient accumulated (added) into `grad`.
double loss_and_gradient(const RRBConfig& config, const RRBParams& params,
                         const Eigen::Ref<const Eigen::MatrixXd>& context,
                         const Eigen::Ref<const Eigen::VectorXd>& center,
                         const Eigen::Ref<const Eigen::VectorXd>& target, RRBParams* grad);

/// One gradient-descent step on one sample. Returns the pre-update loss.
/// Throws TrainingError on a non-finite loss.
double train_step(const TrainingSample& sample, RRBModel& model, double lr);

/// lr0 * 0.5 * (1 + cos(pi * epoch / epochs)).
double cosine_lr(double lr0, int epoch, int epochs);

struct TrainOptions {
  int epochs = 200;
  int batch = 8;
  double lr0 = 1e-3;
  std::uint64_t seed = 0;
  std::function<void(int epoch, double lr, double mean_loss)> on_epoch;
};

struct TrainResult {
  RRBModel model;
  std::vector<double> epoch_loss;  // mean loss seen during each epoch
};

/// Minibatch gradient descent with a cosine-annealed learning rate.
/// Cluster centers come from the samples' target features.
TrainResult train(std::span<const TrainingSample> samples, const RRBConfig& config, const TrainOptions& options);

/// Mean loss of the model over samples, without updating.
double mean_loss(std::span<const TrainingSample> samples, const RRBModel& model);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  Eigen::Index worst_index = 0;
  std::size_t checked = 0;
};

/// Compares analytic and central-difference gradients element by element:
/// |a - n| / max(|a|, |n|, 1e-8). `tamper` may alter the analytic gradient
/// before comparison.
GradCheckReport gradient_check(const RRBConfig& config, const RRBParams& params,
                               const Eigen::Ref<const Eigen::MatrixXd>& context,
                               const Eigen::Ref<const Eigen::VectorXd>& center,
                               const Eigen::Ref<const Eigen::VectorXd>& target, double eps = 1e-5,
                               const std::function<void(RRBParams&)>& tamper = {});

// -- model files -------------------------------------------------------------

std::string model_to_json(const RRBModel& model);
RRBModel model_from_json(const std::string& text);
void write_model(const std::filesystem::path& path, const RRBModel& model);
RRBModel read_model(const std::filesystem::path& path);

}  // namespace amnar
