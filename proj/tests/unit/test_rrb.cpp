// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The amnar Authors

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "amnar/error.hpp"
#include "amnar/rrb.hpp"
#include "amnar/synthgen.hpp"
#include "rrb_reference.hpp"
#include "support.hpp"

using namespace amnar;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using testing_support::jittered_params;
using testing_support::random_matrix;

namespace {

RRBConfig config(int dim, int window = 32) {
  RRBConfig c;
  c.dim = dim;
  c.attn_window = window;
  return c;
}

double max_abs_diff(const MatrixXd& m, const oracle::Grid& g) {
  double worst = 0.0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      worst = std::max(worst, std::abs(m(r, c) - g[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]));
  return worst;
}

}  // namespace

TEST(RRBConfig, Validation) {
  EXPECT_THROW(config(5).validate(), ConfigError);
  EXPECT_THROW(config(4, 0).validate(), ConfigError);
  EXPECT_THROW(init_params(config(3), 1), ConfigError);
  const auto c = config(8);
  EXPECT_EQ(c.dilation(0), 1);
  EXPECT_EQ(c.dilation(4), 81);
  EXPECT_EQ(c.head_dim(), 4);
}

TEST(InitParams, DeterministicPerSeed) {
  const auto c = config(4);
  auto a = init_params(c, 9);
  auto b = init_params(c, 9);
  auto other = init_params(c, 10);
  auto ta = tensors(a), tb = tensors(b), to = tensors(other);
  std::size_t differing = 0;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    EXPECT_EQ(ta[i].map(), tb[i].map()) << ta[i].name;
    if (ta[i].name.rfind("out.", 0) == 0) {
      EXPECT_TRUE(ta[i].map().isZero()) << ta[i].name;
    } else if (ta[i].name.find("bias") == std::string::npos) {
      differing += ta[i].map() != to[i].map() ? 1 : 0;
      EXPECT_NE(ta[i].map(), to[i].map()) << ta[i].name;
    }
  }
  EXPECT_GT(differing, 0u);
}

TEST(InitParams, FreshModelHasZeroResidual) {
  std::mt19937_64 rng(1);
  const auto c = config(4);
  const auto p = init_params(c, 3);
  const MatrixXd r = predict_residuals(random_matrix(rng, 3, 4), random_matrix(rng, 17, 4), c, p);
  EXPECT_TRUE(r.isZero());
}

TEST(CausalConv, ZeroWeightsAreIdentity) {
  std::mt19937_64 rng(2);
  const auto c = config(4);
  const auto p = RRBParams::zeros(c);
  const MatrixXd x = random_matrix(rng, 10, 4);
  EXPECT_EQ(causal_dilated_conv(x, c, p), x);
}

TEST(CausalConv, CurrentTapIdentityGivesRectifiedSkip) {
  std::mt19937_64 rng(3);
  auto c = config(4);
  c.conv_layers = 1;
  auto p = RRBParams::zeros(c);
  p.conv[0].taps[2] = MatrixXd::Identity(4, 4);
  const MatrixXd x = random_matrix(rng, 6, 4);
  const MatrixXd expected = x + x.cwiseMax(0.0);
  EXPECT_EQ(causal_dilated_conv(x, c, p), expected);
}

TEST(CausalConv, FutureFramesDoNotLeak) {
  std::mt19937_64 rng(4);
  const auto c = config(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = jittered_params(c, static_cast<std::uint64_t>(trial));
    MatrixXd x = random_matrix(rng, 40, 4);
    const MatrixXd before = causal_dilated_conv(x, c, p);
    const Eigen::Index j = static_cast<Eigen::Index>(rng() % 40);
    x.row(j).array() += 5.0;
    const MatrixXd after = causal_dilated_conv(x, c, p);
    EXPECT_EQ(before.topRows(j), after.topRows(j));
  }
}

TEST(CausalConv, MatchesNaiveLoops) {
  std::mt19937_64 rng(5);
  for (int dim : {4, 8}) {
    const auto c = config(dim);
    const auto p = jittered_params(c, 5);
    const MatrixXd x = random_matrix(rng, 30, dim);
    EXPECT_LT(max_abs_diff(causal_dilated_conv(x, c, p), oracle::naive_conv(oracle::to_grid(x), c, p)), 1e-10);
  }
}

TEST(Attention, SingleFrameAttendsFully) {
  std::mt19937_64 rng(6);
  const auto c = config(4);
  const auto p = jittered_params(c, 6);
  const MatrixXd seq = random_matrix(rng, 1, 4);
  AttentionCache cache;
  local_cross_attention(random_matrix(rng, 2, 4), seq, c, p, &cache);
  for (const auto& w : cache.weights) EXPECT_TRUE(w.isApprox(MatrixXd::Ones(2, 1), 1e-15));
  for (int h = 0; h < 2; ++h)
    for (Eigen::Index q = 0; q < 2; ++q)
      EXPECT_LT((cache.head_out.row(q).segment(2 * h, 2) - cache.values.row(0).segment(2 * h, 2)).norm(), 1e-15);
}

TEST(Attention, UniformKeysAndValuesIgnoreQuery) {
  std::mt19937_64 rng(7);
  const auto c = config(4);
  auto p = jittered_params(c, 7);
  p.key_taps.topRows(2).setZero();
  p.value_taps.topRows(2).setZero();
  const MatrixXd seq = Eigen::RowVector4d(0.3, -1, 2, 0.5).replicate(9, 1);
  const MatrixXd a = local_cross_attention(random_matrix(rng, 1, 4), seq, c, p);
  const MatrixXd b = local_cross_attention(random_matrix(rng, 1, 4, 3.0), seq, c, p);
  EXPECT_LT((a - b).norm(), 1e-12);
}

TEST(Attention, MatchesNaiveLoops) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const auto c = config(4, 1 + static_cast<int>(rng() % 8));
    const auto p = jittered_params(c, 100 + static_cast<std::uint64_t>(trial));
    const MatrixXd q = random_matrix(rng, 3, 4);
    const MatrixXd seq = random_matrix(rng, 5, 4);
    EXPECT_LT(max_abs_diff(local_cross_attention(q, seq, c, p),
                           oracle::naive_attention(oracle::to_grid(q), oracle::to_grid(seq), c, p)),
              1e-10);
  }
}

TEST(Attention, FramesOutsideWindowAreIgnored) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const int w = 1 + static_cast<int>(rng() % 10);
    const auto c = config(4, w);
    const auto p = jittered_params(c, 200 + static_cast<std::uint64_t>(trial));
    const MatrixXd q = random_matrix(rng, 2, 4);
    MatrixXd seq = random_matrix(rng, w + 1 + static_cast<Eigen::Index>(rng() % 10), 4);
    const MatrixXd before = local_cross_attention(q, seq, c, p);
    seq.topRows(seq.rows() - w).setZero();
    EXPECT_EQ(before, local_cross_attention(q, seq, c, p));
  }
}

TEST(ReconstructNormals, ZeroInitReturnsCenters) {
  std::mt19937_64 rng(10);
  RRBModel m;
  m.config = config(4);
  m.params = init_params(m.config, 1);
  m.centers.centers = {{2, VectorXd::Constant(4, 1.0)}, {5, VectorXd::Constant(4, -2.0)}};
  const std::vector<ClassId> cands{5, 2};
  const auto n = reconstruct_normals(cands, random_matrix(rng, 7, 4), m);
  EXPECT_EQ(n.classes, cands);
  ASSERT_EQ(n.normals.rows(), 2);
  EXPECT_EQ(n.normals.row(0).transpose(), m.centers.at(5));
  EXPECT_EQ(n.normals.row(1).transpose(), m.centers.at(2));
  const std::vector<ClassId> missing{3};
  EXPECT_THROW(reconstruct_normals(missing, random_matrix(rng, 7, 4), m), MissingCenterError);
}

TEST(ReconstructNormals, MatchesComposedNaiveOracle) {
  std::mt19937_64 rng(11);
  RRBModel m;
  m.config = config(8, 6);
  m.params = jittered_params(m.config, 11);
  for (ClassId k = 0; k < 4; ++k) m.centers.centers[k] = random_matrix(rng, 8, 1);
  const std::vector<ClassId> cands{0, 1, 3};
  const MatrixXd ctx = random_matrix(rng, 20, 8);
  const auto n = reconstruct_normals(cands, ctx, m);
  const auto ref = oracle::naive_residuals(oracle::to_grid(n.centers), oracle::to_grid(ctx), m.config, m.params);
  EXPECT_LT(max_abs_diff(n.residuals, ref), 1e-10);
  EXPECT_EQ(n.normals, MatrixXd(n.centers + n.residuals));
  for (std::size_t i = 0; i < cands.size(); ++i)
    EXPECT_EQ(n.centers.row(static_cast<Eigen::Index>(i)).transpose(), m.centers.at(cands[i]));
}

TEST(ReconstructNormals, EmptyContextGivesCenters) {
  RRBModel m;
  m.config = config(4);
  m.params = jittered_params(m.config, 12);
  m.centers.centers[0] = VectorXd::Constant(4, 3.0);
  const std::vector<ClassId> cands{0};
  const auto n = reconstruct_normals(cands, MatrixXd(0, 4), m);
  EXPECT_EQ(n.normals.row(0).transpose(), m.centers.at(0));
}

TEST(Loss, HandCasesAndSummation) {
  EXPECT_EQ(loss(Eigen::Vector2d(1, 2), Eigen::Vector2d(1, 2)), 0.0);
  EXPECT_EQ(loss(Eigen::Vector2d(0, 0), Eigen::Vector2d(3, 4)), 25.0);
  std::mt19937_64 rng(13);
  const VectorXd a = random_matrix(rng, 6, 1), b = random_matrix(rng, 6, 1);
  double s = 0.0;
  for (int i = 0; i < 6; ++i) s += (a(i) - b(i)) * (a(i) - b(i));
  EXPECT_NEAR(loss(a, b), s, 1e-12);
}

TEST(TrainStep, OptimalPointHasZeroLossAndGradient) {
  std::mt19937_64 rng(14);
  const auto c = config(4);
  const auto p = init_params(c, 2);
  const VectorXd center = random_matrix(rng, 4, 1);
  RRBParams g = RRBParams::zeros(c);
  EXPECT_EQ(loss_and_gradient(c, p, random_matrix(rng, 12, 4), center, center, &g), 0.0);
  EXPECT_TRUE(g.out_weight.isZero());
  EXPECT_TRUE(g.out_bias.isZero());
}

TEST(TrainStep, SmallStepDescends) {
  std::mt19937_64 rng(15);
  auto frames = std::make_shared<const FeatureMatrix>(random_matrix(rng, 30, 4));
  for (int trial = 0; trial < 5; ++trial) {
    RRBModel m;
    m.config = config(4);
    m.params = jittered_params(m.config, 300 + static_cast<std::uint64_t>(trial));
    m.centers.centers[0] = random_matrix(rng, 4, 1);
    TrainingSample s{frames, 20, 0, random_matrix(rng, 4, 1)};
    const double before = train_step(s, m, 1e-6);
    const double after = loss_and_gradient(m.config, m.params, s.context(), m.centers.at(0), s.target_feature, nullptr);
    EXPECT_LT(after, before);
  }
}

TEST(TrainStep, NonFiniteLossAborts) {
  RRBModel m;
  m.config = config(4);
  m.params = init_params(m.config, 1);
  m.centers.centers[0] = VectorXd::Zero(4);
  auto frames = std::make_shared<const FeatureMatrix>(MatrixXd::Zero(4, 4));
  TrainingSample s{frames, 2, 0, VectorXd::Constant(4, std::numeric_limits<double>::infinity())};
  EXPECT_THROW(train_step(s, m, 1e-3), TrainingError);
}

TEST(GradientCheck, AnalyticMatchesFiniteDifferences) {
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 4; ++trial) {
    const int dim = trial % 2 == 0 ? 4 : 8;
    const auto c = config(dim, 1 + static_cast<int>(rng() % 32));
    const auto p = jittered_params(c, 400 + static_cast<std::uint64_t>(trial));
    const auto t = static_cast<Eigen::Index>(1 + rng() % 40);
    const auto r = gradient_check(c, p, random_matrix(rng, t, dim), random_matrix(rng, dim, 1), random_matrix(rng, dim, 1));
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_tensor << "[" << r.worst_index << "]";
    EXPECT_EQ(r.checked, parameter_count(p));
  }
}

TEST(GradientCheck, CorruptedConvGradientIsCaught) {
  std::mt19937_64 rng(17);
  const auto c = config(4);
  const auto p = jittered_params(c, 17);
  const auto r = gradient_check(c, p, random_matrix(rng, 20, 4), random_matrix(rng, 4, 1), random_matrix(rng, 4, 1),
                                1e-5, [](RRBParams& g) { g.conv[1].taps[0] *= 1.5; });
  EXPECT_GT(r.max_rel_error, 1e-2);
  EXPECT_EQ(r.worst_tensor, "conv.1.tap.0");
}

TEST(GradientCheck, ZeroGradientPointReportsZero) {
  std::mt19937_64 rng(18);
  const auto c = config(4);
  const VectorXd center = random_matrix(rng, 4, 1);
  const auto r = gradient_check(c, init_params(c, 18), random_matrix(rng, 10, 4), center, center);
  EXPECT_EQ(r.max_rel_error, 0.0);
}

TEST(Train, CosineSchedule) {
  EXPECT_DOUBLE_EQ(cosine_lr(1e-3, 0, 200), 1e-3);
  EXPECT_DOUBLE_EQ(cosine_lr(1e-3, 100, 200), 0.5e-3);
  EXPECT_NEAR(cosine_lr(1e-3, 200, 200), 0.0, 1e-18);
  EXPECT_DOUBLE_EQ(cosine_lr(2.0, 50, 200), 2.0 * 0.5 * (1.0 + std::cos(M_PI / 4.0)));
}

namespace {

std::vector<TrainingSample> drift_samples(std::uint64_t seed, int videos) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.n_train = videos;
  cfg.n_test = 0;
  cfg.noise_sigma = 0.1;
  cfg.drift_amplitude = 3.0;
  const auto data = generate_dataset(cfg);
  std::vector<TrainingSample> out;
  for (const auto& v : data.train) {
    auto frames = std::make_shared<const FeatureMatrix>(v.features);
    for (std::size_t i = 1; i < v.segments.size(); ++i)
      out.push_back({frames, v.segments[i - 1].ed, v.segments[i].label, action_feature(v.features, v.segments[i])});
  }
  return out;
}

}  // namespace

TEST(Train, ZeroEpochsReturnsInitialModel) {
  const auto samples = drift_samples(1, 3);
  TrainOptions o;
  o.epochs = 0;
  o.seed = 4;
  const auto r = train(samples, config(8), o);
  auto expected = init_params(config(8), 4);
  auto got = r.model.params;
  auto te = tensors(expected), tg = tensors(got);
  for (std::size_t i = 0; i < te.size(); ++i) EXPECT_EQ(te[i].map(), tg[i].map());
  EXPECT_TRUE(r.epoch_loss.empty());
  EXPECT_THROW(train({}, config(8), o), ConfigError);
}

TEST(Train, LearnsPredictableDrift) {
  const auto samples = drift_samples(2, 40);
  TrainOptions o;
  o.epochs = 50;
  o.lr0 = 1e-2;
  o.seed = 5;
  const auto r = train(samples, config(8), o);
  RRBModel initial = r.model;
  initial.params = init_params(initial.config, o.seed);
  const double start = mean_loss(samples, initial);
  const double end = mean_loss(samples, r.model);
  EXPECT_LT(end, 0.1 * start) << "start " << start << " end " << end;
}

TEST(Train, DeterministicGivenSeed) {
  const auto samples = drift_samples(3, 6);
  TrainOptions o;
  o.epochs = 3;
  o.seed = 6;
  const auto a = train(samples, config(8), o);
  const auto b = train(samples, config(8), o);
  EXPECT_EQ(model_to_json(a.model), model_to_json(b.model));
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
}

TEST(ModelFile, RoundTripAndShapeErrors) {
  testing_support::TempDir dir;
  RRBModel m;
  m.config = config(4, 5);
  m.params = jittered_params(m.config, 19);
  m.centers.centers = {{0, VectorXd::Constant(4, 0.25)}, {3, VectorXd::Constant(4, -1.0)}};
  m.centers.counts = {{0, 4}, {3, 9}};
  write_model(dir / "m.json", m);
  const auto back = read_model(dir / "m.json");
  EXPECT_EQ(back.config, m.config);
  EXPECT_EQ(back.centers.counts, m.centers.counts);
  EXPECT_EQ(model_to_json(back), model_to_json(m));
  auto text = testing_support::slurp(dir / "m.json");
  text.replace(text.find("\"out.bias\":["), 12, "\"out.bias\":[1,");
  testing_support::spit(dir / "bad.json", text);
  EXPECT_THROW(read_model(dir / "bad.json"), FormatError);
  EXPECT_THROW(read_model(dir / "missing.json"), Error);
}
