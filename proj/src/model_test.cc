// Copyright 2026 The sld Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//       http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "sld/model.h"

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.h"
#include "testing.h"

namespace sld {
namespace {

using testing::max_rel_error;
using testing::numeric_grad;
using testing::param_grad_error;
using testing::random_matrix;
using testing::random_vector;

constexpr double kGradTol = 1e-4;

std::vector<Eigen::MatrixXd> random_batch(int B, int F, Rng &rng) {
  std::vector<Eigen::MatrixXd> out;
  for (int b = 0; b < B; ++b) out.push_back(random_matrix(F, 2 + (b % 4), rng));
  return out;
}

void zero_grads(const ParamList &params) {
  for (const auto &[name, p] : params) p->zero_grad();
}

// --- temporal average ------------------------------------------------------

TEST(TemporalAverage, Examples) {
  Rng rng(1);
  const Eigen::MatrixXd one = random_matrix(5, 1, rng);
  EXPECT_EQ(temporal_average(one), Eigen::VectorXd(one.col(0)));
  EXPECT_EQ(temporal_average(Eigen::MatrixXd::Ones(4, 9)), Eigen::VectorXd::Ones(4));
  const Eigen::MatrixXd m = random_matrix(256, 50, rng);
  const Eigen::VectorXd got = temporal_average(m);
  for (int i = 0; i < 256; ++i) {
    double s = 0;
    for (int t = 0; t < 50; ++t) s += m(i, t);
    ASSERT_NEAR(got(i), s / 50, 1e-12);
  }
  EXPECT_THROW(temporal_average(Eigen::MatrixXd(3, 0)), ValidationError);
}

// --- projector ---------------------------------------------------------------

ProjectorConfig small_projector() {
  return {.layers = 3, .input_dim = 5, .bottleneck_dim = 3, .output_dim = 4,
          .bottleneck_dropout = 0.1, .fc_dropout = 0.1};
}

TEST(Projector, ConstantAcrossLayersPoolsToThatLayer) {
  Projector p(small_projector());
  Rng rng(2);
  p.init(rng);
  p.pool.value << 0.3, -1.0, 2.0;
  const Eigen::MatrixXd x = random_matrix(5, 6, rng);
  Projector::Cache c;
  p.forward({x, x, x}, false, nullptr, &c);
  EXPECT_LT((c.pooled - x).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_NEAR(c.weights.sum(), 1.0, 1e-15);
}

TEST(Projector, EvalModeIsRepeatable) {
  Projector p(small_projector());
  Rng rng(3);
  p.init(rng);
  const auto layers = random_batch(3, 5, rng);
  std::vector<Eigen::MatrixXd> in{layers[0].leftCols(2), layers[1].leftCols(2), layers[2].leftCols(2)};
  EXPECT_EQ(p.forward(in, false, nullptr, nullptr), p.forward(in, false, nullptr, nullptr));
  Rng a(9), b(10);
  EXPECT_NE(p.forward(in, true, &a, nullptr), p.forward(in, true, &b, nullptr));
}

TEST(Projector, IdentityWeightsGiveTruncatedLayerMean) {
  Projector p({.layers = 4, .input_dim = 6, .bottleneck_dim = 6, .output_dim = 3});
  p.set_identity();
  Rng rng(4);
  std::vector<Eigen::MatrixXd> layers;
  for (int l = 0; l < 4; ++l) layers.push_back(random_matrix(6, 5, rng));
  const Eigen::MatrixXd y = p.forward(layers, false, nullptr, nullptr);
  ASSERT_EQ(y.rows(), 3);
  ASSERT_EQ(y.cols(), 5);
  for (int f = 0; f < 3; ++f)
    for (int t = 0; t < 5; ++t) {
      double m = 0;
      for (int l = 0; l < 4; ++l) m += layers[static_cast<size_t>(l)](f, t);
      EXPECT_NEAR(y(f, t), m / 4, 1e-12);
    }
}

TEST(Projector, ShapeErrors) {
  Projector p(small_projector());
  Rng rng(5);
  p.init(rng);
  const Eigen::MatrixXd x = random_matrix(5, 3, rng);
  EXPECT_THROW(p.forward({x, x}, false, nullptr, nullptr), ValidationError);
  EXPECT_THROW(p.forward({x, x, Eigen::MatrixXd(4, 3)}, false, nullptr, nullptr), ValidationError);
  EXPECT_THROW(p.forward({x, x, Eigen::MatrixXd(5, 2)}, false, nullptr, nullptr), ValidationError);
}

TEST(Projector, GradientCheck) {
  for (bool train : {false, true}) {
    Projector p(small_projector());
    Rng rng(6);
    p.init(rng);
    p.pool.value << 0.2, -0.4, 0.7;
    std::vector<Eigen::MatrixXd> layers;
    for (int l = 0; l < 3; ++l) layers.push_back(random_matrix(5, 4, rng));
    const Eigen::MatrixXd target = random_matrix(4, 4, rng);
    auto loss = [&] {
      Rng r(77);
      return (p.forward(layers, train, &r, nullptr) - target).squaredNorm() / 2;
    };
    ParamList params;
    p.collect("p.", params);
    zero_grads(params);
    Rng r(77);
    Projector::Cache c;
    const Eigen::MatrixXd y = p.forward(layers, train, &r, &c);
    const auto dx = p.backward(layers, c, y - target);
    EXPECT_LT(param_grad_error(params, loss), kGradTol);
    for (size_t l = 0; l < 3; ++l)
      EXPECT_LT(max_rel_error(dx[l], numeric_grad(layers[l], loss)), kGradTol);
  }
}

// --- SSC loss ---------------------------------------------------------------

TEST(SscLoss, MatchesElementwiseOracle) {
  Rng rng(7);
  // 3 x 4 matrices with hand-pickable entries.
  Eigen::MatrixXd s(3, 4), l(3, 4);
  s << 1, 2, 0, -1, 0.5, 0, 1, 1, -2, 1, 0, 3;
  l << 0, 2, 1, -1, 1, 1, 0, 0, -1, 0, 0, 2;
  const Eigen::MatrixXd h = 0.5 * s;
  const std::vector<Eigen::MatrixXd> style{s, l, s}, ling{l, s, h};
  for (double lambda : {0.0, 0.007, 0.5, 1.0}) {
    const auto got = ssc_loss(style, ling, lambda);
    const auto want = oracle::ssc(style, ling, lambda);
    EXPECT_NEAR(got.distance, want.distance, 1e-6 * want.distance);
    EXPECT_NEAR(got.redundancy, want.redundancy, 1e-6 * want.redundancy);
    EXPECT_NEAR(got.total, want.total, 1e-6 * want.total);
    EXPECT_EQ(got.lambda, lambda);
    EXPECT_EQ(got.total, got.distance + lambda * got.redundancy);
  }
  for (int trial = 0; trial < 5; ++trial) {
    const auto S = random_batch(4, 6, rng);
    std::vector<Eigen::MatrixXd> L;
    for (const auto &m : S) L.push_back(random_matrix(6, m.cols(), rng));
    const auto got = ssc_loss(S, L, kSscLambda);
    const auto want = oracle::ssc(S, L, kSscLambda);
    EXPECT_NEAR(got.total, want.total, 1e-9 * want.total);
  }
}

TEST(SscLoss, IdenticalViewsHaveZeroDistance) {
  Rng rng(8);
  const auto S = random_batch(3, 4, rng);
  EXPECT_EQ(ssc_loss(S, S, 0.3).distance, 0.0);
  const Eigen::MatrixXd one = random_matrix(4, 5, rng);
  const auto single = ssc_loss(one, one, kSscLambda);
  EXPECT_EQ(single.distance, 0.0);
  EXPECT_DOUBLE_EQ(single.redundancy, 2.0 * 4);
}

TEST(SscLoss, DistanceIsSymmetricAndNonnegative) {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const auto S = random_batch(3, 5, rng);
    std::vector<Eigen::MatrixXd> L;
    for (const auto &m : S) L.push_back(random_matrix(5, m.cols(), rng));
    const auto a = ssc_loss(S, L, 0.1), b = ssc_loss(L, S, 0.1);
    EXPECT_EQ(a.distance, b.distance);
    EXPECT_GE(a.distance, 0.0);
    EXPECT_GE(a.redundancy, 0.0);
    EXPECT_GE(a.total, 0.0);
  }
}

TEST(SscLoss, OrthonormalPooledRowsHaveZeroRedundancy) {
  // F' = 2, B = 4: pooled rows [1,1,-1,-1] and [1,-1,1,-1] are centred and
  // orthogonal, so after normalization C = I.
  Eigen::MatrixXd rows(2, 4);
  rows << 1, 1, -1, -1, 1, -1, 1, -1;
  std::vector<Eigen::MatrixXd> batch;
  for (int b = 0; b < 4; ++b) batch.push_back(rows.col(b).replicate(1, 3));
  const auto r = ssc_loss(batch, batch, 1.0);
  EXPECT_NEAR(r.redundancy, 0.0, 1e-7);
  EXPECT_EQ(r.distance, 0.0);
}

TEST(SscLoss, Errors) {
  Rng rng(10);
  const Eigen::MatrixXd a = random_matrix(3, 4, rng);
  EXPECT_THROW(ssc_loss(a, random_matrix(3, 5, rng), 0.1), ValidationError);
  EXPECT_THROW(ssc_loss(a, random_matrix(2, 4, rng), 0.1), ValidationError);
  EXPECT_THROW(ssc_loss(a, a, -0.1), ValidationError);
  EXPECT_THROW(ssc_loss(a, a, 1.5), ValidationError);
  EXPECT_THROW(ssc_loss(std::vector<Eigen::MatrixXd>{a, a}, std::vector<Eigen::MatrixXd>{a}, 0.1),
               ValidationError);
}

TEST(SscLoss, GradientCheck) {
  Rng rng(11);
  auto S = random_batch(4, 5, rng);
  std::vector<Eigen::MatrixXd> L;
  for (const auto &m : S) L.push_back(random_matrix(5, m.cols(), rng));
  for (double lambda : {0.0, 0.007, 1.0}) {
    SscGrad g;
    ssc_loss(S, L, lambda, &g);
    auto f = [&] { return ssc_loss(S, L, lambda).total; };
    for (size_t b = 0; b < S.size(); ++b) {
      EXPECT_LT(max_rel_error(g.d_style[b], numeric_grad(S[b], f)), kGradTol);
      EXPECT_LT(max_rel_error(g.d_ling[b], numeric_grad(L[b], f)), kGradTol);
    }
  }
}

// --- ASP ---------------------------------------------------------------------

TEST(Asp, UniformAttentionGivesPlainMeanAndStd) {
  Asp asp(4, 3);
  Rng rng(12);
  asp.init(rng);
  asp.zero_scores();
  const Eigen::MatrixXd x = random_matrix(4, 7, rng);
  const Eigen::VectorXd y = asp.forward(x, nullptr);
  ASSERT_EQ(y.size(), 8);
  for (int f = 0; f < 4; ++f) {
    double m = 0, v = 0;
    for (int t = 0; t < 7; ++t) m += x(f, t) / 7;
    for (int t = 0; t < 7; ++t) v += (x(f, t) - m) * (x(f, t) - m) / 7;
    EXPECT_NEAR(y(f), m, 1e-12);
    EXPECT_NEAR(y(4 + f), std::sqrt(v), 1e-12);
  }
}

TEST(Asp, ConstantInputAndWeightSum) {
  Asp asp(3, 5);
  Rng rng(13);
  asp.init(rng);
  Eigen::MatrixXd c(3, 6);
  c.colwise() = Eigen::Vector3d(1.5, -2.0, 0.25);
  const Eigen::VectorXd y = asp.forward(c, nullptr);
  EXPECT_NEAR(y(0), 1.5, 1e-12);
  EXPECT_NEAR(y(1), -2.0, 1e-12);
  for (int f = 3; f < 6; ++f) EXPECT_NEAR(y(f), std::sqrt(1e-8), 1e-12);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd a = asp.attention(random_matrix(3, 2 + trial, rng, 3.0));
    EXPECT_NEAR(a.sum(), 1.0, 1e-9);
    EXPECT_GE(a.minCoeff(), 0.0);
  }
  EXPECT_THROW(asp.forward(Eigen::MatrixXd::Ones(3, 1), nullptr), ValidationError);
}

TEST(Asp, GradientCheck) {
  Asp asp(4, 3);
  Rng rng(14);
  asp.init(rng);
  Eigen::MatrixXd x = random_matrix(4, 6, rng);
  const Eigen::VectorXd w = random_vector(8, rng);
  auto f = [&] { return w.dot(asp.forward(x, nullptr)); };
  ParamList params;
  asp.collect("asp.", params);
  zero_grads(params);
  Asp::Cache c;
  asp.forward(x, &c);
  const Eigen::MatrixXd dx = asp.backward(x, c, w);
  EXPECT_LT(param_grad_error(params, f), kGradTol);
  EXPECT_LT(max_rel_error(dx, numeric_grad(x, f)), kGradTol);
}

// --- classifier -------------------------------------------------------------

ClassifierConfig small_classifier() {
  return {.input_dim = 5, .dep_dim = 3, .attention_dim = 4, .hidden_dim = 6};
}

TEST(Classifier, ZeroInputsAndZeroFinalLayerGiveZero) {
  Classifier cls(small_classifier());
  Rng rng(15);
  cls.init(rng);
  cls.out.weight.value.setZero();
  cls.out.bias.value.setZero();
  const Eigen::VectorXd z = Eigen::VectorXd::Zero(3);
  EXPECT_EQ(cls.fuse_and_classify(z, z, z, z, false, nullptr, nullptr), 0.0);
}

TEST(Classifier, FixedWeightsOracle) {
  Classifier cls(small_classifier());
  ASSERT_EQ(cls.cfg.fused_dim(), 12);
  cls.fc.weight.value.setZero();
  for (int i = 0; i < 6; ++i) cls.fc.weight.value(i, 2 * i) = 1.0;
  cls.fc.bias.value.setConstant(0.1);
  cls.out.weight.value.setOnes();
  cls.out.bias.value(0, 0) = -0.5;
  Rng rng(16);
  const Eigen::VectorXd a = random_vector(3, rng), b = random_vector(3, rng),
                        c = random_vector(3, rng), d = random_vector(3, rng);
  Eigen::VectorXd z(12);
  z << a, b, c, d;
  double want = -0.5;
  for (int i = 0; i < 6; ++i) {
    const double u = z(2 * i) + 0.1;
    want += 0.5 * u * (1 + std::erf(u / std::sqrt(2.0)));
  }
  EXPECT_NEAR(cls.fuse_and_classify(a, b, c, d, false, nullptr, nullptr), want, 1e-12);
  EXPECT_EQ(cls.fuse_and_classify(a, b, c, d, false, nullptr, nullptr),
            cls.fuse_and_classify(a, b, c, d, false, nullptr, nullptr));
  EXPECT_THROW(cls.fuse_and_classify(a, b, c, random_vector(4, rng), false, nullptr, nullptr),
               ValidationError);
}

TEST(Classifier, FuseGradientCheck) {
  for (bool train : {false, true}) {
    Classifier cls(small_classifier());
    Rng rng(17);
    cls.init(rng);
    Eigen::MatrixXd in[4];
    for (auto &m : in) m = random_matrix(3, 1, rng);
    auto f = [&] {
      Rng r(5);
      return cls.fuse_and_classify(in[0].col(0), in[1].col(0), in[2].col(0), in[3].col(0),
                                   train, &r, nullptr);
    };
    ParamList params;
    cls.fc.collect("fc.", params);
    cls.out.collect("out.", params);
    zero_grads(params);
    Classifier::FuseCache c;
    Rng r(5);
    cls.fuse_and_classify(in[0].col(0), in[1].col(0), in[2].col(0), in[3].col(0), train, &r, &c);
    const auto g = cls.fuse_backward(c, 1.0);
    EXPECT_LT(param_grad_error(params, f), kGradTol);
    EXPECT_LT(max_rel_error(g.dep_style, numeric_grad(in[0], f)), kGradTol);
    EXPECT_LT(max_rel_error(g.dep_ling, numeric_grad(in[1], f)), kGradTol);
    EXPECT_LT(max_rel_error(g.emb_style, numeric_grad(in[2], f)), kGradTol);
    EXPECT_LT(max_rel_error(g.emb_ling, numeric_grad(in[3], f)), kGradTol);
  }
}

TEST(Classifier, EmbedGradientCheck) {
  Classifier cls(small_classifier());
  Rng rng(18);
  cls.init(rng);
  for (int view : {0, 1}) {
    Eigen::MatrixXd x = random_matrix(5, 4, rng);
    const Eigen::VectorXd w = random_vector(3, rng);
    auto f = [&] { return w.dot(cls.embed(view, x, nullptr)); };
    ParamList params;
    cls.collect("cls.", params);
    zero_grads(params);
    Classifier::EmbedCache c;
    cls.embed(view, x, &c);
    const Eigen::MatrixXd dx = cls.embed_backward(view, x, c, w);
    EXPECT_LT(param_grad_error(params, f), kGradTol);
    EXPECT_LT(max_rel_error(dx, numeric_grad(x, f)), kGradTol);
  }
}

TEST(Classifier, AblationIgnoresDependencyInputs) {
  ClassifierConfig cfg = small_classifier();
  cfg.use_dependency = false;
  Classifier cls(cfg);
  Rng rng(19);
  cls.init(rng);
  EXPECT_EQ(cfg.fused_dim(), 6);
  const Eigen::VectorXd c = random_vector(3, rng), d = random_vector(3, rng);
  EXPECT_EQ(cls.fuse_and_classify(random_vector(3, rng), random_vector(3, rng), c, d, false,
                                  nullptr, nullptr),
            cls.fuse_and_classify(Eigen::VectorXd(), Eigen::VectorXd(), c, d, false, nullptr,
                                  nullptr));
}

// --- classification losses --------------------------------------------------

TEST(WeightedBce, Examples) {
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
  Eigen::VectorXd labels(4);
  labels << 1, 0, 1, 0;
  EXPECT_NEAR(weighted_bce(zero, labels, 1.0, 1.0).loss, std::log(2.0), 1e-15);
  Eigen::VectorXd sure(4);
  sure << 20, -20, 20, -20;
  EXPECT_LT(weighted_bce(sure, labels, 1.0, 1.0).loss, 1e-8);
  EXPECT_LT(weighted_bce(sure, labels).loss, 1e-7);
  EXPECT_GT(weighted_bce(-sure, labels).loss, 10.0);
  EXPECT_THROW(weighted_bce(Eigen::VectorXd(), Eigen::VectorXd()), ValidationError);
  EXPECT_THROW(weighted_bce(zero, Eigen::VectorXd::Constant(4, 0.5)), ValidationError);
  Eigen::VectorXd bad = zero;
  bad(2) = std::nan("");
  EXPECT_THROW(weighted_bce(bad, labels), ValidationError);
}

TEST(WeightedBce, MatchesOracleAndGradient) {
  Rng rng(20);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXd z = random_matrix(16, 1, rng, 3.0);
    Eigen::VectorXd y(16);
    for (int i = 0; i < 16; ++i) y(i) = rng.bernoulli(0.3) ? 1 : 0;
    const auto v = weighted_bce(z.col(0), y);
    EXPECT_NEAR(v.loss, oracle::bce(z.col(0), y, 10.0, 1.0), 1e-10);
    auto f = [&] { return weighted_bce(z.col(0), y).loss; };
    EXPECT_LT(max_rel_error(v.dlogits, numeric_grad(z, f)), kGradTol);
  }
  Eigen::VectorXd y1(1), z1(1);
  y1 << 1;
  z1 << 0.3;
  EXPECT_NEAR(weighted_bce(z1, y1).loss, 10.0 * weighted_bce(z1, y1, 1.0, 1.0).loss, 1e-14);
}

TEST(FocalLoss, ReducesToBce) {
  Rng rng(21);
  Eigen::VectorXd z = random_vector(16, rng, 3.0), y(16);
  for (int i = 0; i < 16; ++i) y(i) = i % 3 == 0;
  EXPECT_NEAR(focal_loss(z, y, 0.0, 0.5).loss, weighted_bce(z, y, 1.0, 1.0).loss, 1e-10);
}

TEST(FocalLoss, ModulatesConfidentSamples) {
  Eigen::VectorXd z(1), y(1);
  z << std::log(99.0);  // p = 0.99
  y << 1;
  const double bce = weighted_bce(z, y, 1.0, 1.0).loss;
  EXPECT_NEAR(focal_loss(z, y, 2.0, 0.5).loss, 1e-4 * bce, 1e-12 * bce);
  EXPECT_THROW(focal_loss(z, y, -1.0, 0.5), ValidationError);
}

TEST(FocalLoss, MatchesOracleAndGradient) {
  Rng rng(22);
  for (double gamma : {0.0, 0.5, 2.0, 5.0})
    for (double alpha : {0.25, 0.5, 0.9}) {
      Eigen::MatrixXd z = random_matrix(12, 1, rng, 3.0);
      Eigen::VectorXd y(12);
      for (int i = 0; i < 12; ++i) y(i) = rng.bernoulli(0.5) ? 1 : 0;
      const auto v = focal_loss(z.col(0), y, gamma, alpha);
      EXPECT_NEAR(v.loss, oracle::focal(z.col(0), y, gamma, alpha), 1e-10);
      EXPECT_GE(v.loss, 0.0);
      auto f = [&] { return focal_loss(z.col(0), y, gamma, alpha).loss; };
      EXPECT_LT(max_rel_error(v.dlogits, numeric_grad(z, f)), kGradTol);
    }
}

// --- full model ---------------------------------------------------------------

ModelConfig small_model() {
  ModelConfig m;
  m.views = {{0, 2}, {3, 4}};
  m.feature_dim = 5;
  m.bottleneck_dim = 3;
  m.dep_dim = 4;
  m.attention_dim = 3;
  m.hidden_dim = 6;
  return m;
}

LayeredRepresentation random_rep(int L, int F, int T, Rng &rng) {
  LayeredRepresentation rep;
  for (int l = 0; l < L; ++l) rep.layers.push_back(random_matrix(F, T, rng));
  return rep;
}

TEST(SlimModel, GradientCheckEndToEnd) {
  SlimModel model(small_model());
  Rng rng(23);
  model.init(rng);
  Eigen::VectorXd mean = random_vector(8, rng, 0.1), sd = (random_vector(8, rng).array().abs() + 0.5).matrix();
  model.set_dependency_norm(mean, sd);
  const auto rep = random_rep(5, 5, 6, rng);
  for (bool train : {false, true}) {
    auto f = [&] {
      Rng r(3);
      return model.forward(rep, train, train, &r, nullptr);
    };
    ParamList params = model.all_params();
    zero_grads(params);
    ForwardState s;
    Rng r(3);
    model.forward(rep, train, train, &r, &s);
    model.backward(s, 1.0, true);
    EXPECT_LT(param_grad_error(params, f), kGradTol);
  }
}

TEST(SlimModel, ScoreIsDeterministicAndMatchesEvalForward) {
  SlimModel model(small_model());
  Rng rng(24);
  model.init(rng);
  const auto rep = random_rep(5, 5, 7, rng);
  EXPECT_EQ(model.score(rep), model.score(rep));
  EXPECT_EQ(model.score(rep), model.forward(rep, false, false, nullptr, nullptr));
  EXPECT_THROW(model.score(random_rep(4, 5, 7, rng)), ValidationError);
}

TEST(SlimModel, FrozenProjectorsReceiveNoGradient) {
  SlimModel model(small_model());
  Rng rng(25);
  model.init(rng);
  const auto rep = random_rep(5, 5, 4, rng);
  zero_grads(model.all_params());
  ForwardState s;
  model.forward(rep, false, false, nullptr, &s);
  model.backward(s, 1.0, false);
  for (const auto &[name, p] : model.projector_params()) EXPECT_EQ(p->grad.norm(), 0.0) << name;
  double cls_norm = 0;
  for (const auto &[name, p] : model.classifier_params()) cls_norm += p->grad.norm();
  EXPECT_GT(cls_norm, 0.0);
}

// --- optimizer ----------------------------------------------------------------

TEST(AdamW, MatchesHandComputedSteps) {
  Param p;
  p.resize(1, 2);
  p.value << 1.0, -2.0;
  ParamList params{{"p", &p}};
  AdamWConfig cfg;
  AdamW opt(cfg);
  double m[2] = {0, 0}, v[2] = {0, 0}, w[2] = {1.0, -2.0};
  const double grads[3][2] = {{0.5, -1.0}, {0.1, 0.3}, {-0.2, 0.0}};
  for (int t = 1; t <= 3; ++t) {
    p.grad << grads[t - 1][0], grads[t - 1][1];
    opt.step(params, 0.01);
    for (int i = 0; i < 2; ++i) {
      const double g = grads[t - 1][i];
      w[i] -= 0.01 * 0.01 * w[i];
      m[i] = 0.9 * m[i] + 0.1 * g;
      v[i] = 0.999 * v[i] + 0.001 * g * g;
      const double mh = m[i] / (1 - std::pow(0.9, t)), vh = v[i] / (1 - std::pow(0.999, t));
      w[i] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
      EXPECT_NEAR(p.value(0, i), w[i], 1e-14);
    }
  }
  EXPECT_EQ(opt.steps(), 3);
}

TEST(Nn, DropoutMaskStatistics) {
  Rng rng(26);
  const Eigen::MatrixXd m = dropout_mask(200, 50, 0.25, rng);
  const double kept = (m.array() > 0).cast<double>().mean();
  EXPECT_NEAR(kept, 0.75, 0.02);
  EXPECT_NEAR(m.mean(), 1.0, 0.03);
  EXPECT_EQ(dropout_mask(3, 3, 0.0, rng), Eigen::MatrixXd::Ones(3, 3));
}

TEST(Nn, LinearGradientCheck) {
  Linear lin(4, 3);
  Rng rng(27);
  lin.init(rng);
  Eigen::MatrixXd x = random_matrix(4, 5, rng);
  const Eigen::MatrixXd w = random_matrix(3, 5, rng);
  auto f = [&] { return lin.forward(x).cwiseProduct(w).sum(); };
  ParamList params;
  lin.collect("lin.", params);
  zero_grads(params);
  const Eigen::MatrixXd dx = lin.backward(x, w);
  EXPECT_LT(param_grad_error(params, f), kGradTol);
  EXPECT_LT(max_rel_error(dx, numeric_grad(x, f)), kGradTol);
  for (double z : {-3.0, -0.5, 0.0, 0.7, 2.5})
    EXPECT_NEAR(gelu_grad(z), (gelu(z + 1e-6) - gelu(z - 1e-6)) / 2e-6, 1e-8);
}

}  // namespace
}  // namespace sld
