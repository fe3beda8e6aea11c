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

#include <cmath>

namespace sld {

namespace {

Eigen::VectorXd softmax(const Eigen::VectorXd &x) {
  const double m = x.maxCoeff();
  Eigen::VectorXd e = (x.array() - m).exp();
  return e / e.sum();
}

// Backward of y = softmax(x) given dy.
Eigen::VectorXd softmax_backward(const Eigen::VectorXd &y,
                                 const Eigen::VectorXd &dy) {
  return y.cwiseProduct(dy.array().matrix() -
                        Eigen::VectorXd::Constant(y.size(), y.dot(dy)));
}

void set_truncated_identity(Linear &l) {
  l.weight.value.setIdentity();
  l.bias.value.setZero();
}

std::string dims(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace

// --- Projector -------------------------------------------------------------

Projector::Projector(const ProjectorConfig &c) : cfg(c) {
  if (c.layers < 1 || c.input_dim < 1 || c.bottleneck_dim < 1 || c.output_dim < 1)
    throw ValidationError("projector dimensions must be positive");
  if (c.bottleneck_dropout < 0 || c.bottleneck_dropout >= 1 ||
      c.fc_dropout < 0 || c.fc_dropout >= 1)
    throw ValidationError("projector dropout must lie in [0, 1)");
  pool.resize(c.layers, 1);
  down.resize(c.input_dim, c.bottleneck_dim);
  up.resize(c.bottleneck_dim, c.input_dim);
  head.resize(c.input_dim, c.output_dim);
}

void Projector::init(Rng &rng) {
  pool.value.setZero();
  down.init(rng);
  up.init(rng);
  head.init(rng);
}

void Projector::set_identity() {
  pool.value.setZero();
  set_truncated_identity(down);
  set_truncated_identity(up);
  set_truncated_identity(head);
}

Eigen::VectorXd Projector::layer_weights() const { return softmax(pool.value.col(0)); }

Eigen::MatrixXd Projector::forward(const std::vector<Eigen::MatrixXd> &layers,
                                   bool train, Rng *rng, Cache *cache) const {
  if (static_cast<int>(layers.size()) != cfg.layers)
    throw ValidationError("projector expects " + std::to_string(cfg.layers) +
                          " layers, got " + std::to_string(layers.size()));
  const Eigen::Index T = layers[0].cols();
  for (const auto &x : layers)
    if (x.rows() != cfg.input_dim || x.cols() != T || T == 0)
      throw ValidationError("projector expects layers of " +
                            std::to_string(cfg.input_dim) + "xT, got " +
                            dims(x.rows(), x.cols()));
  if (train && !rng) throw Error("projector: training forward needs an rng");
  Cache local;
  Cache &c = cache ? *cache : local;
  c.train = train;
  c.weights = layer_weights();
  c.pooled = c.weights(0) * layers[0];
  for (size_t l = 1; l < layers.size(); ++l)
    c.pooled += c.weights(static_cast<Eigen::Index>(l)) * layers[l];
  c.down = down.forward(c.pooled);
  if (train) {
    c.down_mask = dropout_mask(c.down.rows(), c.down.cols(), cfg.bottleneck_dropout, *rng);
    c.down_drop = c.down.cwiseProduct(c.down_mask);
  } else {
    c.down_drop = c.down;
  }
  c.up = up.forward(c.down_drop);
  if (train) {
    c.up_mask = dropout_mask(c.up.rows(), c.up.cols(), cfg.fc_dropout, *rng);
    c.up_drop = c.up.cwiseProduct(c.up_mask);
  } else {
    c.up_drop = c.up;
  }
  return head.forward(c.up_drop);
}

std::vector<Eigen::MatrixXd> Projector::backward(
    const std::vector<Eigen::MatrixXd> &layers, const Cache &c,
    const Eigen::MatrixXd &dout) {
  Eigen::MatrixXd d = head.backward(c.up_drop, dout);
  if (c.train) d = d.cwiseProduct(c.up_mask);
  d = up.backward(c.down_drop, d);
  if (c.train) d = d.cwiseProduct(c.down_mask);
  const Eigen::MatrixXd dpooled = down.backward(c.pooled, d);
  Eigen::VectorXd dw(cfg.layers);
  std::vector<Eigen::MatrixXd> dlayers;
  dlayers.reserve(layers.size());
  for (int l = 0; l < cfg.layers; ++l) {
    dw(l) = (dpooled.array() * layers[static_cast<size_t>(l)].array()).sum();
    dlayers.push_back(c.weights(l) * dpooled);
  }
  pool.grad.col(0) += softmax_backward(c.weights, dw);
  return dlayers;
}

void Projector::collect(const std::string &prefix, ParamList &out) {
  out.emplace_back(prefix + ".pool", &pool);
  down.collect(prefix + ".down", out);
  up.collect(prefix + ".up", out);
  head.collect(prefix + ".head", out);
}

Eigen::VectorXd temporal_average(const Eigen::MatrixXd &f) {
  if (f.cols() == 0) throw ValidationError("temporal_average of an empty sequence");
  return f.rowwise().mean();
}

// --- SSC loss --------------------------------------------------------------

namespace {

// ||Z Z^T - I||_F^2 for the batch-centred, row-normalized P (F' x B).
double redundancy_term(const Eigen::MatrixXd &P, Eigen::MatrixXd *dP) {
  const Eigen::MatrixXd c = P.colwise() - P.rowwise().mean();
  const Eigen::VectorXd n = (c.rowwise().squaredNorm().array() + kNormEps).sqrt();
  const Eigen::MatrixXd Z = n.cwiseInverse().asDiagonal() * c;
  const Eigen::MatrixXd E =
      Z * Z.transpose() - Eigen::MatrixXd::Identity(P.rows(), P.rows());
  if (dP) {
    const Eigen::MatrixXd dZ = 4.0 * E * Z;
    Eigen::MatrixXd dc(c.rows(), c.cols());
    for (Eigen::Index f = 0; f < c.rows(); ++f) {
      const double nf = n(f);
      dc.row(f) = dZ.row(f) / nf - c.row(f) * (c.row(f).dot(dZ.row(f)) / (nf * nf * nf));
    }
    *dP = dc.colwise() - dc.rowwise().mean();
  }
  return E.squaredNorm();
}

}  // namespace

LossBreakdown ssc_loss(const std::vector<Eigen::MatrixXd> &style,
                       const std::vector<Eigen::MatrixXd> &ling, double lambda,
                       SscGrad *grad) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw ValidationError("ssc_loss: lambda must lie in [0, 1]");
  if (style.empty() || style.size() != ling.size())
    throw ValidationError("ssc_loss: style and linguistics batches differ in size");
  const size_t B = style.size();
  const Eigen::Index Fp = style[0].rows();
  for (size_t b = 0; b < B; ++b) {
    if (style[b].rows() != Fp || ling[b].rows() != Fp ||
        style[b].cols() != ling[b].cols() || style[b].cols() == 0)
      throw ValidationError("ssc_loss: shape mismatch at item " + std::to_string(b) +
                            " (" + dims(style[b].rows(), style[b].cols()) + " vs " +
                            dims(ling[b].rows(), ling[b].cols()) + ")");
  }
  LossBreakdown out;
  out.lambda = lambda;
  Eigen::MatrixXd PS(Fp, static_cast<Eigen::Index>(B)), PL(Fp, static_cast<Eigen::Index>(B));
  for (size_t b = 0; b < B; ++b) {
    const auto T = static_cast<double>(style[b].cols());
    out.distance += (style[b] - ling[b]).squaredNorm() / T;
    PS.col(static_cast<Eigen::Index>(b)) = temporal_average(style[b]);
    PL.col(static_cast<Eigen::Index>(b)) = temporal_average(ling[b]);
  }
  out.distance /= static_cast<double>(B);
  Eigen::MatrixXd dPS, dPL;
  out.redundancy = redundancy_term(PS, grad ? &dPS : nullptr) +
                   redundancy_term(PL, grad ? &dPL : nullptr);
  out.total = out.distance + lambda * out.redundancy;
  if (grad) {
    grad->d_style.resize(B);
    grad->d_ling.resize(B);
    for (size_t b = 0; b < B; ++b) {
      const auto T = style[b].cols();
      const Eigen::MatrixXd dd =
          (2.0 / (static_cast<double>(B) * static_cast<double>(T))) * (style[b] - ling[b]);
      const auto ib = static_cast<Eigen::Index>(b);
      grad->d_style[b] = dd;
      grad->d_style[b].colwise() += (lambda / static_cast<double>(T)) * dPS.col(ib);
      grad->d_ling[b] = -dd;
      grad->d_ling[b].colwise() += (lambda / static_cast<double>(T)) * dPL.col(ib);
    }
  }
  return out;
}

LossBreakdown ssc_loss(const Eigen::MatrixXd &style, const Eigen::MatrixXd &ling,
                       double lambda) {
  return ssc_loss(std::vector<Eigen::MatrixXd>{style},
                  std::vector<Eigen::MatrixXd>{ling}, lambda);
}

// --- ASP -------------------------------------------------------------------

Asp::Asp(int input_dim, int attention_dim) {
  score_hidden.resize(input_dim, attention_dim);
  score_out.resize(1, attention_dim);
}

void Asp::init(Rng &rng) {
  score_hidden.init(rng);
  const double bound = 1.0 / std::sqrt(static_cast<double>(score_out.value.cols()));
  for (Eigen::Index i = 0; i < score_out.value.size(); ++i)
    score_out.value.data()[i] = rng.uniform(-bound, bound);
}

void Asp::zero_scores() { score_out.value.setZero(); }

Eigen::VectorXd Asp::attention(const Eigen::MatrixXd &input) const {
  Cache c;
  forward(input, &c);
  return c.alpha;
}

Eigen::VectorXd Asp::forward(const Eigen::MatrixXd &h, Cache *cache) const {
  if (h.cols() < 2)
    throw ValidationError("attentive pooling needs at least 2 frames, got " +
                          std::to_string(h.cols()));
  Cache local;
  Cache &c = cache ? *cache : local;
  c.z = score_hidden.forward(h).array().tanh().matrix();
  const Eigen::VectorXd e = (score_out.value * c.z).transpose();
  c.alpha = softmax(e);
  c.mean = h * c.alpha;
  c.var = h.cwiseAbs2() * c.alpha - c.mean.cwiseAbs2();
  c.sd = c.var.cwiseMax(kNormEps).cwiseSqrt();
  Eigen::VectorXd out(2 * h.rows());
  out << c.mean, c.sd;
  return out;
}

Eigen::MatrixXd Asp::backward(const Eigen::MatrixXd &h, const Cache &c,
                              const Eigen::VectorXd &dout) {
  const Eigen::Index F = h.rows();
  const Eigen::VectorXd dmu = dout.head(F);
  const Eigen::VectorXd dsd = dout.tail(F);
  Eigen::VectorXd dvar(F);
  for (Eigen::Index f = 0; f < F; ++f)
    dvar(f) = c.var(f) > kNormEps ? dsd(f) / (2.0 * c.sd(f)) : 0.0;
  const Eigen::VectorXd dmu_eff = dmu - 2.0 * c.mean.cwiseProduct(dvar);
  Eigen::MatrixXd dh = dmu_eff * c.alpha.transpose() +
                       2.0 * dvar.asDiagonal() * h * c.alpha.asDiagonal();
  const Eigen::VectorXd dalpha =
      h.transpose() * dmu_eff + h.cwiseAbs2().transpose() * dvar;
  const Eigen::VectorXd de = softmax_backward(c.alpha, dalpha);
  score_out.grad += de.transpose() * c.z.transpose();
  const Eigen::MatrixXd dz = score_out.value.transpose() * de.transpose();
  const Eigen::MatrixXd dpre = dz.cwiseProduct(
      (1.0 - c.z.array().square()).matrix());
  dh += score_hidden.backward(h, dpre);
  return dh;
}

void Asp::collect(const std::string &prefix, ParamList &out) {
  score_hidden.collect(prefix + ".score_hidden", out);
  out.emplace_back(prefix + ".score_out", &score_out);
}

// --- Classifier ------------------------------------------------------------

Classifier::Classifier(const ClassifierConfig &c)
    : cfg(c),
      asp_style(c.input_dim, c.attention_dim),
      asp_ling(c.input_dim, c.attention_dim),
      emb_style(2 * c.input_dim, c.dep_dim),
      emb_ling(2 * c.input_dim, c.dep_dim),
      fc(c.fused_dim(), c.hidden_dim),
      out(c.hidden_dim, 1) {
  if (c.dropout < 0 || c.dropout >= 1)
    throw ValidationError("classifier dropout must lie in [0, 1)");
}

void Classifier::init(Rng &rng) {
  asp_style.init(rng);
  asp_ling.init(rng);
  emb_style.init(rng);
  emb_ling.init(rng);
  fc.init(rng);
  out.init(rng);
}

Eigen::VectorXd Classifier::embed(int view, const Eigen::MatrixXd &input,
                                  EmbedCache *cache) const {
  EmbedCache local;
  EmbedCache &c = cache ? *cache : local;
  const Asp &asp = view == 0 ? asp_style : asp_ling;
  const Linear &lin = view == 0 ? emb_style : emb_ling;
  if (input.rows() != cfg.input_dim)
    throw ValidationError("classifier expects " + std::to_string(cfg.input_dim) +
                          "-dim SSL features, got " + std::to_string(input.rows()));
  c.pooled = asp.forward(input, &c.asp);
  return lin.forward(c.pooled);
}

Eigen::MatrixXd Classifier::embed_backward(int view, const Eigen::MatrixXd &input,
                                           const EmbedCache &c,
                                           const Eigen::VectorXd &demb) {
  Asp &asp = view == 0 ? asp_style : asp_ling;
  Linear &lin = view == 0 ? emb_style : emb_ling;
  const Eigen::VectorXd dpooled = lin.backward(c.pooled, demb);
  return asp.backward(input, c.asp, dpooled);
}

double Classifier::fuse_and_classify(const Eigen::VectorXd &dep_style,
                                     const Eigen::VectorXd &dep_ling,
                                     const Eigen::VectorXd &emb_style_v,
                                     const Eigen::VectorXd &emb_ling_v,
                                     bool train, Rng *rng, FuseCache *cache) const {
  const Eigen::Index D = cfg.dep_dim;
  auto check = [D](const Eigen::VectorXd &v, const char *name) {
    if (v.size() != D)
      throw ValidationError(std::string("classifier input ") + name + " has dim " +
                            std::to_string(v.size()) + ", expected " +
                            std::to_string(D));
  };
  if (cfg.use_dependency) {
    check(dep_style, "dep_style");
    check(dep_ling, "dep_ling");
  }
  check(emb_style_v, "emb_style");
  check(emb_ling_v, "emb_ling");
  if (train && !rng) throw Error("classifier: training forward needs an rng");
  FuseCache local;
  FuseCache &c = cache ? *cache : local;
  c.z.resize(cfg.fused_dim());
  if (cfg.use_dependency)
    c.z << dep_style, dep_ling, emb_style_v, emb_ling_v;
  else
    c.z << emb_style_v, emb_ling_v;
  c.pre = fc.forward(c.z);
  c.act = c.pre.unaryExpr([](double x) { return gelu(x); });
  if (train) {
    c.mask = dropout_mask(c.act.size(), 1, cfg.dropout, *rng);
    c.act_drop = c.act.cwiseProduct(c.mask);
  } else {
    c.mask.resize(0);
    c.act_drop = c.act;
  }
  return out.forward(c.act_drop)(0, 0);
}

Classifier::FuseGrad Classifier::fuse_backward(const FuseCache &c, double dlogit) {
  Eigen::MatrixXd dy(1, 1);
  dy(0, 0) = dlogit;
  Eigen::VectorXd dact = out.backward(c.act_drop, dy);
  if (c.mask.size()) dact = dact.cwiseProduct(c.mask);
  Eigen::VectorXd dpre(dact.size());
  for (Eigen::Index i = 0; i < dact.size(); ++i) dpre(i) = dact(i) * gelu_grad(c.pre(i));
  const Eigen::VectorXd dz = fc.backward(c.z, dpre);
  const Eigen::Index D = cfg.dep_dim;
  FuseGrad g;
  if (cfg.use_dependency) {
    g.dep_style = dz.segment(0, D);
    g.dep_ling = dz.segment(D, D);
    g.emb_style = dz.segment(2 * D, D);
    g.emb_ling = dz.segment(3 * D, D);
  } else {
    g.emb_style = dz.segment(0, D);
    g.emb_ling = dz.segment(D, D);
  }
  return g;
}

void Classifier::collect(const std::string &prefix, ParamList &out_list) {
  asp_style.collect(prefix + ".asp_style", out_list);
  asp_ling.collect(prefix + ".asp_ling", out_list);
  emb_style.collect(prefix + ".emb_style", out_list);
  emb_ling.collect(prefix + ".emb_ling", out_list);
  fc.collect(prefix + ".fc", out_list);
  out.collect(prefix + ".out", out_list);
}

// --- Losses ----------------------------------------------------------------

namespace {

double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_loss_inputs(const Eigen::VectorXd &logits, const Eigen::VectorXd &labels) {
  if (logits.size() == 0) throw ValidationError("loss of an empty batch");
  if (logits.size() != labels.size())
    throw ValidationError("logits and labels differ in length");
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    if (!std::isfinite(logits(i))) throw ValidationError("non-finite logit");
    if (labels(i) != 0.0 && labels(i) != 1.0)
      throw ValidationError("labels must be 0 (spoof) or 1 (bonafide)");
  }
}

}  // namespace

LossValue weighted_bce(const Eigen::VectorXd &logits, const Eigen::VectorXd &labels,
                       double bonafide_weight, double spoof_weight) {
  check_loss_inputs(logits, labels);
  const auto n = static_cast<double>(logits.size());
  LossValue r;
  r.dlogits.resize(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const double z = logits(i);
    if (labels(i) == 1.0) {
      r.loss += bonafide_weight * softplus(-z);
      r.dlogits(i) = -bonafide_weight * sigmoid(-z) / n;
    } else {
      r.loss += spoof_weight * softplus(z);
      r.dlogits(i) = spoof_weight * sigmoid(z) / n;
    }
  }
  r.loss /= n;
  return r;
}

LossValue focal_loss(const Eigen::VectorXd &logits, const Eigen::VectorXd &labels,
                     double gamma, double alpha) {
  check_loss_inputs(logits, labels);
  if (!(gamma >= 0.0)) throw ValidationError("focal loss gamma must be >= 0");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("focal loss alpha must lie in (0, 1)");
  const auto n = static_cast<double>(logits.size());
  LossValue r;
  r.dlogits.resize(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const bool pos = labels(i) == 1.0;
    const double zt = pos ? logits(i) : -logits(i);
    const double at = pos ? 2.0 * alpha : 2.0 * (1.0 - alpha);
    const double pt = sigmoid(zt);
    const double qt = sigmoid(-zt);  // 1 - p_t
    const double nll = softplus(-zt);  // -log p_t
    const double mod = gamma == 0.0 ? 1.0 : std::pow(qt, gamma);
    r.loss += at * mod * nll;
    const double dzt = at * mod * (-gamma * pt * nll - qt);
    r.dlogits(i) = (pos ? dzt : -dzt) / n;
  }
  r.loss /= n;
  return r;
}

// --- SlimModel -------------------------------------------------------------

ProjectorConfig ModelConfig::projector(int layers) const {
  ProjectorConfig p;
  p.layers = layers;
  p.input_dim = feature_dim;
  p.bottleneck_dim = bottleneck_dim;
  p.output_dim = dep_dim;
  p.bottleneck_dropout = bottleneck_dropout;
  p.fc_dropout = projector_fc_dropout;
  return p;
}

ClassifierConfig ModelConfig::classifier() const {
  ClassifierConfig c;
  c.input_dim = feature_dim;
  c.dep_dim = dep_dim;
  c.attention_dim = attention_dim;
  c.hidden_dim = hidden_dim;
  c.dropout = classifier_dropout;
  c.use_dependency = use_dependency;
  return c;
}

SlimModel::SlimModel(const ModelConfig &c)
    : cfg(c),
      style_proj(c.projector(c.views.style.size())),
      ling_proj(c.projector(c.views.linguistics.size())),
      cls(c.classifier()) {
  dep_mean.resize(2 * c.dep_dim, 1);
  dep_sd.resize(2 * c.dep_dim, 1);
  dep_sd.value.setOnes();
}

void SlimModel::init(Rng &rng) {
  Rng r1 = rng.split(1), r2 = rng.split(2), r3 = rng.split(3);
  style_proj.init(r1);
  ling_proj.init(r2);
  cls.init(r3);
  dep_mean.value.setZero();
  dep_sd.value.setOnes();
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> SlimModel::dependency_features(
    const LayeredRepresentation &rep) const {
  auto [s, l] = split_views(rep, cfg.views);
  return {temporal_average(style_proj.forward(s.layers, false, nullptr, nullptr)),
          temporal_average(ling_proj.forward(l.layers, false, nullptr, nullptr))};
}

void SlimModel::set_dependency_norm(const Eigen::VectorXd &mean,
                                    const Eigen::VectorXd &sd) {
  if (mean.size() != 2 * cfg.dep_dim || sd.size() != 2 * cfg.dep_dim)
    throw ValidationError("dependency normalization has the wrong size");
  if ((sd.array() <= 0).any()) throw ValidationError("dependency scale must be positive");
  dep_mean.value.col(0) = mean;
  dep_sd.value.col(0) = sd;
}

double SlimModel::forward(const LayeredRepresentation &rep, bool train,
                          bool train_projector, Rng *rng, ForwardState *state) const {
  ForwardState local;
  ForwardState &s = state ? *state : local;
  std::tie(s.style_view, s.ling_view) = split_views(rep, cfg.views);
  s.style_mean = s.style_view.layer_mean();
  s.ling_mean = s.ling_view.layer_mean();
  const Eigen::Index D = cfg.dep_dim;
  if (cfg.use_dependency) {
    s.dep_style_seq = style_proj.forward(s.style_view.layers, train_projector, rng,
                                         &s.style_cache);
    s.dep_ling_seq = ling_proj.forward(s.ling_view.layers, train_projector, rng,
                                       &s.ling_cache);
    const Eigen::VectorXd m = dep_mean.value.col(0), sd = dep_sd.value.col(0);
    s.dep_style = (temporal_average(s.dep_style_seq) - m.head(D))
                      .cwiseQuotient(sd.head(D));
    s.dep_ling = (temporal_average(s.dep_ling_seq) - m.tail(D))
                     .cwiseQuotient(sd.tail(D));
  }
  s.emb_style = cls.embed(0, s.style_mean, &s.emb_style_cache);
  s.emb_ling = cls.embed(1, s.ling_mean, &s.emb_ling_cache);
  s.logit = cls.fuse_and_classify(s.dep_style, s.dep_ling, s.emb_style, s.emb_ling,
                                  train, rng, &s.fuse);
  return s.logit;
}

void SlimModel::backward(ForwardState &s, double dlogit, bool into_projectors) {
  const Classifier::FuseGrad g = cls.fuse_backward(s.fuse, dlogit);
  cls.embed_backward(0, s.style_mean, s.emb_style_cache, g.emb_style);
  cls.embed_backward(1, s.ling_mean, s.emb_ling_cache, g.emb_ling);
  if (into_projectors && cfg.use_dependency) {
    const Eigen::Index D = cfg.dep_dim;
    const Eigen::VectorXd sd = dep_sd.value.col(0);
    auto spread = [](const Eigen::VectorXd &d, Eigen::Index T) {
      return Eigen::MatrixXd(d.replicate(1, T) / static_cast<double>(T));
    };
    style_proj.backward(s.style_view.layers, s.style_cache,
                        spread(g.dep_style.cwiseQuotient(sd.head(D)),
                               s.dep_style_seq.cols()));
    ling_proj.backward(s.ling_view.layers, s.ling_cache,
                       spread(g.dep_ling.cwiseQuotient(sd.tail(D)),
                              s.dep_ling_seq.cols()));
  }
}

double SlimModel::score(const LayeredRepresentation &rep) const {
  return forward(rep, false, false, nullptr, nullptr);
}

ParamList SlimModel::projector_params() {
  ParamList p;
  style_proj.collect("style_proj", p);
  ling_proj.collect("ling_proj", p);
  return p;
}

ParamList SlimModel::classifier_params() {
  ParamList p;
  cls.collect("cls", p);
  return p;
}

ParamList SlimModel::all_params() {
  ParamList p = projector_params();
  const ParamList c = classifier_params();
  p.insert(p.end(), c.begin(), c.end());
  return p;
}

ParamList SlimModel::buffers() {
  return {{"dep_norm.mean", &dep_mean}, {"dep_norm.sd", &dep_sd}};
}

}  // namespace sld
