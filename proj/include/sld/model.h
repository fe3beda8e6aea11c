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

#ifndef SLD_MODEL_H_
#define SLD_MODEL_H_

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "sld/encoder.h"
#include "sld/nn.h"

namespace sld {

// ---------------------------------------------------------------------------
// Projector: softmax-weighted layer pooling, one linear bottleneck
// (F -> B -> F) and a linear projection head (F -> F').

struct ProjectorConfig {
  int layers = 8;
  int input_dim = 768;
  int bottleneck_dim = 256;
  int output_dim = 256;
  double bottleneck_dropout = 0.1;
  double fc_dropout = 0.1;
};

class Projector {
 public:
  Projector() = default;
  explicit Projector(const ProjectorConfig &cfg);

  /// Pool logits start at zero (plain layer mean); linear maps are uniform.
  void init(Rng &rng);
  /// Pool logits zero, weights truncated identities, biases zero.
  void set_identity();

  struct Cache {
    Eigen::VectorXd weights;
    Eigen::MatrixXd pooled, down, down_mask, down_drop, up, up_mask, up_drop;
    bool train = false;
  };

  /// layers: cfg.layers matrices of input_dim x T. Returns output_dim x T.
  /// Dropout is active only when train is set (rng then required).
  Eigen::MatrixXd forward(const std::vector<Eigen::MatrixXd> &layers,
                          bool train, Rng *rng, Cache *cache) const;
  /// Accumulates parameter gradients; returns dL/d layers. `layers` must be
  /// the forward input.
  std::vector<Eigen::MatrixXd> backward(const std::vector<Eigen::MatrixXd> &layers,
                                        const Cache &cache,
                                        const Eigen::MatrixXd &dout);

  Eigen::VectorXd layer_weights() const;
  void collect(const std::string &prefix, ParamList &out);

  ProjectorConfig cfg;
  Param pool;  // layers x 1 logits
  Linear down, up, head;
};

/// Mean over time of an F x T matrix. Throws for T == 0.
Eigen::VectorXd temporal_average(const Eigen::MatrixXd &f);

// ---------------------------------------------------------------------------
// Self-supervised loss.

struct LossBreakdown {
  double total = 0.0;
  double distance = 0.0;
  double redundancy = 0.0;
  double lambda = 0.0;
};

/// Gradients of the total loss w.r.t. each S_b and L_b.
struct SscGrad {
  std::vector<Eigen::MatrixXd> d_style, d_ling;
};

inline constexpr double kSscLambda = 0.007;
inline constexpr double kNormEps = 1e-8;

/// Batch loss over utterances b with style features S_b and linguistics
/// features L_b (both F' x T_b):
///   distance   = mean_b (1/T_b) sum_t ||S_b[:,t] - L_b[:,t]||^2
///   redundancy = ||C_S - I||_F^2 + ||C_L - I||_F^2
/// where C = Z Z^T and Z (F' x B) holds the temporally averaged features,
/// each row centred over the batch and divided by sqrt(||row||^2 + 1e-8).
///   total = distance + lambda * redundancy
/// Throws ValidationError on shape mismatch or lambda outside [0, 1].
LossBreakdown ssc_loss(const std::vector<Eigen::MatrixXd> &style,
                       const std::vector<Eigen::MatrixXd> &ling, double lambda,
                       SscGrad *grad = nullptr);

/// Single-utterance form; with one utterance the centred pooled matrix is
/// zero, so the redundancy term is the constant 2 F'.
LossBreakdown ssc_loss(const Eigen::MatrixXd &style, const Eigen::MatrixXd &ling,
                       double lambda);

// ---------------------------------------------------------------------------
// Attentive statistics pooling.

class Asp {
 public:
  Asp() = default;
  Asp(int input_dim, int attention_dim);

  void init(Rng &rng);
  /// Zero scoring vector: uniform attention.
  void zero_scores();

  struct Cache {
    Eigen::MatrixXd z;
    Eigen::VectorXd alpha, mean, var, sd;
  };

  /// input F x T, T >= 2. Returns [mean; sd] (2F), sd = sqrt(max(var, 1e-8)).
  Eigen::VectorXd forward(const Eigen::MatrixXd &input, Cache *cache) const;
  /// Attention weights only (for inspection).
  Eigen::VectorXd attention(const Eigen::MatrixXd &input) const;
  Eigen::MatrixXd backward(const Eigen::MatrixXd &input, const Cache &cache,
                           const Eigen::VectorXd &dout);

  void collect(const std::string &prefix, ParamList &out);

  Linear score_hidden;  // A x F, tanh
  Param score_out;      // 1 x A
};

// ---------------------------------------------------------------------------
// Classifier.

struct ClassifierConfig {
  int input_dim = 768;       // F of the SSL representation
  int dep_dim = 256;         // F' of the dependency features
  int attention_dim = 128;   // ASP scoring hidden size
  int hidden_dim = 256;
  double dropout = 0.25;
  /// false: the dependency inputs are ignored (ablation without Stage 1).
  bool use_dependency = true;

  int fused_dim() const { return (use_dependency ? 4 : 2) * dep_dim; }
};

/// Fusion input is [dep_style, dep_ling, emb_style, emb_ling]; emb_* come
/// from ASP over the layer mean of each view followed by a linear map
/// 2F -> F'. The head is linear -> GELU -> dropout -> linear -> logit.
/// Higher logits mean bonafide.
class Classifier {
 public:
  Classifier() = default;
  explicit Classifier(const ClassifierConfig &cfg);

  void init(Rng &rng);

  struct EmbedCache {
    Asp::Cache asp;
    Eigen::VectorXd pooled;
  };
  /// view 0 = style, 1 = linguistics; input F x T.
  Eigen::VectorXd embed(int view, const Eigen::MatrixXd &input,
                        EmbedCache *cache) const;
  Eigen::MatrixXd embed_backward(int view, const Eigen::MatrixXd &input,
                                 const EmbedCache &cache,
                                 const Eigen::VectorXd &demb);

  struct FuseCache {
    Eigen::VectorXd z, pre, act, mask, act_drop;
  };
  struct FuseGrad {
    Eigen::VectorXd dep_style, dep_ling, emb_style, emb_ling;
  };
  /// Throws ValidationError when an input is not dep_dim long.
  double fuse_and_classify(const Eigen::VectorXd &dep_style,
                           const Eigen::VectorXd &dep_ling,
                           const Eigen::VectorXd &emb_style,
                           const Eigen::VectorXd &emb_ling, bool train,
                           Rng *rng, FuseCache *cache) const;
  FuseGrad fuse_backward(const FuseCache &cache, double dlogit);

  void collect(const std::string &prefix, ParamList &out);

  ClassifierConfig cfg;
  Asp asp_style, asp_ling;
  Linear emb_style, emb_ling;
  Linear fc, out;
};

// ---------------------------------------------------------------------------
// Classification losses. Labels: 1 = bonafide, 0 = spoof.

struct LossValue {
  double loss = 0.0;
  Eigen::VectorXd dlogits;
};

inline constexpr double kBonafideWeight = 10.0;

/// mean_i w_i * BCE(logit_i, y_i), w = bonafide_weight for y = 1 and
/// spoof_weight for y = 0. Throws ValidationError on empty input, labels
/// outside {0, 1} or non-finite logits.
LossValue weighted_bce(const Eigen::VectorXd &logits,
                       const Eigen::VectorXd &labels,
                       double bonafide_weight = kBonafideWeight,
                       double spoof_weight = 1.0);

/// mean_i -a_t (1 - p_t)^gamma log p_t with a_t = 2 alpha for bonafide and
/// 2 (1 - alpha) for spoof, so alpha = 0.5, gamma = 0 is exactly BCE.
LossValue focal_loss(const Eigen::VectorXd &logits,
                     const Eigen::VectorXd &labels, double gamma,
                     double alpha = 0.5);

// ---------------------------------------------------------------------------
// Full model.

struct ModelConfig {
  LayerViewSpec views;
  int feature_dim = 768;
  int bottleneck_dim = 256;
  int dep_dim = 256;
  int attention_dim = 128;
  int hidden_dim = 256;
  double bottleneck_dropout = 0.1;
  double projector_fc_dropout = 0.1;
  double classifier_dropout = 0.25;
  bool use_dependency = true;

  ProjectorConfig projector(int layers) const;
  ClassifierConfig classifier() const;
};

/// Everything needed to score one utterance, cached for backward.
struct ForwardState {
  LayeredRepresentation style_view, ling_view;
  Eigen::MatrixXd style_mean, ling_mean;
  Projector::Cache style_cache, ling_cache;
  Eigen::MatrixXd dep_style_seq, dep_ling_seq;
  Eigen::VectorXd dep_style, dep_ling;  // standardized pooled features
  Classifier::EmbedCache emb_style_cache, emb_ling_cache;
  Eigen::VectorXd emb_style, emb_ling;
  Classifier::FuseCache fuse;
  double logit = 0.0;
};

class SlimModel {
 public:
  SlimModel() = default;
  explicit SlimModel(const ModelConfig &cfg);

  void init(Rng &rng);

  /// Pooled, unstandardized dependency features of one utterance
  /// (projectors in eval mode).
  std::pair<Eigen::VectorXd, Eigen::VectorXd> dependency_features(
      const LayeredRepresentation &rep) const;

  /// Sets the fixed standardization applied to the dependency features.
  void set_dependency_norm(const Eigen::VectorXd &mean, const Eigen::VectorXd &sd);

  /// Scores one utterance. Projector dropout follows train_projector, the
  /// classifier dropout follows train.
  double forward(const LayeredRepresentation &rep, bool train,
                 bool train_projector, Rng *rng, ForwardState *state) const;
  /// Backpropagates dlogit into the classifier and, when requested, the
  /// projectors.
  void backward(ForwardState &state, double dlogit, bool into_projectors);

  /// Inference score (no dropout, full length).
  double score(const LayeredRepresentation &rep) const;

  ParamList projector_params();
  ParamList classifier_params();
  ParamList all_params();
  /// Non-trainable tensors saved with the model.
  ParamList buffers();

  ModelConfig cfg;
  Projector style_proj, ling_proj;
  Classifier cls;
  Param dep_mean, dep_sd;  // 2F' x 1, style then linguistics
};

}  // namespace sld

#endif  // SLD_MODEL_H_
