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

#ifndef SLD_NN_H_
#define SLD_NN_H_

#include <Eigen/Dense>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sld/common.h"

namespace sld {

/// A trainable tensor with its accumulated gradient.
struct Param {
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;

  void resize(Eigen::Index rows, Eigen::Index cols) {
    value = Eigen::MatrixXd::Zero(rows, cols);
    grad = Eigen::MatrixXd::Zero(rows, cols);
  }
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Named, ordered parameter references; names form the checkpoint manifest.
using ParamList = std::vector<std::pair<std::string, Param *>>;

/// y = W x + b applied column-wise (inputs are features x time).
struct Linear {
  Param weight;  // out x in
  Param bias;    // out x 1

  Linear() = default;
  Linear(int in, int out) { resize(in, out); }
  void resize(int in, int out) {
    weight.resize(out, in);
    bias.resize(out, 1);
  }
  int in_dim() const { return static_cast<int>(weight.value.cols()); }
  int out_dim() const { return static_cast<int>(weight.value.rows()); }

  /// U(-1/sqrt(in), 1/sqrt(in)) for weight and bias.
  void init(Rng &rng);

  Eigen::MatrixXd forward(const Eigen::MatrixXd &x) const;
  /// Accumulates parameter gradients and returns dL/dx.
  Eigen::MatrixXd backward(const Eigen::MatrixXd &x, const Eigen::MatrixXd &dy);

  void collect(const std::string &prefix, ParamList &out);
};

/// Inverted-dropout mask: entries 0 with probability p, else 1/(1-p).
Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double p,
                             Rng &rng);

double gelu(double x);
double gelu_grad(double x);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Decoupled-weight-decay Adam.
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  void step(const ParamList &params, double lr);
  int64_t steps() const { return t_; }

  /// Moment state keyed by parameter name, for checkpoints.
  struct Moments {
    Eigen::MatrixXd m, v;
  };
  const std::map<std::string, Moments> &moments() const { return state_; }
  void restore(int64_t steps, std::map<std::string, Moments> state) {
    t_ = steps;
    state_ = std::move(state);
  }

 private:
  AdamWConfig cfg_;
  int64_t t_ = 0;
  std::map<std::string, Moments> state_;
};

}  // namespace sld

#endif  // SLD_NN_H_
