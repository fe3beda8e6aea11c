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

#include "sld/nn.h"

#include <cmath>
#include <numbers>

namespace sld {

void Linear::init(Rng &rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim()));
  for (Eigen::Index i = 0; i < weight.value.size(); ++i)
    weight.value.data()[i] = rng.uniform(-bound, bound);
  for (Eigen::Index i = 0; i < bias.value.size(); ++i)
    bias.value.data()[i] = rng.uniform(-bound, bound);
}

Eigen::MatrixXd Linear::forward(const Eigen::MatrixXd &x) const {
  if (x.rows() != weight.value.cols())
    throw ValidationError("linear layer expects " +
                          std::to_string(weight.value.cols()) +
                          " input features, got " + std::to_string(x.rows()));
  Eigen::MatrixXd y = weight.value * x;
  y.colwise() += bias.value.col(0);
  return y;
}

Eigen::MatrixXd Linear::backward(const Eigen::MatrixXd &x,
                                 const Eigen::MatrixXd &dy) {
  weight.grad.noalias() += dy * x.transpose();
  bias.grad.col(0) += dy.rowwise().sum();
  return weight.value.transpose() * dy;
}

void Linear::collect(const std::string &prefix, ParamList &out) {
  out.emplace_back(prefix + ".weight", &weight);
  out.emplace_back(prefix + ".bias", &bias);
}

Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double p,
                             Rng &rng) {
  Eigen::MatrixXd m(rows, cols);
  const double keep = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = rng.uniform() < p ? 0.0 : keep;
  return m;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

void AdamW::step(const ParamList &params, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (const auto &[name, p] : params) {
    auto &s = state_[name];
    if (s.m.size() == 0) {
      s.m = Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols());
      s.v = Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols());
    }
    p->value *= 1.0 - lr * cfg_.weight_decay;
    s.m = cfg_.beta1 * s.m + (1.0 - cfg_.beta1) * p->grad;
    s.v = cfg_.beta2 * s.v + (1.0 - cfg_.beta2) * p->grad.cwiseAbs2();
    p->value.array() -= lr * (s.m.array() / bc1) /
                        ((s.v.array() / bc2).sqrt() + cfg_.eps);
  }
}

}  // namespace sld
