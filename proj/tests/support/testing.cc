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

#include "testing.h"

#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace sld::testing {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, Rng &rng, double scale) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

Eigen::VectorXd random_vector(Eigen::Index n, Rng &rng, double scale) {
  return random_matrix(n, 1, rng, scale);
}

double max_rel_error(const Eigen::MatrixXd &a, const Eigen::MatrixXd &n) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double x = a.data()[i], y = n.data()[i];
    const double denom = std::max({1.0, std::abs(x), std::abs(y)});
    worst = std::max(worst, std::abs(x - y) / denom);
  }
  return worst;
}

Eigen::MatrixXd numeric_grad(Eigen::MatrixXd &x, const std::function<double()> &f, double h) {
  Eigen::MatrixXd g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x.data()[i];
    x.data()[i] = keep + h;
    const double up = f();
    x.data()[i] = keep - h;
    const double down = f();
    x.data()[i] = keep;
    g.data()[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double param_grad_error(const ParamList &params, const std::function<double()> &f, double h) {
  double worst = 0.0;
  for (const auto &[name, p] : params) {
    const Eigen::MatrixXd analytic = p->grad;
    const Eigen::MatrixXd numeric = numeric_grad(p->value, f, h);
    worst = std::max(worst, max_rel_error(analytic, numeric));
  }
  return worst;
}

TempDir::TempDir(const std::string &tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("sld_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string TempDir::str(const std::string &name) const {
  return name.empty() ? path_.string() : (path_ / name).string();
}

std::string read_file(const std::string &path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace sld::testing
