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

// Helpers shared by the unit, integration and acceptance tests.

#ifndef SLD_TESTS_SUPPORT_TESTING_H_
#define SLD_TESTS_SUPPORT_TESTING_H_

#include <Eigen/Dense>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "sld/common.h"
#include "sld/nn.h"

namespace sld::testing {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, Rng &rng,
                              double scale = 1.0);
Eigen::VectorXd random_vector(Eigen::Index n, Rng &rng, double scale = 1.0);

/// max_i |a_i - n_i| / max(1, |a_i|, |n_i|).
double max_rel_error(const Eigen::MatrixXd &analytic, const Eigen::MatrixXd &numeric);

/// Central-difference gradient of f with respect to every entry of x.
Eigen::MatrixXd numeric_grad(Eigen::MatrixXd &x, const std::function<double()> &f,
                             double h = 1e-4);

/// Worst relative error of the accumulated .grad of every parameter in
/// `params` against central differences of f. Gradients must already hold
/// the analytic values.
double param_grad_error(const ParamList &params, const std::function<double()> &f,
                        double h = 1e-4);

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string &tag);
  ~TempDir();
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;

  const std::filesystem::path &path() const { return path_; }
  std::string str(const std::string &name = "") const;

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::string &path);

}  // namespace sld::testing

#endif  // SLD_TESTS_SUPPORT_TESTING_H_
