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

#ifndef SLD_CLI_H_
#define SLD_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace sld {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Runs the `sld` command line. args excludes the program name.
///
///   sld pretrain   Stage 1 on data.pretrain
///   sld train      Stage 2 on data.train
///   sld score      scores data.score (or --manifest) with a checkpoint
///   sld eval       metrics, calibration and breakdown of a score file
///   sld synth-toy  writes a synthetic toy corpus
///   sld config     prints the resolved config
///
/// Output layout under the output directory: checkpoints/, logs/, scores/,
/// reports/. Returns 0 on success, 1 on validation errors, 2 on runtime
/// errors.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

}  // namespace sld

#endif  // SLD_CLI_H_
