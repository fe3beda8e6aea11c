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

#ifndef SLD_CONFIG_H_
#define SLD_CONFIG_H_

#include <map>
#include <string>
#include <vector>

#include "sld/augment.h"
#include "sld/corpus.h"
#include "sld/encoder.h"
#include "sld/model.h"
#include "sld/scoring.h"
#include "sld/training.h"

namespace sld {

struct DataConfig {
  ManifestFormat format = ManifestFormat::kCsv;
  /// Relative audio paths resolve against this directory; empty means the
  /// directory of the manifest that lists them.
  std::string audio_root;
  std::string pretrain;        // bonafide-only Stage 1 training manifest
  std::string pretrain_valid;  // optional
  std::string train;           // labeled Stage 2 training manifest
  std::string valid;           // optional
  std::string score;           // manifest scored by `sld score`
};

/// Everything a run needs. Defaults reproduce the reference hyperparameters.
struct RunConfig {
  uint64_t seed = 0;
  int workers = 1;
  /// Empty: $SLD_OUTPUT_ROOT, or "sld_runs" when that is unset.
  std::string output_dir;
  Polarity polarity = Polarity::kHigherIsBonafide;

  std::string encoder = "toy";
  bool include_embedding_layer = false;

  /// model.views and the dropout/width fields are read from the file;
  /// model.feature_dim always comes from the encoder.
  ModelConfig model;
  DataConfig data;
  bool remove_silence = false;
  SilenceConfig silence;
  StageConfig stage1 = stage1_defaults();
  StageConfig stage2 = stage2_defaults();
  /// Preset file the rawboost section is applied on top of (empty: the
  /// built-in preset).
  std::string rawboost_preset;
  RawBoostConfig rawboost = default_rawboost_preset();
  DcfParams dcf;

  /// Throws ValidationError listing every problem.
  void validate() const;
};

/// Parses YAML. Unknown keys, type errors and invariant violations are all
/// collected into one ValidationError. Relative paths are kept as written.
RunConfig parse_run_config(const std::string &yaml_text);
RunConfig load_run_config(const std::string &path);
/// Resolved config as YAML; parse_run_config(dump_run_config(c)) == c.
std::string dump_run_config(const RunConfig &cfg);

/// Copies the run-level settings (seed-derived stage seeds, silence,
/// rawboost, workers) into the stage configs.
void resolve_run_config(RunConfig &cfg);

using ConfigKeys = std::map<std::string, std::string>;

/// Flattened dotted keys of the resolved config.
ConfigKeys config_keys(const RunConfig &cfg);
/// Keys that change what a trained model computes at inference: encoder,
/// views, model and silence handling.
ConfigKeys model_config_keys(const RunConfig &cfg);
/// Model keys plus the seed and the given stage's training keys (and the
/// RawBoost keys for stage 2).
ConfigKeys stage_config_keys(const RunConfig &cfg, int stage);
/// FNV-1a over "key=value\n" lines in key order, as 16 hex digits.
std::string config_fingerprint(const ConfigKeys &keys);
/// Keys present in only one map or with different values, sorted.
std::vector<std::string> divergent_keys(const ConfigKeys &a, const ConfigKeys &b);

/// $SLD_OUTPUT_ROOT, else "sld_runs".
std::string default_output_root();

}  // namespace sld

#endif  // SLD_CONFIG_H_
