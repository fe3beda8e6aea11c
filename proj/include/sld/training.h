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

#ifndef SLD_TRAINING_H_
#define SLD_TRAINING_H_

#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sld/audio_io.h"
#include "sld/augment.h"
#include "sld/encoder.h"
#include "sld/model.h"

namespace sld {

enum class LossChoice { kWeightedBce, kFocal };

std::string_view loss_choice_name(LossChoice c);
LossChoice parse_loss_choice(std::string_view name);

struct StageConfig {
  int stage = 1;
  int batch_size = 16;
  int epochs = 50;
  double max_audio_s = 10.0;
  AdamWConfig optimizer;
  double lr_start = 0.005;
  double lr_end = 0.0001;
  int early_stop_patience = 3;
  uint64_t seed = 0;
  bool length_sorted = true;
  bool remove_silence = false;
  SilenceConfig silence;

  // Stage 1.
  double lambda = kSscLambda;

  // Stage 2.
  LossChoice loss = LossChoice::kWeightedBce;
  double bonafide_weight = kBonafideWeight;
  double focal_gamma = 2.0;
  double focal_alpha = 0.5;
  bool augment = true;
  RawBoostConfig rawboost;
  /// Also update the projectors in Stage 2 (default: frozen).
  bool finetune_projector = false;

  /// Throws ValidationError listing every violated invariant.
  void validate() const;
};

StageConfig stage1_defaults();
StageConfig stage2_defaults();

/// lr_start + (lr_end - lr_start) * step / total_steps.
/// Throws ValidationError for total_steps == 0 or step outside [0, total].
double lr_at(int64_t step, int64_t total_steps, const StageConfig &cfg);

/// Lower metric is better; ties do not count as improvement.
struct EarlyStopping {
  int patience = 3;
  double best = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  int bad_epochs = 0;
  int epochs_seen = 0;
};

enum class StopDecision { kContinue, kStop };

/// Records one epoch's metric. Returns kStop after `patience` consecutive
/// non-improving epochs.
StopDecision early_stop_update(EarlyStopping &state, double val_metric);

/// A model snapshot plus the state needed to resume training.
struct Checkpoint {
  std::string stage;  // "stage1" or "stage2"
  int epoch = -1;     // last completed epoch (0-based)
  double metric = std::numeric_limits<double>::quiet_NaN();
  std::string config_fingerprint;
  /// Flattened config the checkpoint was trained under.
  std::map<std::string, std::string> config_keys;
  std::string rng_state;
  ModelConfig model;
  std::map<std::string, Eigen::MatrixXd> tensors;

  // Resume state; empty in best-model checkpoints.
  bool resumable = false;
  int64_t global_step = 0;
  int64_t optimizer_steps = 0;
  std::map<std::string, Eigen::MatrixXd> optimizer_m, optimizer_v;
  std::map<std::string, Eigen::MatrixXd> best_tensors;
  EarlyStopping early;
  std::vector<std::string> history;  // JSON lines logged so far
};

/// Binary layout: "SLDCKPT\n", u32 version (1), u64 header length, a JSON
/// header (stage, epoch, metric, fingerprint, RNG state, model config and a
/// tensor manifest of name, rows, cols, byte offset), then the tensors as
/// little-endian float64 in column-major order.
void save_checkpoint(const std::string &path, const Checkpoint &ckpt);
/// Throws LoadError on a missing, truncated or incompatible file.
Checkpoint load_checkpoint(const std::string &path);

/// Builds a model from the checkpoint's config and tensors.
SlimModel model_from_checkpoint(const Checkpoint &ckpt);

struct TrainData {
  std::vector<SampleRecord> records;
  AudioProvider audio;
};

struct TrainOptions {
  /// Directory for "<stage>_last.ckpt" (written every epoch) and
  /// "<stage>_best.ckpt". Empty: nothing is written.
  std::string checkpoint_dir;
  /// JSON-lines training log. Empty: not written.
  std::string log_path;
  /// Resume from a "_last" checkpoint.
  std::optional<std::string> resume_from;
  /// Return after this many completed epochs in this call (simulates an
  /// interruption); negative: run to completion.
  int max_epochs_this_run = -1;
  /// Encoder calls within a batch may run on this many threads.
  int workers = 1;
  std::string config_fingerprint;
  std::map<std::string, std::string> config_keys;
  /// Upper bound on cached encoder outputs, in bytes.
  size_t encode_cache_bytes = size_t{512} << 20;
  /// Called with every JSON log line.
  std::function<void(const std::string &)> on_log;
};

struct StageResult {
  Checkpoint best;
  /// Equal to best unless training was interrupted.
  Checkpoint last;
  bool complete = false;
  std::vector<std::string> log_lines;
};

/// Self-supervised Stage 1 on bonafide speech. Only the projectors train.
/// Early stopping tracks validation L_SSC (training L_SSC when `valid` is
/// empty). Throws ValidationError if any record is not bonafide.
StageResult pretrain_stage1(const TrainData &train, const TrainData &valid,
                            const EncoderHandle &encoder,
                            const ModelConfig &model_cfg, const StageConfig &cfg,
                            const TrainOptions &options);

/// Supervised Stage 2. With model_cfg.use_dependency the projectors come
/// from `stage1` (required); without it the classifier sees only the pooled
/// SSL embeddings. Early stopping tracks validation EER. Throws
/// ValidationError when the training data lacks either class.
StageResult train_stage2(const TrainData &train, const TrainData &valid,
                         const EncoderHandle &encoder, const Checkpoint *stage1,
                         const ModelConfig &model_cfg, const StageConfig &cfg,
                         const TrainOptions &options);

/// Loads, optionally removes silence and (training only) truncates.
Waveform prepare_waveform(const TrainData &data, const SampleRecord &r,
                          const StageConfig &cfg, bool training);

/// Scores each record independently at full length (no padding), using up
/// to `workers` threads. Errors are reported per record.
struct ScoreOutcome {
  std::vector<std::optional<double>> scores;
  std::vector<std::string> errors;  // empty string when the record scored
};
ScoreOutcome score_records(const SlimModel &model, const EncoderHandle &encoder,
                           const TrainData &data, bool remove_silence,
                           const SilenceConfig &silence, int workers);

/// Runs fn(i) for i in [0, n) on up to `workers` threads; the first
/// exception is rethrown after all threads finish.
void parallel_for(size_t n, int workers, const std::function<void(size_t)> &fn);

}  // namespace sld

#endif  // SLD_TRAINING_H_
