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

#ifndef SLD_SCORING_H_
#define SLD_SCORING_H_

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sld/corpus.h"

namespace sld {

enum class Polarity { kHigherIsBonafide, kHigherIsSpoof };

std::string_view polarity_name(Polarity p);
Polarity parse_polarity(std::string_view text);

/// Detection cost parameters. The target class is bonafide: a miss rejects
/// bonafide speech, a false alarm accepts a spoof. The default prior
/// (0.95 bonafide, i.e. 0.05 spoof) with C_miss = 1, C_fa = 10 is the
/// ASVspoof 5 setting.
struct DcfParams {
  double cost_miss = 1.0;
  double cost_fa = 10.0;
  double prior_target = 0.95;

  void validate() const;
  bool operator==(const DcfParams &) const = default;
};

/// Decisions accept (call bonafide) when the score is >= threshold for
/// kHigherIsBonafide, <= threshold for kHigherIsSpoof.
struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

struct DcfResult {
  double min_dcf = 0.0;
  double threshold = 0.0;
};

/// Labels: 1 = bonafide, 0 = spoof.
///
/// The ROC vertices are the distinct scores plus +inf (accept nothing).
/// The EER is read at the first vertex where the miss rate reaches the
/// false-alarm rate, interpolating linearly from the previous vertex; the
/// returned threshold is that vertex (the largest score when the vertex is
/// +inf). Throws ValidationError unless both classes are present and all
/// scores are finite.
EerResult compute_eer(std::span<const double> scores, std::span<const int> labels,
                      Polarity polarity = Polarity::kHigherIsBonafide);

/// Minimum over the same vertices of
///   C_miss * pi * P_miss + C_fa * (1 - pi) * P_fa,
/// divided by min(C_miss * pi, C_fa * (1 - pi)). The first minimizing vertex
/// is returned (+inf when rejecting everything is optimal).
DcfResult compute_min_dcf(std::span<const double> scores,
                          std::span<const int> labels, const DcfParams &params,
                          Polarity polarity = Polarity::kHigherIsBonafide);

/// Affine map llr = scale * s + offset on bonafide-oriented scores.
struct CalibrationMap {
  double scale = 1.0;
  double offset = 0.0;
  Polarity polarity = Polarity::kHigherIsBonafide;
};

/// Fits scale and offset by Newton's method on the class-balanced logistic
/// log-likelihood (effective prior 0.5). The scale is kept positive.
CalibrationMap calibrate_llr(std::span<const double> scores,
                             std::span<const int> labels,
                             Polarity polarity = Polarity::kHigherIsBonafide);
std::vector<double> apply_llr(const CalibrationMap &map,
                              std::span<const double> scores);

/// Mean log2 cost of calibrated LLRs (Cllr), for reporting.
double cllr(std::span<const double> llrs, std::span<const int> labels);

// ---------------------------------------------------------------------------
// Score files.

struct ScoreRow {
  std::string utt_id;
  double score = 0.0;
  Label label = Label::kUnknown;
  std::optional<std::string> attack_id;
  std::optional<std::string> codec_id;

  bool operator==(const ScoreRow &) const = default;
};

struct ScoreError {
  std::string utt_id;
  std::string message;

  bool operator==(const ScoreError &) const = default;
};

/// Tab-separated text:
///   # polarity=higher_is_bonafide
///   # config_fingerprint=<hex>          (optional)
///   utt_id<TAB>score[<TAB>label<TAB>attack<TAB>codec]
///   # error<TAB>utt_id<TAB>message      (records that failed to score)
/// "-" marks absent label/attack/codec. Scores are written in shortest
/// round-trip form.
struct ScoreFile {
  Polarity polarity = Polarity::kHigherIsBonafide;
  std::string config_fingerprint;
  std::vector<ScoreRow> rows;
  std::vector<ScoreError> errors;

  bool operator==(const ScoreFile &) const = default;
};

std::string serialize_scores(const ScoreFile &file);
/// Throws ParseError on malformed lines, ValidationError on duplicate ids
/// or non-finite scores.
ScoreFile parse_scores(std::string_view text);
ScoreFile read_score_file(const std::string &path);
void write_score_file(const std::string &path, const ScoreFile &file);

/// Fills label/attack/codec of each row from the manifest. Returns the ids
/// that have no manifest entry (rows are left unchanged for them).
std::vector<std::string> attach_metadata(ScoreFile &file,
                                         const std::vector<SampleRecord> &records);

// ---------------------------------------------------------------------------
// Breakdown by attack and codec.

inline constexpr const char *kPooled = "*";
inline constexpr const char *kMissing = "-";

struct BreakdownCell {
  std::string attack;  // attack id, "-" (spoof without attack) or "*" (pool)
  std::string codec;   // codec id, "-" or "*"
  size_t n_bonafide = 0;
  size_t n_spoof = 0;
  std::optional<double> min_dcf;  // unset when a class is missing ("NA")
  std::optional<double> eer;

  bool operator==(const BreakdownCell &) const = default;
};

/// Cell (a, c) pools the bonafide trials of codec c with the spoof trials
/// of attack a and codec c. Row pools (a, *) use every codec, column pools
/// (*, c) every attack and (*, *) is the whole trial list. Without a codec
/// axis only rows (a, *) exist; without an attack axis only columns (*, c);
/// with neither, only the overall pool. Pools sweep their own thresholds.
struct BreakdownTable {
  DcfParams params;
  Polarity polarity = Polarity::kHigherIsBonafide;
  std::string config_fingerprint;
  std::vector<std::string> attacks;  // sorted, without "*"
  std::vector<std::string> codecs;
  std::vector<BreakdownCell> cells;  // grid cells, then row, column and overall pools

  const BreakdownCell *find(const std::string &attack, const std::string &codec) const;
  /// Unweighted mean of the defined (a, *) row minDCFs ("average minDCF").
  std::optional<double> attack_average_min_dcf() const;

  bool operator==(const BreakdownTable &) const = default;
};

/// Rows without a label are ignored.
BreakdownTable breakdown_report(const ScoreFile &file, const DcfParams &params);

/// Long-format CSV with a "# key=value" stamp line:
///   attack,codec,n_bonafide,n_spoof,min_dcf,eer
std::string breakdown_csv(const BreakdownTable &table);
BreakdownTable parse_breakdown_csv(std::string_view text);
/// Aligned attack x codec minDCF grid followed by the pooled summary.
std::string breakdown_text(const BreakdownTable &table);

}  // namespace sld

#endif  // SLD_SCORING_H_
