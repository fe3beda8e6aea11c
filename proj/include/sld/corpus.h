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

#ifndef SLD_CORPUS_H_
#define SLD_CORPUS_H_

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sld {

enum class Label { kBonafide, kSpoof, kUnknown };

std::string_view label_name(Label label);
/// Accepts "bonafide"/"spoof" (and "-"/"" for unknown). Throws ValidationError.
Label parse_label(std::string_view text);

/// One utterance of a dataset manifest.
struct SampleRecord {
  std::string utt_id;
  std::string audio_path;
  Label label = Label::kUnknown;
  std::optional<std::string> attack_id;
  std::optional<std::string> codec_id;
  std::optional<std::string> speaker_id;
  /// Unset when the manifest carries no duration; resolved at audio load.
  std::optional<double> duration_s;
  /// Columns the format does not interpret, preserved verbatim.
  std::map<std::string, std::string> extra;

  bool operator==(const SampleRecord &) const = default;
};

struct PartitionSummary {
  size_t n_bonafide = 0;
  size_t n_spoof = 0;
  size_t n_attacks = 0;
  /// Mean over the records that carry a duration; 0 when none do.
  double mean_duration_s = 0.0;

  bool operator==(const PartitionSummary &) const = default;
};

enum class ManifestFormat { kAsvspoofProtocol, kCsv };

ManifestFormat parse_manifest_format(std::string_view name);

/// Parses manifest text into records.
///
/// asvspoof_protocol: whitespace-separated
///   `speaker_id utt_id codec_id attack_id label [extra...]`
/// where "-" marks an absent field; extra tokens land in `extra` under
/// "col5", "col6", .... audio_path defaults to `<utt_id>.wav`.
///
/// csv: a header row naming columns; known columns are utt_id (required),
/// path, label, attack, codec, speaker, duration. Any other column is kept
/// in `extra` (empty cells are omitted). Fields may be double-quoted.
///
/// In both formats blank lines and lines starting with '#' are skipped.
/// Throws ParseError (with the line number) on malformed lines and
/// ValidationError on duplicate utt_ids or invariant violations.
std::vector<SampleRecord> parse_manifest(std::string_view text,
                                         ManifestFormat format);

/// Canonical text for a record list. parse(serialize(r)) == r.
std::string serialize_manifest(const std::vector<SampleRecord> &records,
                               ManifestFormat format);

std::vector<SampleRecord> read_manifest_file(const std::string &path,
                                             ManifestFormat format);
void write_manifest_file(const std::string &path,
                         const std::vector<SampleRecord> &records,
                         ManifestFormat format);

/// Counts per class and mean duration. Throws ValidationError if any record
/// is unlabeled.
PartitionSummary summarize_partition(const std::vector<SampleRecord> &records);

/// Checks per-record and cross-record invariants. Throws ValidationError.
void validate_records(const std::vector<SampleRecord> &records);

}  // namespace sld

#endif  // SLD_CORPUS_H_
