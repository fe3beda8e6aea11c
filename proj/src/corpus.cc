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

#include "sld/corpus.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "sld/common.h"

namespace sld {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' ||
                        s.front() == '\r' || s.front() == '\n'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' ||
                        s.back() == '\r' || s.back() == '\n'))
    s.remove_suffix(1);
  return s;
}

// Splits into lines, keeping 1-based line numbers of non-skippable lines.
std::vector<std::pair<int, std::string_view>> content_lines(
    std::string_view text) {
  std::vector<std::pair<int, std::string_view>> out;
  int line_no = 0;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string_view line = trim(text.substr(pos, end - pos));
    if (!line.empty() && line.front() != '#') out.emplace_back(line_no, line);
    pos = end + 1;
  }
  return out;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> tokens;
  size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) tokens.push_back(line.substr(start, i - start));
  }
  return tokens;
}

std::optional<std::string> dash_to_opt(std::string_view s) {
  if (s.empty() || s == "-") return std::nullopt;
  return std::string(s);
}

std::vector<std::string> split_csv(std::string_view line, int line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      if (!cur.empty() || was_quoted)
        throw ParseError(line_no, "stray quote inside unquoted field");
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      fields.push_back(was_quoted ? cur : std::string(trim(cur)));
      cur.clear();
      was_quoted = false;
    } else {
      if (was_quoted && c != ' ' && c != '\t')
        throw ParseError(line_no, "text after closing quote");
      cur.push_back(c);
    }
  }
  if (quoted) throw ParseError(line_no, "unterminated quoted field");
  fields.push_back(was_quoted ? cur : std::string(trim(cur)));
  return fields;
}

std::string csv_escape(const std::string &s) {
  if (s.find_first_of(",\"") == std::string::npos && trim(s) == s) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

double parse_duration(const std::string &s, int line_no) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() ||
      !std::isfinite(v))
    throw ParseError(line_no, "bad duration '" + s + "'");
  if (v < 0) throw ParseError(line_no, "negative duration");
  return v;
}

void check_record(const SampleRecord &r, int line_no) {
  if (r.utt_id.empty()) throw ParseError(line_no, "empty utt_id");
  if (r.label == Label::kBonafide && r.attack_id)
    throw ParseError(line_no, "bonafide record '" + r.utt_id +
                                  "' carries attack id '" + *r.attack_id + "'");
}

const char *kCsvKnown[] = {"utt_id", "path",    "label",   "attack",
                           "codec",  "speaker", "duration"};

std::vector<SampleRecord> parse_protocol(std::string_view text) {
  std::vector<SampleRecord> records;
  for (auto [line_no, line] : content_lines(text)) {
    auto tok = split_ws(line);
    if (tok.size() < 5)
      throw ParseError(line_no, "expected at least 5 columns, got " +
                                    std::to_string(tok.size()));
    SampleRecord r;
    r.speaker_id = dash_to_opt(tok[0]);
    r.utt_id = std::string(tok[1]);
    r.codec_id = dash_to_opt(tok[2]);
    r.attack_id = dash_to_opt(tok[3]);
    try {
      r.label = parse_label(tok[4]);
    } catch (const ValidationError &e) {
      throw ParseError(line_no, e.what());
    }
    r.audio_path = r.utt_id + ".wav";
    for (size_t i = 5; i < tok.size(); ++i)
      r.extra["col" + std::to_string(i)] = std::string(tok[i]);
    check_record(r, line_no);
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<SampleRecord> parse_csv(std::string_view text) {
  std::vector<SampleRecord> records;
  auto lines = content_lines(text);
  if (lines.empty()) return records;
  auto header = split_csv(lines[0].second, lines[0].first);
  int utt_col = -1;
  std::set<std::string> seen;
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i].empty())
      throw ParseError(lines[0].first, "empty column name in header");
    if (!seen.insert(header[i]).second)
      throw ParseError(lines[0].first, "duplicate column '" + header[i] + "'");
    if (header[i] == "utt_id") utt_col = static_cast<int>(i);
  }
  if (utt_col < 0) throw ParseError(lines[0].first, "header lacks utt_id");
  for (size_t li = 1; li < lines.size(); ++li) {
    auto [line_no, line] = lines[li];
    auto fields = split_csv(line, line_no);
    if (fields.size() != header.size())
      throw ParseError(line_no, "expected " + std::to_string(header.size()) +
                                    " fields, got " +
                                    std::to_string(fields.size()));
    SampleRecord r;
    for (size_t i = 0; i < header.size(); ++i) {
      const std::string &col = header[i];
      const std::string &val = fields[i];
      if (col == "utt_id") {
        r.utt_id = val;
      } else if (col == "path") {
        r.audio_path = val;
      } else if (col == "label") {
        try {
          r.label = parse_label(val);
        } catch (const ValidationError &e) {
          throw ParseError(line_no, e.what());
        }
      } else if (col == "attack") {
        r.attack_id = dash_to_opt(val);
      } else if (col == "codec") {
        r.codec_id = dash_to_opt(val);
      } else if (col == "speaker") {
        r.speaker_id = dash_to_opt(val);
      } else if (col == "duration") {
        if (!val.empty()) r.duration_s = parse_duration(val, line_no);
      } else if (!val.empty()) {
        r.extra[col] = val;
      }
    }
    if (r.audio_path.empty()) r.audio_path = r.utt_id + ".wav";
    check_record(r, line_no);
    records.push_back(std::move(r));
  }
  return records;
}

int extra_col_index(const std::string &key) {
  if (key.size() > 3 && key.compare(0, 3, "col") == 0) {
    int v = 0;
    auto res = std::from_chars(key.data() + 3, key.data() + key.size(), v);
    if (res.ec == std::errc() && res.ptr == key.data() + key.size()) return v;
  }
  return -1;
}

}  // namespace

std::string_view label_name(Label label) {
  switch (label) {
    case Label::kBonafide:
      return "bonafide";
    case Label::kSpoof:
      return "spoof";
    case Label::kUnknown:
      return "-";
  }
  return "-";
}

Label parse_label(std::string_view text) {
  if (text == "bonafide") return Label::kBonafide;
  if (text == "spoof") return Label::kSpoof;
  if (text == "-" || text.empty()) return Label::kUnknown;
  throw ValidationError("unknown label '" + std::string(text) + "'");
}

ManifestFormat parse_manifest_format(std::string_view name) {
  if (name == "asvspoof_protocol" || name == "protocol")
    return ManifestFormat::kAsvspoofProtocol;
  if (name == "csv") return ManifestFormat::kCsv;
  throw ValidationError("unknown manifest format '" + std::string(name) + "'");
}

void validate_records(const std::vector<SampleRecord> &records) {
  std::set<std::string_view> ids;
  for (const auto &r : records) {
    if (r.utt_id.empty()) throw ValidationError("record with empty utt_id");
    if (!ids.insert(r.utt_id).second)
      throw ValidationError("duplicate utt_id '" + r.utt_id + "'");
    if (r.duration_s && !(*r.duration_s >= 0.0))
      throw ValidationError("negative duration for '" + r.utt_id + "'");
    if (r.label == Label::kBonafide && r.attack_id)
      throw ValidationError("bonafide record '" + r.utt_id +
                            "' carries an attack id");
  }
}

std::vector<SampleRecord> parse_manifest(std::string_view text,
                                         ManifestFormat format) {
  auto records = format == ManifestFormat::kCsv ? parse_csv(text)
                                                : parse_protocol(text);
  validate_records(records);
  return records;
}

std::string serialize_manifest(const std::vector<SampleRecord> &records,
                               ManifestFormat format) {
  std::ostringstream os;
  auto opt = [](const std::optional<std::string> &v) {
    return v ? *v : std::string("-");
  };
  if (format == ManifestFormat::kAsvspoofProtocol) {
    for (const auto &r : records) {
      os << opt(r.speaker_id) << ' ' << r.utt_id << ' ' << opt(r.codec_id)
         << ' ' << opt(r.attack_id) << ' ' << label_name(r.label);
      std::vector<std::pair<int, const std::string *>> cols;
      for (const auto &[k, v] : r.extra) {
        int idx = extra_col_index(k);
        if (idx < 5)
          throw ValidationError("protocol format cannot carry column '" + k +
                                "'");
        cols.emplace_back(idx, &v);
      }
      std::sort(cols.begin(), cols.end());
      for (auto &[idx, v] : cols) os << ' ' << *v;
      os << '\n';
    }
    return os.str();
  }

  std::set<std::string> extra_cols;
  for (const auto &r : records)
    for (const auto &kv : r.extra) extra_cols.insert(kv.first);
  bool first = true;
  for (const char *c : kCsvKnown) {
    os << (first ? "" : ",") << c;
    first = false;
  }
  for (const auto &c : extra_cols) os << ',' << csv_escape(c);
  os << '\n';
  auto csv_opt = [](const std::optional<std::string> &v) {
    return v ? csv_escape(*v) : std::string();
  };
  for (const auto &r : records) {
    os << csv_escape(r.utt_id) << ',' << csv_escape(r.audio_path) << ','
       << (r.label == Label::kUnknown ? "" : std::string(label_name(r.label)))
       << ',' << csv_opt(r.attack_id) << ',' << csv_opt(r.codec_id) << ','
       << csv_opt(r.speaker_id) << ','
       << (r.duration_s ? format_double(*r.duration_s) : std::string());
    for (const auto &c : extra_cols) {
      auto it = r.extra.find(c);
      os << ',' << (it == r.extra.end() ? std::string() : csv_escape(it->second));
    }
    os << '\n';
  }
  return os.str();
}

std::vector<SampleRecord> read_manifest_file(const std::string &path,
                                             ManifestFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open manifest '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), format);
}

void write_manifest_file(const std::string &path,
                         const std::vector<SampleRecord> &records,
                         ManifestFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write manifest '" + path + "'");
  out << serialize_manifest(records, format);
}

PartitionSummary summarize_partition(const std::vector<SampleRecord> &records) {
  PartitionSummary s;
  std::set<std::string_view> attacks;
  std::vector<double> durations;
  for (const auto &r : records) {
    switch (r.label) {
      case Label::kBonafide:
        ++s.n_bonafide;
        break;
      case Label::kSpoof:
        ++s.n_spoof;
        if (r.attack_id) attacks.insert(*r.attack_id);
        break;
      case Label::kUnknown:
        throw ValidationError("cannot summarize unlabeled record '" +
                              r.utt_id + "'");
    }
    if (r.duration_s) durations.push_back(*r.duration_s);
  }
  s.n_attacks = attacks.size();
  // Summing in sorted order makes the mean exactly permutation-invariant.
  std::sort(durations.begin(), durations.end());
  double total = 0.0;
  for (double d : durations) total += d;
  s.mean_duration_s =
      durations.empty() ? 0.0 : total / static_cast<double>(durations.size());
  return s;
}

}  // namespace sld
