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

#include "sld/scoring.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "sld/common.h"

namespace sld {

std::string_view polarity_name(Polarity p) {
  return p == Polarity::kHigherIsBonafide ? "higher_is_bonafide" : "higher_is_spoof";
}

Polarity parse_polarity(std::string_view text) {
  if (text == "higher_is_bonafide") return Polarity::kHigherIsBonafide;
  if (text == "higher_is_spoof") return Polarity::kHigherIsSpoof;
  throw ValidationError("unknown polarity '" + std::string(text) +
                        "' (expected higher_is_bonafide or higher_is_spoof)");
}

void DcfParams::validate() const {
  if (!(cost_miss > 0.0) || !std::isfinite(cost_miss))
    throw ValidationError("DCF cost_miss must be positive");
  if (!(cost_fa > 0.0) || !std::isfinite(cost_fa))
    throw ValidationError("DCF cost_fa must be positive");
  if (!(prior_target > 0.0 && prior_target < 1.0))
    throw ValidationError("DCF prior_target must lie in (0, 1)");
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Vertex {
  double theta;
  double miss;
  double fa;
};

// Scores oriented so that higher means bonafide.
std::vector<double> oriented(std::span<const double> scores, Polarity p) {
  std::vector<double> s(scores.begin(), scores.end());
  if (p == Polarity::kHigherIsSpoof)
    for (auto &v : s) v = -v;
  return s;
}

double unorient(double theta, Polarity p) {
  return p == Polarity::kHigherIsSpoof ? -theta : theta;
}

void check_trials(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw ValidationError("scores and labels differ in length");
  size_t nb = 0, ns = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw ValidationError("non-finite score");
    if (labels[i] == 1) ++nb;
    else if (labels[i] == 0) ++ns;
    else throw ValidationError("labels must be 1 (bonafide) or 0 (spoof)");
  }
  if (nb == 0 || ns == 0)
    throw ValidationError("metric needs both bonafide and spoof trials");
}

// Accept when score >= theta; vertices at every distinct score, then +inf.
std::vector<Vertex> roc_vertices(const std::vector<double> &s,
                                 std::span<const int> labels) {
  std::vector<size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return s[a] < s[b]; });
  double nb = 0, ns = 0;
  for (int l : labels) (l == 1 ? nb : ns) += 1;
  std::vector<Vertex> v;
  v.reserve(s.size() + 1);
  double bona_below = 0, spoof_below = 0;
  for (size_t i = 0; i < idx.size();) {
    const double theta = s[idx[i]];
    v.push_back({theta, bona_below / nb, (ns - spoof_below) / ns});
    for (; i < idx.size() && s[idx[i]] == theta; ++i)
      (labels[idx[i]] == 1 ? bona_below : spoof_below) += 1;
  }
  v.push_back({kInf, 1.0, 0.0});
  return v;
}

}  // namespace

EerResult compute_eer(std::span<const double> scores, std::span<const int> labels,
                      Polarity polarity) {
  check_trials(scores, labels);
  const auto s = oriented(scores, polarity);
  const auto v = roc_vertices(s, labels);
  size_t j = 1;
  while (v[j].miss < v[j].fa) ++j;
  const double da = v[j - 1].fa - v[j - 1].miss;
  const double db = v[j].fa - v[j].miss;
  const double alpha = da / (da - db);
  EerResult r;
  r.eer = v[j - 1].miss + alpha * (v[j].miss - v[j - 1].miss);
  const double theta = std::isfinite(v[j].theta) ? v[j].theta : v[j - 1].theta;
  r.threshold = unorient(theta, polarity);
  return r;
}

DcfResult compute_min_dcf(std::span<const double> scores, std::span<const int> labels,
                          const DcfParams &params, Polarity polarity) {
  params.validate();
  check_trials(scores, labels);
  const auto s = oriented(scores, polarity);
  const auto v = roc_vertices(s, labels);
  const double cm = params.cost_miss * params.prior_target;
  const double cf = params.cost_fa * (1.0 - params.prior_target);
  const double norm = std::min(cm, cf);
  DcfResult r{kInf, 0.0};
  for (const auto &x : v) {
    const double c = (cm * x.miss + cf * x.fa) / norm;
    if (c < r.min_dcf) {
      r.min_dcf = c;
      r.threshold = unorient(x.theta, polarity);
    }
  }
  return r;
}

CalibrationMap calibrate_llr(std::span<const double> scores,
                             std::span<const int> labels, Polarity polarity) {
  check_trials(scores, labels);
  const auto s = oriented(scores, polarity);
  const double mu = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
  double sd = 0.0;
  for (double x : s) sd += (x - mu) * (x - mu);
  sd = std::sqrt(sd / static_cast<double>(s.size()));
  if (!(sd > 0.0)) sd = 1.0;
  std::vector<double> x(s.size());
  for (size_t i = 0; i < s.size(); ++i) x[i] = (s[i] - mu) / sd;
  double nb = 0, ns = 0;
  for (int l : labels) (l == 1 ? nb : ns) += 1;
  const double wb = 0.5 / nb, ws = 0.5 / ns;
  constexpr double kRidge = 1e-6;  // keeps separable data finite

  auto objective = [&](double a, double b) {
    double f = 0.5 * kRidge * a * a;
    for (size_t i = 0; i < x.size(); ++i) {
      const double z = a * x[i] + b;
      const double t = labels[i] == 1 ? -z : z;
      f += (labels[i] == 1 ? wb : ws) * (t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)));
    }
    return f;
  };
  double a = 0.0, b = 0.0;
  double f = objective(a, b);
  for (int it = 0; it < 200; ++it) {
    double ga = kRidge * a, gb = 0, haa = kRidge, hab = 0, hbb = 0;
    for (size_t i = 0; i < x.size(); ++i) {
      const double z = a * x[i] + b;
      const double p = 1.0 / (1.0 + std::exp(-z));
      const double w = labels[i] == 1 ? wb : ws;
      const double g = w * (p - (labels[i] == 1 ? 1.0 : 0.0));
      const double h = w * p * (1.0 - p);
      ga += g * x[i];
      gb += g;
      haa += h * x[i] * x[i];
      hab += h * x[i];
      hbb += h;
    }
    const double det = haa * hbb - hab * hab;
    if (!(det > 0.0)) break;
    const double da = (hbb * ga - hab * gb) / det;
    const double db = (haa * gb - hab * ga) / det;
    double step = 1.0, fn = objective(a - da, b - db);
    while (fn > f && step > 1e-10) {
      step *= 0.5;
      fn = objective(a - step * da, b - step * db);
    }
    if (fn > f) break;
    a -= step * da;
    b -= step * db;
    const bool done = f - fn < 1e-15 && std::abs(step * da) < 1e-12 && std::abs(step * db) < 1e-12;
    f = fn;
    if (done) break;
  }
  if (!(a > 0.0)) {
    // Scores anti-correlated with the labels: keep the map monotone. With a
    // vanishing scale the class-balanced optimum of the offset is 0.
    a = 1e-6;
    b = 0.0;
  }
  CalibrationMap m;
  m.polarity = polarity;
  m.scale = a / sd;
  m.offset = b - a * mu / sd;
  return m;
}

std::vector<double> apply_llr(const CalibrationMap &map, std::span<const double> scores) {
  std::vector<double> out(scores.size());
  const double sign = map.polarity == Polarity::kHigherIsSpoof ? -1.0 : 1.0;
  for (size_t i = 0; i < scores.size(); ++i)
    out[i] = map.scale * sign * scores[i] + map.offset;
  return out;
}

double cllr(std::span<const double> llrs, std::span<const int> labels) {
  check_trials(llrs, labels);
  double cb = 0, cs = 0, nb = 0, ns = 0;
  auto sp = [](double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); };
  for (size_t i = 0; i < llrs.size(); ++i) {
    if (labels[i] == 1) {
      cb += sp(-llrs[i]);
      nb += 1;
    } else {
      cs += sp(llrs[i]);
      ns += 1;
    }
  }
  return 0.5 * (cb / nb + cs / ns) / std::log(2.0);
}

// --- score files -----------------------------------------------------------

namespace {

std::vector<std::string> split_tabs(const std::string &line) {
  std::vector<std::string> out;
  size_t start = 0;
  for (;;) {
    const size_t t = line.find('\t', start);
    out.push_back(line.substr(start, t - start));
    if (t == std::string::npos) break;
    start = t + 1;
  }
  return out;
}

std::optional<std::string> opt_field(const std::string &s) {
  if (s.empty() || s == kMissing) return std::nullopt;
  return s;
}

double parse_number(const std::string &s, int line) {
  if (s == "NA") throw ParseError(line, "unexpected NA");
  char *end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw ParseError(line, "not a number: '" + s + "'");
  return v;
}

std::string read_text(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
  if (!out) throw Error("write to '" + path + "' failed");
}

}  // namespace

std::string serialize_scores(const ScoreFile &f) {
  std::string out = "# polarity=" + std::string(polarity_name(f.polarity)) + "\n";
  if (!f.config_fingerprint.empty())
    out += "# config_fingerprint=" + f.config_fingerprint + "\n";
  for (const auto &r : f.rows) {
    out += r.utt_id + "\t" + format_double(r.score);
    const bool meta = r.label != Label::kUnknown || r.attack_id || r.codec_id;
    if (meta) {
      out += "\t" + std::string(label_name(r.label));
      out += "\t" + r.attack_id.value_or(kMissing);
      out += "\t" + r.codec_id.value_or(kMissing);
    }
    out += "\n";
  }
  for (const auto &e : f.errors) {
    std::string msg = e.message;
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::replace(msg.begin(), msg.end(), '\t', ' ');
    out += "# error\t" + e.utt_id + "\t" + msg + "\n";
  }
  return out;
}

ScoreFile parse_scores(std::string_view text) {
  ScoreFile f;
  std::istringstream in{std::string(text)};
  std::string line;
  int n = 0;
  std::unordered_set<std::string> seen;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("# polarity=", 0) == 0) {
        f.polarity = parse_polarity(line.substr(11));
      } else if (line.rfind("# config_fingerprint=", 0) == 0) {
        f.config_fingerprint = line.substr(21);
      } else if (line.rfind("# error\t", 0) == 0) {
        const auto parts = split_tabs(line.substr(8));
        ScoreError e;
        e.utt_id = parts[0];
        if (parts.size() > 1) e.message = line.substr(8 + parts[0].size() + 1);
        f.errors.push_back(std::move(e));
      }
      continue;
    }
    const auto fields = split_tabs(line);
    if (fields.size() != 2 && fields.size() != 5)
      throw ParseError(n, "expected 2 or 5 tab-separated fields, got " +
                              std::to_string(fields.size()));
    ScoreRow r;
    r.utt_id = fields[0];
    if (r.utt_id.empty()) throw ParseError(n, "empty utt_id");
    r.score = parse_number(fields[1], n);
    if (!std::isfinite(r.score)) throw ValidationError("line " + std::to_string(n) + ": non-finite score");
    if (fields.size() == 5) {
      try {
        r.label = parse_label(fields[2]);
      } catch (const ValidationError &e) {
        throw ParseError(n, e.what());
      }
      r.attack_id = opt_field(fields[3]);
      r.codec_id = opt_field(fields[4]);
    }
    if (!seen.insert(r.utt_id).second)
      throw ValidationError("line " + std::to_string(n) + ": duplicate utt_id '" + r.utt_id + "'");
    f.rows.push_back(std::move(r));
  }
  return f;
}

ScoreFile read_score_file(const std::string &path) { return parse_scores(read_text(path)); }

void write_score_file(const std::string &path, const ScoreFile &file) {
  write_text(path, serialize_scores(file));
}

std::vector<std::string> attach_metadata(ScoreFile &file,
                                         const std::vector<SampleRecord> &records) {
  std::map<std::string, const SampleRecord *> by_id;
  for (const auto &r : records) by_id[r.utt_id] = &r;
  std::vector<std::string> missing;
  for (auto &row : file.rows) {
    auto it = by_id.find(row.utt_id);
    if (it == by_id.end()) {
      missing.push_back(row.utt_id);
      continue;
    }
    row.label = it->second->label;
    row.attack_id = it->second->attack_id;
    row.codec_id = it->second->codec_id;
  }
  return missing;
}

// --- breakdown -------------------------------------------------------------

const BreakdownCell *BreakdownTable::find(const std::string &attack,
                                          const std::string &codec) const {
  for (const auto &c : cells)
    if (c.attack == attack && c.codec == codec) return &c;
  return nullptr;
}

std::optional<double> BreakdownTable::attack_average_min_dcf() const {
  double sum = 0.0;
  int n = 0;
  for (const auto &a : attacks) {
    const BreakdownCell *c = find(a, kPooled);
    if (c && c->min_dcf) {
      sum += *c->min_dcf;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

namespace {

BreakdownCell make_cell(const std::string &attack, const std::string &codec,
                        const std::vector<const ScoreRow *> &rows,
                        const DcfParams &params, Polarity polarity) {
  BreakdownCell c;
  c.attack = attack;
  c.codec = codec;
  std::vector<double> s;
  std::vector<int> l;
  for (const ScoreRow *r : rows) {
    const std::string rc = r->codec_id.value_or(kMissing);
    if (codec != kPooled && rc != codec) continue;
    if (r->label == Label::kBonafide) {
      ++c.n_bonafide;
      l.push_back(1);
    } else {
      const std::string ra = r->attack_id.value_or(kMissing);
      if (attack != kPooled && ra != attack) continue;
      ++c.n_spoof;
      l.push_back(0);
    }
    s.push_back(r->score);
  }
  if (c.n_bonafide && c.n_spoof) {
    c.min_dcf = compute_min_dcf(s, l, params, polarity).min_dcf;
    c.eer = compute_eer(s, l, polarity).eer;
  }
  return c;
}

}  // namespace

BreakdownTable breakdown_report(const ScoreFile &file, const DcfParams &params) {
  params.validate();
  BreakdownTable t;
  t.params = params;
  t.polarity = file.polarity;
  t.config_fingerprint = file.config_fingerprint;
  std::vector<const ScoreRow *> rows;
  bool has_attack = false, has_codec = false;
  std::set<std::string> attacks, codecs;
  for (const auto &r : file.rows) {
    if (r.label == Label::kUnknown) continue;
    rows.push_back(&r);
    if (r.codec_id) has_codec = true;
    codecs.insert(r.codec_id.value_or(kMissing));
    if (r.label == Label::kSpoof) {
      if (r.attack_id) has_attack = true;
      attacks.insert(r.attack_id.value_or(kMissing));
    }
  }
  if (has_attack) t.attacks.assign(attacks.begin(), attacks.end());
  if (has_codec) t.codecs.assign(codecs.begin(), codecs.end());
  auto add = [&](const std::string &a, const std::string &c) {
    t.cells.push_back(make_cell(a, c, rows, params, t.polarity));
  };
  if (has_attack && has_codec)
    for (const auto &a : t.attacks)
      for (const auto &c : t.codecs) add(a, c);
  for (const auto &a : t.attacks) add(a, kPooled);
  for (const auto &c : t.codecs) add(kPooled, c);
  add(kPooled, kPooled);
  return t;
}

namespace {

std::string opt_num(const std::optional<double> &v) {
  return v ? format_double(*v) : std::string("NA");
}

std::string fixed4(const std::optional<double> &v) {
  if (!v) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

std::string stamp(const BreakdownTable &t) {
  return "# cost_miss=" + format_double(t.params.cost_miss) +
         ",cost_fa=" + format_double(t.params.cost_fa) +
         ",prior_target=" + format_double(t.params.prior_target) +
         ",polarity=" + std::string(polarity_name(t.polarity)) +
         ",config_fingerprint=" + t.config_fingerprint;
}

}  // namespace

std::string breakdown_csv(const BreakdownTable &t) {
  std::string out = stamp(t) + "\n";
  out += "attack,codec,n_bonafide,n_spoof,min_dcf,eer\n";
  for (const auto &c : t.cells)
    out += c.attack + "," + c.codec + "," + std::to_string(c.n_bonafide) + "," +
           std::to_string(c.n_spoof) + "," + opt_num(c.min_dcf) + "," + opt_num(c.eer) + "\n";
  return out;
}

BreakdownTable parse_breakdown_csv(std::string_view text) {
  BreakdownTable t;
  std::istringstream in{std::string(text)};
  std::string line;
  int n = 0;
  bool header = false;
  std::set<std::string> attacks, codecs;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::stringstream ss(line.substr(1));
      std::string kv;
      while (std::getline(ss, kv, ',')) {
        while (!kv.empty() && kv.front() == ' ') kv.erase(kv.begin());
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        const std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
        if (k == "cost_miss") t.params.cost_miss = parse_number(v, n);
        else if (k == "cost_fa") t.params.cost_fa = parse_number(v, n);
        else if (k == "prior_target") t.params.prior_target = parse_number(v, n);
        else if (k == "polarity") t.polarity = parse_polarity(v);
        else if (k == "config_fingerprint") t.config_fingerprint = v;
      }
      continue;
    }
    if (!header) {
      if (line != "attack,codec,n_bonafide,n_spoof,min_dcf,eer")
        throw ParseError(n, "unexpected breakdown header");
      header = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 6) throw ParseError(n, "expected 6 fields");
    BreakdownCell c;
    c.attack = f[0];
    c.codec = f[1];
    c.n_bonafide = static_cast<size_t>(parse_number(f[2], n));
    c.n_spoof = static_cast<size_t>(parse_number(f[3], n));
    if (f[4] != "NA") c.min_dcf = parse_number(f[4], n);
    if (f[5] != "NA") c.eer = parse_number(f[5], n);
    if (c.attack != kPooled) attacks.insert(c.attack);
    if (c.codec != kPooled) codecs.insert(c.codec);
    t.cells.push_back(std::move(c));
  }
  if (!header) throw ParseError(n, "missing breakdown header");
  t.attacks.assign(attacks.begin(), attacks.end());
  t.codecs.assign(codecs.begin(), codecs.end());
  return t;
}

std::string breakdown_text(const BreakdownTable &t) {
  std::vector<std::string> rows = t.attacks, cols = t.codecs;
  rows.push_back(kPooled);
  cols.push_back(kPooled);
  size_t w0 = std::string("attack\\codec").size();
  for (const auto &r : rows) w0 = std::max(w0, r.size());
  std::vector<size_t> w(cols.size(), 6);
  for (size_t j = 0; j < cols.size(); ++j) w[j] = std::max(w[j], cols[j].size());
  auto pad = [](const std::string &s, size_t width) {
    return s + std::string(width > s.size() ? width - s.size() : 0, ' ');
  };
  std::string out = "minDCF by attack and codec (" + stamp(t).substr(2) + ")\n";
  out += pad("attack\\codec", w0);
  for (size_t j = 0; j < cols.size(); ++j) out += "  " + pad(cols[j], w[j]);
  out += "\n";
  for (const auto &r : rows) {
    out += pad(r, w0);
    for (size_t j = 0; j < cols.size(); ++j) {
      const BreakdownCell *c = t.find(r, cols[j]);
      out += "  " + pad(c ? fixed4(c->min_dcf) : std::string(""), w[j]);
    }
    out += "\n";
  }
  const BreakdownCell *all = t.find(kPooled, kPooled);
  out += "pooled minDCF: " + fixed4(all ? all->min_dcf : std::nullopt) + "\n";
  out += "pooled EER: " + fixed4(all ? all->eer : std::nullopt) + "\n";
  out += "attack-average minDCF: " + fixed4(t.attack_average_min_dcf()) + "\n";
  return out;
}

}  // namespace sld
