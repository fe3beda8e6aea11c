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

#include "sld/augment.h"

#include <cmath>
#include <complex>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

namespace sld {

namespace {

double np_sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

std::vector<double> convolve(const std::vector<double> &a,
                             const std::vector<double> &b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

}  // namespace

void clip_normalize(std::vector<double> &x) {
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  if (peak > 1.0)
    for (double &v : x) v /= peak;
}

std::vector<double> firwin_notch(int n_taps, double f1_hz, double f2_hz,
                                 double fs) {
  if (n_taps < 1 || n_taps % 2 == 0)
    throw ValidationError("firwin_notch: tap count must be odd");
  const double nyq = fs / 2.0;
  const double lo = f1_hz / nyq;
  const double hi = f2_hz / nyq;
  if (!(lo > 0.0 && lo < hi && hi < 1.0))
    throw ValidationError("firwin_notch: need 0 < f1 < f2 < fs/2");
  const double alpha = 0.5 * (n_taps - 1);
  std::vector<double> h(static_cast<size_t>(n_taps));
  double dc = 0.0;
  for (int n = 0; n < n_taps; ++n) {
    const double m = n - alpha;
    // Pass bands [0, lo] and [hi, 1].
    double v = lo * np_sinc(lo * m) + np_sinc(m) - hi * np_sinc(hi * m);
    const double win =
        n_taps == 1
            ? 1.0
            : 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (n_taps - 1));
    v *= win;
    h[static_cast<size_t>(n)] = v;
    dc += v;
  }
  for (double &v : h) v /= dc;
  return h;
}

double fir_peak_response(const std::vector<double> &taps) {
  double peak = 0.0;
  for (int k = 0; k < 512; ++k) {
    const double w = std::numbers::pi * k / 512.0;
    std::complex<double> acc = 0.0;
    for (size_t n = 0; n < taps.size(); ++n)
      acc += taps[n] * std::polar(1.0, -w * static_cast<double>(n));
    peak = std::max(peak, std::abs(acc));
  }
  return peak;
}

std::vector<double> sample_filter_cascade(const FilterBankParams &p, double fs,
                                          Rng &rng) {
  std::vector<double> b{1.0};
  for (int i = 0; i < p.n_bands; ++i) {
    const double fc = rng.uniform(p.min_center_hz, p.max_center_hz);
    const double bw = rng.uniform(p.min_bandwidth_hz, p.max_bandwidth_hz);
    int c = static_cast<int>(std::floor(
        rng.uniform(static_cast<double>(p.min_coeffs),
                    static_cast<double>(p.max_coeffs))));
    if (c % 2 == 0) ++c;
    double f1 = fc - bw / 2.0;
    double f2 = fc + bw / 2.0;
    if (f1 <= 0.0) f1 = 1.0 / 1000.0;
    if (f2 >= fs / 2.0) f2 = fs / 2.0 - 1.0 / 1000.0;
    if (f1 >= f2) f1 = f2 / 2.0;
    b = convolve(firwin_notch(c, f1, f2, fs), b);
  }
  const double gain_db = rng.uniform(p.min_gain_db, p.max_gain_db);
  const double scale = std::pow(10.0, gain_db / 20.0) / fir_peak_response(b);
  for (double &v : b) v *= scale;
  return b;
}

std::vector<double> filter_centered(const std::vector<double> &x,
                                    const std::vector<double> &taps) {
  const size_t offset = (taps.size() - 1) / 2;
  std::vector<double> y(x.size(), 0.0);
  for (size_t k = 0; k < x.size(); ++k) {
    const size_t t = k + offset;  // index into the full causal output
    double acc = 0.0;
    const size_t i_lo = t >= x.size() ? t - x.size() + 1 : 0;
    const size_t i_hi = std::min(taps.size() - 1, t);
    for (size_t i = i_lo; i <= i_hi; ++i) acc += taps[i] * x[t - i];
    y[k] = acc;
  }
  return y;
}

LnlDraw sample_lnl(const LnlParams &p, Rng &rng) {
  LnlDraw d;
  FilterBankParams bank = p.bank;
  for (int j = 0; j < p.n_orders; ++j) {
    if (j == 1) {
      bank.min_gain_db = p.bank.min_gain_db - p.max_nonlinear_bias_db;
      bank.max_gain_db = p.bank.max_gain_db - p.min_nonlinear_bias_db;
    }
    d.filters.push_back(sample_filter_cascade(bank, kSampleRate, rng));
  }
  return d;
}

Waveform apply_lnl(const Waveform &w, const LnlDraw &draw) {
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.assign(w.size(), 0.0);
  std::vector<double> power(w.samples);
  for (size_t j = 0; j < draw.filters.size(); ++j) {
    if (j > 0)
      for (size_t i = 0; i < w.size(); ++i) power[i] *= w.samples[i];
    const auto y = filter_centered(power, draw.filters[j]);
    for (size_t i = 0; i < w.size(); ++i) out.samples[i] += y[i];
  }
  double mean = 0.0;
  for (double v : out.samples) mean += v;
  mean /= static_cast<double>(std::max<size_t>(1, out.size()));
  for (double &v : out.samples) v -= mean;
  clip_normalize(out.samples);
  return out;
}

IsdDraw sample_isd(const IsdParams &p, size_t length, Rng &rng) {
  IsdDraw d;
  const auto n = static_cast<size_t>(std::floor(p.proportion * length));
  d.positions = rng.sample_without_replacement(length, n);
  d.factors.resize(n);
  for (auto &f : d.factors) f = (2.0 * rng.uniform() - 1.0);
  for (auto &f : d.factors) f *= (2.0 * rng.uniform() - 1.0);
  return d;
}

Waveform apply_isd(const Waveform &w, const IsdParams &p, const IsdDraw &draw) {
  Waveform out = w;
  for (size_t k = 0; k < draw.positions.size(); ++k) {
    const size_t i = draw.positions[k];
    out.samples[i] = w.samples[i] + p.gain * w.samples[i] * draw.factors[k];
  }
  clip_normalize(out.samples);
  return out;
}

std::vector<double> ssi_noise(const Waveform &w, const SsiParams &p, Rng &rng) {
  double x_norm = 0.0;
  for (double v : w.samples) x_norm += v * v;
  x_norm = std::sqrt(x_norm);
  if (!(x_norm > 0.0))
    throw ValidationError("rawboost_ssi: all-zero input has undefined SNR");
  std::vector<double> noise(w.size());
  for (auto &v : noise) v = rng.normal();
  const auto taps = sample_filter_cascade(p.bank, kSampleRate, rng);
  noise = filter_centered(noise, taps);
  const double snr_db = rng.uniform(p.min_snr_db, p.max_snr_db);
  double n_norm = 0.0;
  for (double v : noise) n_norm += v * v;
  n_norm = std::sqrt(n_norm);
  if (!(n_norm > 0.0)) throw Error("rawboost_ssi: filtered noise vanished");
  const double scale = x_norm / n_norm / std::pow(10.0, 0.05 * snr_db);
  for (auto &v : noise) v *= scale;
  return noise;
}

Waveform rawboost_lnl(const Waveform &w, const RawBoostConfig &cfg, Rng &rng) {
  return apply_lnl(w, sample_lnl(cfg.lnl, rng));
}

Waveform rawboost_isd(const Waveform &w, const RawBoostConfig &cfg, Rng &rng) {
  return apply_isd(w, cfg.isd, sample_isd(cfg.isd, w.size(), rng));
}

Waveform rawboost_ssi(const Waveform &w, const RawBoostConfig &cfg, Rng &rng) {
  const auto noise = ssi_noise(w, cfg.ssi, rng);
  Waveform out = w;
  for (size_t i = 0; i < out.size(); ++i) out.samples[i] += noise[i];
  clip_normalize(out.samples);
  return out;
}

Waveform rawboost(const Waveform &w, const RawBoostConfig &cfg, Rng &rng) {
  Rng r_lnl = rng.split(1), r_isd = rng.split(2), r_ssi = rng.split(3);
  switch (cfg.mode) {
    case RawBoostMode::kLnl:
      return rawboost_lnl(w, cfg, r_lnl);
    case RawBoostMode::kIsd:
      return rawboost_isd(w, cfg, r_isd);
    case RawBoostMode::kSsi:
      return rawboost_ssi(w, cfg, r_ssi);
    case RawBoostMode::kSeriesLnlIsd:
      return rawboost_isd(rawboost_lnl(w, cfg, r_lnl), cfg, r_isd);
    case RawBoostMode::kAllSeries:
      return rawboost_ssi(
          rawboost_isd(rawboost_lnl(w, cfg, r_lnl), cfg, r_isd), cfg, r_ssi);
  }
  throw Error("rawboost: unknown mode");
}

std::vector<Waveform> augment_batch(const std::vector<Waveform> &batch,
                                    const RawBoostConfig &cfg, const Rng &rng) {
  if (cfg.extra_corruption != "none")
    throw ValidationError("augmentation '" + cfg.extra_corruption +
                          "' is not available");
  std::vector<Waveform> out(batch);
  out.reserve(2 * batch.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    Rng item = rng.split(i);
    out.push_back(rawboost(batch[i], cfg, item));
  }
  return out;
}

std::string_view rawboost_mode_name(RawBoostMode mode) {
  switch (mode) {
    case RawBoostMode::kLnl: return "lnl";
    case RawBoostMode::kIsd: return "isd";
    case RawBoostMode::kSsi: return "ssi";
    case RawBoostMode::kSeriesLnlIsd: return "series_lnl_isd";
    case RawBoostMode::kAllSeries: return "all_series";
  }
  return "?";
}

RawBoostMode parse_rawboost_mode(std::string_view name) {
  for (auto m : {RawBoostMode::kLnl, RawBoostMode::kIsd, RawBoostMode::kSsi,
                 RawBoostMode::kSeriesLnlIsd, RawBoostMode::kAllSeries})
    if (rawboost_mode_name(m) == name) return m;
  throw ValidationError("unknown RawBoost mode '" + std::string(name) + "'");
}

namespace {

void check_bank(const FilterBankParams &b, const std::string &prefix,
                std::vector<std::string> &errors) {
  if (b.n_bands < 0) errors.push_back(prefix + "n_bands < 0");
  if (!(b.min_center_hz <= b.max_center_hz))
    errors.push_back(prefix + "min_center_hz > max_center_hz");
  if (!(b.min_bandwidth_hz <= b.max_bandwidth_hz))
    errors.push_back(prefix + "min_bandwidth_hz > max_bandwidth_hz");
  if (b.min_bandwidth_hz <= 0) errors.push_back(prefix + "bandwidth must be > 0");
  if (b.min_coeffs < 1 || b.min_coeffs > b.max_coeffs)
    errors.push_back(prefix + "need 1 <= min_coeffs <= max_coeffs");
  if (!(b.min_gain_db <= b.max_gain_db))
    errors.push_back(prefix + "min_gain_db > max_gain_db");
  if (b.min_center_hz < 0 || b.max_center_hz > kSampleRate / 2.0)
    errors.push_back(prefix + "center frequencies must lie in [0, 8000] Hz");
}

// Field table shared by the preset parser and serializer.
struct Field {
  std::function<std::string(const RawBoostConfig &)> get;
  std::function<void(RawBoostConfig &, const std::string &)> set;
};

double to_double(const std::string &key, const std::string &v) {
  size_t used = 0;
  double d;
  try {
    d = std::stod(v, &used);
  } catch (...) {
    throw ValidationError("preset key '" + key + "': not a number: " + v);
  }
  if (used != v.size() || !std::isfinite(d))
    throw ValidationError("preset key '" + key + "': not a finite number: " + v);
  return d;
}

int to_int(const std::string &key, const std::string &v) {
  const double d = to_double(key, v);
  if (d != std::floor(d))
    throw ValidationError("preset key '" + key + "': not an integer: " + v);
  return static_cast<int>(d);
}

using BankRef = FilterBankParams &(*)(RawBoostConfig &);
using ConstBankRef = const FilterBankParams &(*)(const RawBoostConfig &);

void add_bank_fields(std::map<std::string, Field> &f, const std::string &prefix,
                     BankRef bank, ConstBankRef cbank) {
  const std::pair<const char *, int FilterBankParams::*> ints[] = {
      {"n_bands", &FilterBankParams::n_bands},
      {"min_coeffs", &FilterBankParams::min_coeffs},
      {"max_coeffs", &FilterBankParams::max_coeffs}};
  for (auto [name, member] : ints) {
    const std::string key = prefix + name;
    f[key] = Field{
        [cbank, member](const RawBoostConfig &c) {
          return std::to_string(cbank(c).*member);
        },
        [bank, member, key](RawBoostConfig &c, const std::string &v) {
          bank(c).*member = to_int(key, v);
        }};
  }
  const std::pair<const char *, double FilterBankParams::*> doubles[] = {
      {"min_center_hz", &FilterBankParams::min_center_hz},
      {"max_center_hz", &FilterBankParams::max_center_hz},
      {"min_bandwidth_hz", &FilterBankParams::min_bandwidth_hz},
      {"max_bandwidth_hz", &FilterBankParams::max_bandwidth_hz},
      {"min_gain_db", &FilterBankParams::min_gain_db},
      {"max_gain_db", &FilterBankParams::max_gain_db}};
  for (auto [name, member] : doubles) {
    const std::string key = prefix + name;
    f[key] = Field{
        [cbank, member](const RawBoostConfig &c) {
          return format_double(cbank(c).*member);
        },
        [bank, member, key](RawBoostConfig &c, const std::string &v) {
          bank(c).*member = to_double(key, v);
        }};
  }
}

const std::map<std::string, Field> &preset_fields() {
  static const std::map<std::string, Field> fields = [] {
    std::map<std::string, Field> f;
    f["mode"] = Field{
        [](const RawBoostConfig &c) { return std::string(rawboost_mode_name(c.mode)); },
        [](RawBoostConfig &c, const std::string &v) { c.mode = parse_rawboost_mode(v); }};
    f["extra_corruption"] = Field{
        [](const RawBoostConfig &c) { return c.extra_corruption; },
        [](RawBoostConfig &c, const std::string &v) { c.extra_corruption = v; }};
    add_bank_fields(
        f, "lnl.bank.",
        [](RawBoostConfig &c) -> FilterBankParams & { return c.lnl.bank; },
        [](const RawBoostConfig &c) -> const FilterBankParams & { return c.lnl.bank; });
    add_bank_fields(
        f, "ssi.bank.",
        [](RawBoostConfig &c) -> FilterBankParams & { return c.ssi.bank; },
        [](const RawBoostConfig &c) -> const FilterBankParams & { return c.ssi.bank; });
    f["lnl.n_orders"] = Field{
        [](const RawBoostConfig &c) { return std::to_string(c.lnl.n_orders); },
        [](RawBoostConfig &c, const std::string &v) { c.lnl.n_orders = to_int("lnl.n_orders", v); }};
    auto dbl = [&f](const std::string &key, double &(*ref)(RawBoostConfig &),
                    double (*cref)(const RawBoostConfig &)) {
      f[key] = Field{[cref](const RawBoostConfig &c) { return format_double(cref(c)); },
                     [ref, key](RawBoostConfig &c, const std::string &v) {
                       ref(c) = to_double(key, v);
                     }};
    };
    dbl("lnl.min_nonlinear_bias_db",
        [](RawBoostConfig &c) -> double & { return c.lnl.min_nonlinear_bias_db; },
        [](const RawBoostConfig &c) { return c.lnl.min_nonlinear_bias_db; });
    dbl("lnl.max_nonlinear_bias_db",
        [](RawBoostConfig &c) -> double & { return c.lnl.max_nonlinear_bias_db; },
        [](const RawBoostConfig &c) { return c.lnl.max_nonlinear_bias_db; });
    dbl("isd.proportion",
        [](RawBoostConfig &c) -> double & { return c.isd.proportion; },
        [](const RawBoostConfig &c) { return c.isd.proportion; });
    dbl("isd.gain", [](RawBoostConfig &c) -> double & { return c.isd.gain; },
        [](const RawBoostConfig &c) { return c.isd.gain; });
    dbl("ssi.min_snr_db",
        [](RawBoostConfig &c) -> double & { return c.ssi.min_snr_db; },
        [](const RawBoostConfig &c) { return c.ssi.min_snr_db; });
    dbl("ssi.max_snr_db",
        [](RawBoostConfig &c) -> double & { return c.ssi.max_snr_db; },
        [](const RawBoostConfig &c) { return c.ssi.max_snr_db; });
    return f;
  }();
  return fields;
}

}  // namespace

void RawBoostConfig::validate() const {
  std::vector<std::string> errors;
  check_bank(lnl.bank, "lnl.bank.", errors);
  check_bank(ssi.bank, "ssi.bank.", errors);
  if (lnl.n_orders < 1) errors.push_back("lnl.n_orders must be >= 1");
  if (!(lnl.min_nonlinear_bias_db <= lnl.max_nonlinear_bias_db))
    errors.push_back("lnl.min_nonlinear_bias_db > lnl.max_nonlinear_bias_db");
  if (!(isd.proportion >= 0.0 && isd.proportion <= 1.0))
    errors.push_back("isd.proportion must lie in [0, 1]");
  if (!std::isfinite(isd.gain)) errors.push_back("isd.gain must be finite");
  if (!std::isfinite(ssi.min_snr_db) || !std::isfinite(ssi.max_snr_db))
    errors.push_back("ssi SNR range must be finite");
  else if (ssi.min_snr_db > ssi.max_snr_db)
    errors.push_back("ssi.min_snr_db > ssi.max_snr_db");
  if (extra_corruption != "none" && extra_corruption != "noise_rir")
    errors.push_back("extra_corruption must be 'none' or 'noise_rir'");
  else if (extra_corruption == "noise_rir")
    errors.push_back("extra_corruption 'noise_rir' is reserved and not available");
  if (!errors.empty()) {
    std::string msg = "invalid RawBoost config:";
    for (const auto &e : errors) msg += "\n  " + e;
    throw ValidationError(msg);
  }
}

RawBoostConfig default_rawboost_preset() { return RawBoostConfig{}; }

RawBoostConfig parse_rawboost_preset(const std::string &text) {
  RawBoostConfig cfg = default_rawboost_preset();
  const auto &fields = preset_fields();
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::vector<std::string> errors;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected key = value");
    auto strip = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    if (key == "version") {
      if (value != "1") throw ParseError(line_no, "unsupported preset version " + value);
      continue;
    }
    auto it = fields.find(key);
    if (it == fields.end()) {
      errors.push_back("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
      continue;
    }
    try {
      it->second.set(cfg, value);
    } catch (const ValidationError &e) {
      errors.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!errors.empty()) {
    std::string msg = "invalid RawBoost preset:";
    for (const auto &e : errors) msg += "\n  " + e;
    throw ValidationError(msg);
  }
  return cfg;
}

std::string serialize_rawboost_preset(const RawBoostConfig &cfg) {
  std::ostringstream os;
  os << "# RawBoost preset\nversion = 1\n";
  for (const auto &[key, field] : preset_fields())
    os << key << " = " << field.get(cfg) << '\n';
  return os.str();
}

RawBoostConfig load_rawboost_preset(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open RawBoost preset '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_rawboost_preset(ss.str());
}

}  // namespace sld
