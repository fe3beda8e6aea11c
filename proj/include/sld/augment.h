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

#ifndef SLD_AUGMENT_H_
#define SLD_AUGMENT_H_

#include <string>
#include <vector>

#include "sld/audio.h"
#include "sld/common.h"

namespace sld {

// RawBoost data-free waveform augmentation: linear and nonlinear convolutive
// noise (LnL), impulsive signal-dependent noise (ISD) and stationary
// signal-independent colored noise (SSI).

/// Parameters of a cascade of random FIR notch (band-stop) filters.
struct FilterBankParams {
  int n_bands = 5;
  double min_center_hz = 20.0;
  double max_center_hz = 8000.0;
  double min_bandwidth_hz = 100.0;
  double max_bandwidth_hz = 1000.0;
  int min_coeffs = 10;
  int max_coeffs = 100;
  double min_gain_db = 0.0;
  double max_gain_db = 0.0;
};

struct LnlParams {
  FilterBankParams bank;
  /// Number of nonlinear orders (x, x^2, ..., x^n_orders).
  int n_orders = 5;
  /// Orders >= 2 are attenuated by a further uniform draw from this range.
  double min_nonlinear_bias_db = 5.0;
  double max_nonlinear_bias_db = 20.0;
};

struct IsdParams {
  /// Fraction of sample positions perturbed; exactly floor(p * n) positions.
  double proportion = 0.1;
  /// Linear gain g: y[k] = x[k] + g * x[k] * u1 * u2 with u1, u2 ~ U(-1, 1).
  double gain = 2.0;
};

struct SsiParams {
  FilterBankParams bank;
  double min_snr_db = 10.0;
  double max_snr_db = 40.0;
};

enum class RawBoostMode { kLnl, kIsd, kSsi, kSeriesLnlIsd, kAllSeries };

std::string_view rawboost_mode_name(RawBoostMode mode);
RawBoostMode parse_rawboost_mode(std::string_view name);

struct RawBoostConfig {
  LnlParams lnl;
  IsdParams isd;
  SsiParams ssi;
  RawBoostMode mode = RawBoostMode::kSeriesLnlIsd;
  uint64_t seed = 0;
  /// "none" or "noise_rir"; the latter is reserved and rejected.
  std::string extra_corruption = "none";

  /// Throws ValidationError listing every violated invariant.
  void validate() const;
};

/// The shipped default preset, preset format version 1.
RawBoostConfig default_rawboost_preset();

/// Key-value preset text: `key = value` lines, '#' comments. Keys are the
/// dotted field paths (e.g. `lnl.bank.n_bands`). Unknown keys are rejected.
RawBoostConfig parse_rawboost_preset(const std::string &text);
std::string serialize_rawboost_preset(const RawBoostConfig &cfg);
RawBoostConfig load_rawboost_preset(const std::string &path);

/// Hamming-windowed FIR band-stop rejecting [f1, f2]; odd length, unit
/// gain at DC.
std::vector<double> firwin_notch(int n_taps, double f1_hz, double f2_hz,
                                 double fs);
/// max |H(e^jw)| on 512 points of [0, pi).
double fir_peak_response(const std::vector<double> &taps);
/// Random cascade of notch filters scaled to a random peak gain.
std::vector<double> sample_filter_cascade(const FilterBankParams &p, double fs,
                                          Rng &rng);
/// FIR filtering of the zero-extended input, read back from offset
/// (taps - 1) / 2 (the group delay of an odd linear-phase filter) so the
/// output is aligned with and as long as the input.
std::vector<double> filter_centered(const std::vector<double> &x,
                                    const std::vector<double> &taps);

struct LnlDraw {
  /// filters[j] is applied to x^(j+1).
  std::vector<std::vector<double>> filters;
};
LnlDraw sample_lnl(const LnlParams &p, Rng &rng);
Waveform apply_lnl(const Waveform &w, const LnlDraw &draw);

struct IsdDraw {
  std::vector<size_t> positions;
  std::vector<double> factors;  // u1 * u2 per position
};
IsdDraw sample_isd(const IsdParams &p, size_t length, Rng &rng);
Waveform apply_isd(const Waveform &w, const IsdParams &p, const IsdDraw &draw);

/// The colored noise SSI adds, already scaled to the drawn SNR.
std::vector<double> ssi_noise(const Waveform &w, const SsiParams &p, Rng &rng);

Waveform rawboost_lnl(const Waveform &w, const RawBoostConfig &cfg, Rng &rng);
Waveform rawboost_isd(const Waveform &w, const RawBoostConfig &cfg, Rng &rng);
/// Throws ValidationError on all-zero input (SNR undefined).
Waveform rawboost_ssi(const Waveform &w, const RawBoostConfig &cfg, Rng &rng);

/// Applies cfg.mode. Series modes give stage k the stream rng.split(k)
/// (lnl = 1, isd = 2, ssi = 3).
Waveform rawboost(const Waveform &w, const RawBoostConfig &cfg, Rng &rng);

/// Returns the batch followed by one augmented copy of every item; item i
/// is augmented with rng.split(i).
std::vector<Waveform> augment_batch(const std::vector<Waveform> &batch,
                                    const RawBoostConfig &cfg, const Rng &rng);

/// Divides by the peak when it exceeds 1.
void clip_normalize(std::vector<double> &x);

}  // namespace sld

#endif  // SLD_AUGMENT_H_
