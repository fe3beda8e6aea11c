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

#include "sld/audio.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace sld {

namespace {

constexpr double kKaiserBeta = 8.6;
constexpr int kHalfZeroCrossings = 32;

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

// Kaiser window on |x| <= 1, tabulated and linearly interpolated.
class KaiserTable {
 public:
  explicit KaiserTable(double beta) : table_(kSize + 1) {
    const double norm = std::cyl_bessel_i(0.0, beta);
    for (size_t i = 0; i <= kSize; ++i) {
      const double x = static_cast<double>(i) / kSize;
      table_[i] = std::cyl_bessel_i(0.0, beta * std::sqrt(1.0 - x * x)) / norm;
    }
  }
  double operator()(double x) const {
    x = std::abs(x);
    if (x >= 1.0) return 0.0;
    const double pos = x * kSize;
    const auto i = static_cast<size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    return table_[i] + frac * (table_[i + 1] - table_[i]);
  }

 private:
  static constexpr size_t kSize = 16384;
  std::vector<double> table_;
};

const KaiserTable &kaiser() {
  static const KaiserTable table(kKaiserBeta);
  return table;
}

}  // namespace

double Waveform::peak() const {
  double p = 0.0;
  for (double s : samples) p = std::max(p, std::abs(s));
  return p;
}

std::vector<double> resample(std::span<const double> in, int src_rate,
                             int dst_rate) {
  if (src_rate <= 0 || dst_rate <= 0)
    throw ValidationError("resample: sample rates must be positive");
  if (src_rate == dst_rate) return {in.begin(), in.end()};
  const size_t n_in = in.size();
  const size_t n_out = static_cast<size_t>(std::llround(
      static_cast<double>(n_in) * dst_rate / static_cast<double>(src_rate)));
  const double ratio = static_cast<double>(dst_rate) / src_rate;
  // Cutoff relative to the input Nyquist; leave a margin below the output
  // Nyquist when decimating.
  const double cutoff = ratio < 1.0 ? 0.95 * ratio : 1.0;
  const double half_width = kHalfZeroCrossings / cutoff;
  const KaiserTable &window = kaiser();
  std::vector<double> out(n_out, 0.0);
  for (size_t m = 0; m < n_out; ++m) {
    const double t = static_cast<double>(m) / ratio;
    const auto lo = static_cast<int64_t>(std::ceil(t - half_width));
    const auto hi = static_cast<int64_t>(std::floor(t + half_width));
    double acc = 0.0;
    for (int64_t n = std::max<int64_t>(lo, 0);
         n <= std::min<int64_t>(hi, static_cast<int64_t>(n_in) - 1); ++n) {
      const double tau = t - static_cast<double>(n);
      acc += in[n] * cutoff * sinc(cutoff * tau) *
             window(tau / half_width);
    }
    out[m] = acc;
  }
  return out;
}

Waveform load_and_normalize(std::span<const double> raw, int src_rate) {
  if (raw.empty()) throw ValidationError("load_and_normalize: empty input");
  if (src_rate <= 0)
    throw ValidationError("load_and_normalize: sample rate must be positive");
  for (double s : raw)
    if (!std::isfinite(s))
      throw ValidationError("load_and_normalize: non-finite sample");
  Waveform w;
  w.sample_rate = kSampleRate;
  w.samples = resample(raw, src_rate, kSampleRate);
  if (w.samples.empty())
    throw ValidationError("load_and_normalize: input too short to resample");
  const double peak = w.peak();
  if (peak > 0.0)
    for (double &s : w.samples) s /= peak;
  return w;
}

Waveform truncate(const Waveform &w, double max_seconds) {
  if (!(max_seconds > 0.0))
    throw ValidationError("truncate: max_seconds must be positive");
  const auto limit =
      static_cast<size_t>(std::llround(max_seconds * w.sample_rate));
  if (w.size() <= limit) return w;
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.assign(w.samples.begin(), w.samples.begin() + limit);
  return out;
}

namespace {

struct FrameGrid {
  size_t frame_len;
  size_t hop;
  size_t count;
};

FrameGrid frame_grid(size_t n, int rate, const SilenceConfig &cfg) {
  if (!(cfg.frame_ms > 0.0) || !(cfg.hop_ms > 0.0))
    throw ValidationError("silence config: frame and hop must be positive");
  FrameGrid g;
  g.frame_len = std::max<size_t>(
      1, static_cast<size_t>(std::llround(cfg.frame_ms * rate / 1000.0)));
  g.hop = std::max<size_t>(
      1, static_cast<size_t>(std::llround(cfg.hop_ms * rate / 1000.0)));
  // Frames start at multiples of hop; the last may be partial.
  g.count = n <= g.frame_len ? 1 : 1 + (n - g.frame_len + g.hop - 1) / g.hop;
  return g;
}

std::vector<double> frame_rms(const Waveform &w, const FrameGrid &g) {
  std::vector<double> rms(g.count);
  for (size_t f = 0; f < g.count; ++f) {
    const size_t start = f * g.hop;
    const size_t end = std::min(w.size(), start + g.frame_len);
    double acc = 0.0;
    for (size_t i = start; i < end; ++i) acc += w.samples[i] * w.samples[i];
    rms[f] = end > start ? std::sqrt(acc / static_cast<double>(end - start))
                         : 0.0;
  }
  return rms;
}

}  // namespace

std::vector<bool> voiced_frames(const Waveform &w, const SilenceConfig &cfg) {
  const FrameGrid g = frame_grid(w.size(), w.sample_rate, cfg);
  const auto rms = frame_rms(w, g);
  const double peak = *std::max_element(rms.begin(), rms.end());
  const double threshold = peak * std::pow(10.0, -cfg.threshold_db / 20.0);
  std::vector<bool> voiced(g.count);
  for (size_t f = 0; f < g.count; ++f) voiced[f] = peak > 0.0 && rms[f] > threshold;
  return voiced;
}

Waveform remove_silence(const Waveform &w, const SilenceConfig &cfg) {
  if (w.samples.empty()) throw ValidationError("remove_silence: empty input");
  const FrameGrid g = frame_grid(w.size(), w.sample_rate, cfg);
  const auto voiced = voiced_frames(w, cfg);
  const bool any = std::find(voiced.begin(), voiced.end(), true) != voiced.end();
  Waveform out;
  out.sample_rate = w.sample_rate;
  if (!any) {
    const auto rms = frame_rms(w, g);
    const size_t best = static_cast<size_t>(
        std::max_element(rms.begin(), rms.end()) - rms.begin());
    const size_t start = best * g.hop;
    const size_t end = std::min(w.size(), start + g.frame_len);
    out.samples.assign(w.samples.begin() + start, w.samples.begin() + end);
    return out;
  }
  // Each sample follows the frame whose centre is nearest.
  out.samples.reserve(w.size());
  const double half = 0.5 * static_cast<double>(g.frame_len);
  const double last = static_cast<double>(g.count - 1);
  for (size_t i = 0; i < w.size(); ++i) {
    const double pos = (static_cast<double>(i) + 0.5 - half) / static_cast<double>(g.hop);
    const auto f = static_cast<size_t>(std::clamp(std::round(pos), 0.0, last));
    if (voiced[f]) out.samples.push_back(w.samples[i]);
  }
  return out;
}

size_t record_length_samples(const SampleRecord &r) {
  if (!r.duration_s)
    throw ValidationError("record '" + r.utt_id + "' has no duration");
  return static_cast<size_t>(std::llround(*r.duration_s * kSampleRate));
}

std::vector<std::vector<SampleRecord>> make_batches(
    const std::vector<SampleRecord> &records, size_t batch_size,
    bool length_sorted, Rng &rng) {
  if (batch_size == 0) throw ValidationError("make_batches: batch_size == 0");
  std::vector<std::vector<SampleRecord>> batches;
  if (records.empty()) return batches;
  std::vector<size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  if (length_sorted) {
    std::vector<size_t> lengths(records.size());
    for (size_t i = 0; i < records.size(); ++i)
      lengths[i] = record_length_samples(records[i]);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return lengths[a] < lengths[b];
    });
  } else {
    rng.shuffle(order);
  }
  for (size_t start = 0; start < order.size(); start += batch_size) {
    std::vector<SampleRecord> batch;
    const size_t end = std::min(order.size(), start + batch_size);
    for (size_t i = start; i < end; ++i) batch.push_back(records[order[i]]);
    batches.push_back(std::move(batch));
  }
  rng.shuffle(batches);
  return batches;
}

size_t total_padding(const std::vector<std::vector<SampleRecord>> &batches) {
  size_t pad = 0;
  for (const auto &b : batches) {
    size_t t_max = 0;
    for (const auto &r : b) t_max = std::max(t_max, record_length_samples(r));
    for (const auto &r : b) pad += t_max - record_length_samples(r);
  }
  return pad;
}

PaddedBatch pad_batch(const std::vector<Waveform> &waves,
                      std::vector<std::string> ids) {
  if (waves.empty()) throw ValidationError("pad_batch: empty batch");
  if (!ids.empty() && ids.size() != waves.size())
    throw ValidationError("pad_batch: id count does not match batch size");
  size_t t_max = 0;
  for (const auto &w : waves) {
    if (w.sample_rate != kSampleRate)
      throw ValidationError("pad_batch: waveform is not 16 kHz");
    t_max = std::max(t_max, w.size());
  }
  PaddedBatch b;
  b.data = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(waves.size()),
                                 static_cast<Eigen::Index>(t_max));
  for (size_t i = 0; i < waves.size(); ++i) {
    for (size_t t = 0; t < waves[i].size(); ++t)
      b.data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) =
          waves[i].samples[t];
    b.lengths.push_back(waves[i].size());
  }
  b.record_ids = std::move(ids);
  return b;
}

std::vector<Waveform> unpad_batch(const PaddedBatch &batch) {
  std::vector<Waveform> out(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    out[i].samples.resize(batch.lengths[i]);
    for (size_t t = 0; t < batch.lengths[i]; ++t)
      out[i].samples[t] =
          batch.data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t));
  }
  return out;
}

}  // namespace sld
