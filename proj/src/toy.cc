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

#include "sld/toy.h"

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "sld/audio_io.h"
#include "sld/encoder.h"

namespace sld {

namespace {

constexpr int kGroups = kToyBands / kToyBandsPerGroup;

Eigen::MatrixXd random_map(int rows, int cols, Rng &rng) {
  Eigen::MatrixXd m(rows, cols);
  const double s = 1.0 / std::sqrt(static_cast<double>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = s * rng.normal();
  return m;
}

Eigen::VectorXd normal_vector(int n, Rng &rng) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

struct World {
  Eigen::MatrixXd style_map;   // groups x k
  Eigen::MatrixXd detail_map;  // bands x k
};

Waveform render(const ToyCorpusOptions &o, const World &world,
                const Eigen::VectorXd &content, const Eigen::VectorXd &style,
                Rng &rng) {
  const double dur = rng.uniform(o.min_duration_s, o.max_duration_s);
  const auto n = static_cast<size_t>(std::llround(dur * kSampleRate));

  Eigen::VectorXd log_gain = o.world.style_scale * (world.style_map * style);
  for (int g = 0; g < kGroups; ++g) log_gain(g) += o.world.speaker_noise * rng.normal();
  Eigen::VectorXd amp = (o.world.detail_scale * (world.detail_map * content)).array().exp();
  for (int g = 0; g < kGroups; ++g) {
    auto seg = amp.segment(g * kToyBandsPerGroup, kToyBandsPerGroup);
    seg /= std::sqrt(seg.squaredNorm() / kToyBandsPerGroup);
    seg *= std::exp(log_gain(g));
  }

  const auto centers = toy_band_centers();
  std::vector<double> phase(kToyBands);
  for (auto &p : phase) p = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double rate = rng.uniform(2.0, 5.0);
  const double env_phase = rng.uniform(0.0, std::numbers::pi);

  // Phasor recurrence per band, re-anchored every kAnchor samples.
  constexpr size_t kAnchor = 4096;
  std::vector<std::complex<double>> z(kToyBands), step(kToyBands);
  for (int k = 0; k < kToyBands; ++k)
    step[static_cast<size_t>(k)] = std::polar(
        1.0, 2.0 * std::numbers::pi * centers[static_cast<size_t>(k)] / kSampleRate);

  Waveform w;
  w.samples.assign(n, 0.0);
  double power = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / kSampleRate;
    if (i % kAnchor == 0)
      for (size_t k = 0; k < z.size(); ++k)
        z[k] = std::polar(1.0, 2.0 * std::numbers::pi * centers[k] * t + phase[k]);
    const double s = std::sin(std::numbers::pi * rate * t + env_phase);
    const double env = 0.4 + 0.6 * s * s;
    double acc = 0.0;
    for (size_t k = 0; k < z.size(); ++k) {
      acc += amp(static_cast<Eigen::Index>(k)) * z[k].imag();
      z[k] *= step[k];
    }
    w.samples[i] = env * acc;
    power += w.samples[i] * w.samples[i];
  }
  power /= static_cast<double>(n);
  const double noise_sd = std::sqrt(power / std::pow(10.0, o.snr_db / 10.0));
  double peak = 0.0;
  for (auto &v : w.samples) {
    v += noise_sd * rng.normal();
    peak = std::max(peak, std::abs(v));
  }
  for (auto &v : w.samples) v /= peak;
  return w;
}

}  // namespace

ToyCorpus synth_toy_corpus(const ToyCorpusOptions &o) {
  if (o.n_bonafide < 0 || o.n_spoof < 0)
    throw ValidationError("toy corpus sizes must be nonnegative");
  if (o.n_spoof > 0 && o.attacks.empty())
    throw ValidationError("toy corpus with spoof items needs at least one attack");
  if (!(o.min_duration_s > 0.05 && o.min_duration_s <= o.max_duration_s))
    throw ValidationError("toy corpus durations must satisfy 0.05 < min <= max");
  if (o.world.content_dim < 1) throw ValidationError("toy content_dim must be >= 1");
  for (const auto &a : o.attacks)
    if (!(a.correlation >= 0.0 && a.correlation <= 1.0))
      throw ValidationError("attack correlation must lie in [0, 1]");

  Rng world_rng(o.world.seed);
  World world;
  world.style_map = random_map(kGroups, o.world.content_dim, world_rng);
  world.detail_map = random_map(kToyBands, o.world.content_dim, world_rng);

  struct Item {
    Label label;
    int attack;
  };
  std::vector<Item> items;
  for (int i = 0; i < o.n_bonafide; ++i) items.push_back({Label::kBonafide, -1});
  for (int i = 0; i < o.n_spoof; ++i)
    items.push_back({Label::kSpoof, i % static_cast<int>(o.attacks.size())});
  const Rng root(o.seed);
  Rng order = root.split(0);
  order.shuffle(items);

  ToyCorpus out;
  out.audio = std::make_shared<std::map<std::string, Waveform>>();
  for (size_t i = 0; i < items.size(); ++i) {
    Rng rng = root.split(i + 1);
    const int k = o.world.content_dim;
    const Eigen::VectorXd content = normal_vector(k, rng);
    Eigen::VectorXd style = content;
    SampleRecord r;
    char id[64];
    std::snprintf(id, sizeof id, "%s_%05zu", o.prefix.c_str(), i);
    r.utt_id = id;
    r.audio_path = r.utt_id + ".wav";
    r.label = items[i].label;
    if (items[i].label == Label::kSpoof) {
      const ToyAttack &a = o.attacks[static_cast<size_t>(items[i].attack)];
      const Eigen::VectorXd other = normal_vector(k, rng);
      style = a.correlation * content +
              std::sqrt(1.0 - a.correlation * a.correlation) * other;
      r.attack_id = a.id;
    }
    if (!o.codecs.empty()) r.codec_id = o.codecs[i % o.codecs.size()];
    Waveform w = render(o, world, content, style, rng);
    r.duration_s = w.duration_s();
    (*out.audio)[r.utt_id] = std::move(w);
    out.records.push_back(std::move(r));
  }
  return out;
}

void write_toy_corpus(const ToyCorpus &corpus, const std::string &dir,
                      const std::string &manifest_path) {
  std::filesystem::create_directories(dir);
  for (const auto &r : corpus.records)
    write_wav((std::filesystem::path(dir) / r.audio_path).string(),
              corpus.audio->at(r.utt_id).samples, kSampleRate);
  write_manifest_file(manifest_path, corpus.records, ManifestFormat::kCsv);
}

}  // namespace sld
