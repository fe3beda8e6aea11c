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

#ifndef SLD_TOY_H_
#define SLD_TOY_H_

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sld/audio.h"
#include "sld/corpus.h"

namespace sld {

// Synthetic corpus matched to the toy encoder's filterbank.
//
// Every utterance has a latent content vector c ~ N(0, I_k). Content sets
// the tone amplitudes inside each coarse band (what the linguistics layers
// see); a style vector sets the coarse band gains (what the style layers
// see). Bonafide items derive style from their own content,
// style = B c + speaker noise. Spoof items of an attack with correlation r
// derive style from r c + sqrt(1 - r^2) c' with an unrelated c'. The
// marginal statistics of each view are identical across classes; only the
// coupling between them differs.

struct ToyWorld {
  /// Seeds the content-to-style and content-to-detail maps shared by every
  /// partition drawn from this world.
  uint64_t seed = 0;
  int content_dim = 4;
  double style_scale = 1.0;
  double detail_scale = 1.0;
  double speaker_noise = 0.15;
};

struct ToyAttack {
  std::string id;
  double correlation = 0.0;
};

struct ToyCorpusOptions {
  ToyWorld world;
  uint64_t seed = 1;
  std::string prefix = "toy";
  int n_bonafide = 100;
  int n_spoof = 100;
  std::vector<ToyAttack> attacks{{"A01", 0.0}, {"A02", 0.0}};
  /// Optional codec labels assigned round-robin (metadata only).
  std::vector<std::string> codecs;
  double min_duration_s = 1.0;
  double max_duration_s = 2.0;
  double snr_db = 30.0;
};

struct ToyCorpus {
  std::vector<SampleRecord> records;
  std::shared_ptr<std::map<std::string, Waveform>> audio;
};

/// Deterministic in the options. Records are interleaved bonafide/spoof in a
/// seeded order; audio_path is "<utt_id>.wav" and duration_s is exact.
ToyCorpus synth_toy_corpus(const ToyCorpusOptions &options);

/// Writes every waveform as 32-bit float WAV under dir and the manifest as
/// CSV at manifest_path.
void write_toy_corpus(const ToyCorpus &corpus, const std::string &dir,
                      const std::string &manifest_path);

}  // namespace sld

#endif  // SLD_TOY_H_
