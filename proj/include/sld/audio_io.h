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

#ifndef SLD_AUDIO_IO_H_
#define SLD_AUDIO_IO_H_

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sld/audio.h"
#include "sld/corpus.h"

namespace sld {

/// Decoded audio, channels averaged to mono, samples in [-1, 1].
struct RawAudio {
  std::vector<double> samples;
  int sample_rate = 0;
};

/// Reads RIFF/WAVE (PCM 8/16/24/32-bit, IEEE float 32/64) or FLAC.
/// Throws LoadError.
RawAudio read_audio_file(const std::string &path);
RawAudio decode_wav(const std::vector<uint8_t> &bytes);
RawAudio decode_flac(const std::vector<uint8_t> &bytes);

/// Duration in seconds from the file header alone.
double probe_duration(const std::string &path);

/// Writes 32-bit float mono WAV.
void write_wav(const std::string &path, const std::vector<double> &samples,
               int sample_rate);
std::vector<uint8_t> encode_wav(const std::vector<double> &samples,
                                int sample_rate);

/// Yields the normalized 16 kHz waveform for a record.
using AudioProvider = std::function<Waveform(const SampleRecord &)>;

/// Loads record audio from disk; relative paths resolve against `root`.
AudioProvider file_audio_provider(std::string root);

/// Serves waveforms held in memory, keyed by utt_id. Throws LoadError for
/// unknown ids.
AudioProvider memory_audio_provider(
    std::shared_ptr<const std::map<std::string, Waveform>> store);

/// Fills in missing durations by probing the audio headers under `root`.
void resolve_durations(std::vector<SampleRecord> &records,
                       const std::string &root);

std::string resolve_audio_path(const std::string &root,
                               const std::string &path);

}  // namespace sld

#endif  // SLD_AUDIO_IO_H_
