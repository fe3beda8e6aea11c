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

#ifndef SLD_AUDIO_H_
#define SLD_AUDIO_H_

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "sld/common.h"
#include "sld/corpus.h"

namespace sld {

inline constexpr int kSampleRate = 16000;

/// Mono audio. After load_and_normalize: 16 kHz, peak |x| <= 1, non-empty.
struct Waveform {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  size_t size() const { return samples.size(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
  double peak() const;
};

/// Row i holds item i, zero beyond lengths[i].
struct PaddedBatch {
  Eigen::MatrixXd data;  // B x T_max, row-major semantics via rows()
  std::vector<size_t> lengths;
  std::vector<std::string> record_ids;

  size_t size() const { return lengths.size(); }
  size_t max_length() const { return static_cast<size_t>(data.cols()); }
};

struct SilenceConfig {
  double frame_ms = 25.0;
  double hop_ms = 10.0;
  /// Frames whose RMS is more than this many dB below the loudest frame are
  /// treated as silence.
  double threshold_db = 40.0;
};

/// Band-limited resampling with a Kaiser-windowed sinc kernel.
/// Output length is round(n * dst_rate / src_rate).
std::vector<double> resample(std::span<const double> in, int src_rate,
                             int dst_rate);

/// Resamples to 16 kHz and scales so that max |x| == 1 (an all-zero input
/// stays all-zero). Throws ValidationError on empty or non-finite input or a
/// non-positive rate.
Waveform load_and_normalize(std::span<const double> raw, int src_rate);

/// Keeps the first max_seconds of audio. Training path only.
Waveform truncate(const Waveform &w, double max_seconds = 10.0);

/// Drops silent frames. Each sample is kept when the frame whose centre is
/// nearest to it is voiced; when no frame is voiced the single loudest
/// frame is returned, so the output is never empty.
Waveform remove_silence(const Waveform &w, const SilenceConfig &cfg = {});

/// Per-frame voiced decisions used by remove_silence (exposed for tests).
std::vector<bool> voiced_frames(const Waveform &w, const SilenceConfig &cfg);

/// Number of samples a record occupies at 16 kHz; requires duration_s.
size_t record_length_samples(const SampleRecord &r);

/// Groups records into batches of batch_size. With length_sorted the records
/// are ordered by duration (ties by input order) and chunked contiguously;
/// otherwise they are shuffled before chunking. The final partial batch is
/// kept. Batch order is then shuffled with `rng`. Every record must carry a
/// duration. Throws ValidationError for batch_size == 0.
std::vector<std::vector<SampleRecord>> make_batches(
    const std::vector<SampleRecord> &records, size_t batch_size,
    bool length_sorted, Rng &rng);

/// Sum over batches of sum_i (T_max - length_i), in samples.
size_t total_padding(const std::vector<std::vector<SampleRecord>> &batches);

PaddedBatch pad_batch(const std::vector<Waveform> &waves,
                      std::vector<std::string> ids = {});
std::vector<Waveform> unpad_batch(const PaddedBatch &batch);

}  // namespace sld

#endif  // SLD_AUDIO_H_
