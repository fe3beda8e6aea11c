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

#ifndef SLD_ENCODER_H_
#define SLD_ENCODER_H_

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sld/audio.h"

namespace sld {

/// Encoder output X in R^{L x F x T}: one F x T matrix per layer.
struct LayeredRepresentation {
  std::vector<Eigen::MatrixXd> layers;
  double frame_rate = 50.0;

  int layer_count() const { return static_cast<int>(layers.size()); }
  int feature_dim() const {
    return layers.empty() ? 0 : static_cast<int>(layers[0].rows());
  }
  int time_steps() const {
    return layers.empty() ? 0 : static_cast<int>(layers[0].cols());
  }
  /// Plain average over layers (F x T).
  Eigen::MatrixXd layer_mean() const;
  /// Throws ValidationError on ragged shapes or non-finite entries.
  void validate() const;
};

/// Inclusive layer index range.
struct LayerRange {
  int first = 0;
  int last = 0;

  int size() const { return last - first + 1; }
  bool contains(int i) const { return i >= first && i <= last; }
};

struct LayerViewSpec {
  LayerRange style{0, 7};
  LayerRange linguistics{8, 11};

  /// Throws ValidationError unless both ranges are nonempty, disjoint and
  /// inside [0, layer_count).
  void validate(int layer_count) const;
};

/// Style and linguistics slices of a representation.
std::pair<LayeredRepresentation, LayeredRepresentation> split_views(
    const LayeredRepresentation &rep, const LayerViewSpec &spec);

/// A frozen layered speech encoder. Implementations are immutable after
/// construction and encode() may be called concurrently.
class Encoder {
 public:
  virtual ~Encoder() = default;

  /// Throws ValidationError when the waveform is not 16 kHz or shorter than
  /// one hop.
  virtual LayeredRepresentation encode(const Waveform &w) const = 0;
  virtual int layer_count() const = 0;
  virtual int feature_dim() const = 0;
  virtual int hop() const = 0;
  /// Canonical descriptor; part of the config fingerprint.
  virtual std::string descriptor() const = 0;

  double frame_rate() const { return static_cast<double>(kSampleRate) / hop(); }
};

using EncoderHandle = std::shared_ptr<const Encoder>;

struct ToyEncoderOptions {
  uint64_t seed = 0;
  int layers = 12;
  int dim = 768;
  int hop = 320;
};

/// Deterministic stand-in for a pretrained backbone.
///
/// Frames are analysed by 32 Hann-windowed complex sinusoids (150 Hz to
/// 6350 Hz, 200 Hz apart) grouped into 8 coarse bands of 4. Layer 0 is a
/// random projection of the coarse-band RMS magnitudes (positively
/// homogeneous of degree 1 in the input). The remaining layers of the first ceil(2L/3)
/// carry log coarse-band energies smoothed over a window that widens with
/// depth; the last layers carry log fine magnitudes normalized within their
/// coarse band, i.e. frame-local spectral detail. Every layer uses its own
/// seeded random projection to `dim` features.
EncoderHandle make_toy_encoder(const ToyEncoderOptions &options);

/// Fine-band centre frequencies used by the toy encoder.
std::vector<double> toy_band_centers();
inline constexpr int kToyBands = 32;
inline constexpr int kToyBandsPerGroup = 4;

struct ExternalEncoderOptions {
  /// Keep a leading embedding-layer output when the model reports one.
  bool include_embedding_layer = false;
  /// When set, the probed layer count must satisfy this view spec.
  std::optional<LayerViewSpec> view_spec;
};

/// Wraps an external model executable. The program reads one request on
/// stdin ("SLDWAV1\n", u32 n, u32 rate, n float32 samples; little endian),
/// must consume all of it, then writes "SLDREP1\n", u32 L, u32 F, u32 T,
/// u32 flags (bit 0: layer 0 is the embedding output) and L*F*T float32
/// values in layer, feature, time order. The model is probed once at
/// construction; failures raise LoadError.
EncoderHandle external_encoder_adapter(const std::string &program,
                                       const ExternalEncoderOptions &options);

/// Parses "toy[:seed=S,layers=L,dim=F,hop=H]" or "exec:<program>".
EncoderHandle make_encoder(const std::string &descriptor,
                           const ExternalEncoderOptions &options = {});

}  // namespace sld

#endif  // SLD_ENCODER_H_
