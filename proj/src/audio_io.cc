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

#include "sld/audio_io.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>

namespace sld {

namespace {

std::vector<uint8_t> read_bytes(const std::string &path, size_t limit = 0) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open audio file '" + path + "'");
  std::vector<uint8_t> bytes;
  if (limit == 0) {
    in.seekg(0, std::ios::end);
    bytes.resize(static_cast<size_t>(in.tellg()));
    in.seekg(0);
  } else {
    bytes.resize(limit);
  }
  in.read(reinterpret_cast<char *>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  bytes.resize(static_cast<size_t>(in.gcount()));
  return bytes;
}

uint32_t le16(const uint8_t *p) { return p[0] | (p[1] << 8); }
uint32_t le32(const uint8_t *p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

bool is_flac(const std::vector<uint8_t> &b) {
  return b.size() >= 4 && std::memcmp(b.data(), "fLaC", 4) == 0;
}

struct WavFormat {
  uint16_t format = 0;
  uint16_t channels = 0;
  uint32_t rate = 0;
  uint16_t bits = 0;
  size_t data_offset = 0;
  size_t data_size = 0;
};

WavFormat parse_wav_header(const std::vector<uint8_t> &b, bool need_data) {
  if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 ||
      std::memcmp(b.data() + 8, "WAVE", 4) != 0)
    throw LoadError("not a RIFF/WAVE file");
  WavFormat f;
  bool have_fmt = false;
  size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const uint32_t size = le32(b.data() + pos + 4);
    const uint8_t *body = b.data() + pos + 8;
    if (std::memcmp(b.data() + pos, "fmt ", 4) == 0) {
      if (size < 16 || pos + 8 + 16 > b.size())
        throw LoadError("truncated fmt chunk");
      f.format = static_cast<uint16_t>(le16(body));
      f.channels = static_cast<uint16_t>(le16(body + 2));
      f.rate = le32(body + 4);
      f.bits = static_cast<uint16_t>(le16(body + 14));
      if (f.format == 0xFFFE && size >= 26 && pos + 8 + 26 <= b.size())
        f.format = static_cast<uint16_t>(le16(body + 24));  // extensible
      have_fmt = true;
    } else if (std::memcmp(b.data() + pos, "data", 4) == 0) {
      if (!have_fmt) throw LoadError("data chunk before fmt chunk");
      f.data_offset = pos + 8;
      f.data_size = size;
      if (need_data && f.data_offset + f.data_size > b.size()) {
        // 0 and 0xFFFFFFFF are streaming placeholders: read to the end.
        if (size != 0 && size != 0xFFFFFFFFu) throw LoadError("WAV data chunk truncated");
        f.data_size = b.size() - f.data_offset;
      }
      return f;
    }
    pos += 8 + size + (size & 1);
  }
  throw LoadError("WAV file has no data chunk");
}

}  // namespace

RawAudio decode_wav(const std::vector<uint8_t> &b) {
  const WavFormat f = parse_wav_header(b, true);
  if (f.channels == 0) throw LoadError("WAV file declares zero channels");
  if (f.rate == 0) throw LoadError("WAV file declares zero sample rate");
  const bool is_float = f.format == 3;
  if (f.format != 1 && !is_float)
    throw LoadError("unsupported WAV encoding " + std::to_string(f.format));
  if (is_float ? (f.bits != 32 && f.bits != 64)
               : (f.bits != 8 && f.bits != 16 && f.bits != 24 && f.bits != 32))
    throw LoadError("unsupported WAV bit depth " + std::to_string(f.bits));
  const size_t bytes_per = f.bits / 8;
  const size_t frame_bytes = bytes_per * f.channels;
  const size_t n_frames = f.data_size / frame_bytes;
  RawAudio out;
  out.sample_rate = static_cast<int>(f.rate);
  out.samples.assign(n_frames, 0.0);
  const uint8_t *p = b.data() + f.data_offset;
  for (size_t i = 0; i < n_frames; ++i) {
    double acc = 0.0;
    for (size_t c = 0; c < f.channels; ++c, p += bytes_per) {
      double v = 0.0;
      if (is_float && f.bits == 32) {
        float x;
        std::memcpy(&x, p, 4);
        v = x;
      } else if (is_float) {
        std::memcpy(&v, p, 8);
      } else if (f.bits == 8) {
        v = (static_cast<int>(p[0]) - 128) / 128.0;
      } else if (f.bits == 16) {
        v = static_cast<int16_t>(le16(p)) / 32768.0;
      } else if (f.bits == 24) {
        int32_t x = p[0] | (p[1] << 8) | (p[2] << 16);
        if (x & 0x800000) x -= 0x1000000;
        v = x / 8388608.0;
      } else {
        v = static_cast<int32_t>(le32(p)) / 2147483648.0;
      }
      acc += v;
    }
    out.samples[i] = acc / f.channels;
  }
  return out;
}

RawAudio read_audio_file(const std::string &path) {
  const auto bytes = read_bytes(path);
  try {
    return is_flac(bytes) ? decode_flac(bytes) : decode_wav(bytes);
  } catch (const LoadError &e) {
    throw LoadError(path + ": " + e.what());
  }
}

double probe_duration(const std::string &path) {
  const auto head = read_bytes(path, 1 << 16);
  try {
    if (is_flac(head)) {
      // STREAMINFO is mandatory and always the first metadata block.
      if (head.size() < 8 + 34) throw LoadError("truncated FLAC header");
      const uint8_t *si = head.data() + 8;
      const uint32_t rate = (si[10] << 12) | (si[11] << 4) | (si[12] >> 4);
      const uint64_t total = (static_cast<uint64_t>(si[13] & 0x0f) << 32) |
                             (static_cast<uint64_t>(si[14]) << 24) |
                             (si[15] << 16) | (si[16] << 8) | si[17];
      if (rate == 0) throw LoadError("FLAC stream declares zero sample rate");
      if (total == 0) return read_audio_file(path).samples.size() /
                             static_cast<double>(rate);
      return static_cast<double>(total) / rate;
    }
    const WavFormat f = parse_wav_header(head, false);
    if (f.channels == 0 || f.bits == 0 || f.rate == 0)
      throw LoadError("bad WAV header");
    return static_cast<double>(f.data_size / (f.bits / 8 * f.channels)) /
           f.rate;
  } catch (const LoadError &e) {
    throw LoadError(path + ": " + e.what());
  }
}

std::vector<uint8_t> encode_wav(const std::vector<double> &samples,
                                int sample_rate) {
  const uint32_t data_size = static_cast<uint32_t>(samples.size() * 4);
  std::vector<uint8_t> b(44 + data_size);
  auto put16 = [&](size_t at, uint32_t v) {
    b[at] = v & 0xff;
    b[at + 1] = (v >> 8) & 0xff;
  };
  auto put32 = [&](size_t at, uint32_t v) {
    for (int i = 0; i < 4; ++i) b[at + i] = (v >> (8 * i)) & 0xff;
  };
  std::memcpy(b.data(), "RIFF", 4);
  put32(4, 36 + data_size);
  std::memcpy(b.data() + 8, "WAVEfmt ", 8);
  put32(16, 16);
  put16(20, 3);
  put16(22, 1);
  put32(24, static_cast<uint32_t>(sample_rate));
  put32(28, static_cast<uint32_t>(sample_rate) * 4);
  put16(32, 4);
  put16(34, 32);
  std::memcpy(b.data() + 36, "data", 4);
  put32(40, data_size);
  for (size_t i = 0; i < samples.size(); ++i) {
    const float x = static_cast<float>(samples[i]);
    std::memcpy(b.data() + 44 + 4 * i, &x, 4);
  }
  return b;
}

void write_wav(const std::string &path, const std::vector<double> &samples,
               int sample_rate) {
  const auto b = encode_wav(samples, sample_rate);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char *>(b.data()),
            static_cast<std::streamsize>(b.size()));
}

std::string resolve_audio_path(const std::string &root,
                               const std::string &path) {
  std::filesystem::path p(path);
  if (p.is_absolute() || root.empty()) return path;
  return (std::filesystem::path(root) / p).string();
}

AudioProvider file_audio_provider(std::string root) {
  return [root = std::move(root)](const SampleRecord &r) {
    const RawAudio raw = read_audio_file(resolve_audio_path(root, r.audio_path));
    if (raw.samples.empty())
      throw LoadError("audio file for '" + r.utt_id + "' is empty");
    return load_and_normalize(raw.samples, raw.sample_rate);
  };
}

AudioProvider memory_audio_provider(
    std::shared_ptr<const std::map<std::string, Waveform>> store) {
  return [store = std::move(store)](const SampleRecord &r) {
    auto it = store->find(r.utt_id);
    if (it == store->end())
      throw LoadError("no audio for '" + r.utt_id + "'");
    return it->second;
  };
}

void resolve_durations(std::vector<SampleRecord> &records,
                       const std::string &root) {
  for (auto &r : records)
    if (!r.duration_s)
      r.duration_s = probe_duration(resolve_audio_path(root, r.audio_path));
}

}  // namespace sld
