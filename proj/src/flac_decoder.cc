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

// Minimal FLAC decoder: STREAMINFO plus CONSTANT, VERBATIM, FIXED and LPC
// subframes with Rice-coded residuals and all stereo decorrelation modes.
// Frame CRCs are not verified.

#include <cstring>

#include "sld/audio_io.h"

namespace sld {

namespace {

class BitReader {
 public:
  BitReader(const uint8_t *data, size_t size) : data_(data), size_(size) {}

  uint32_t bits(int n) {
    uint32_t v = 0;
    for (int i = 0; i < n; ++i) v = (v << 1) | bit();
    return v;
  }
  uint64_t bits64(int n) {
    uint64_t v = 0;
    for (int i = 0; i < n; ++i) v = (v << 1) | bit();
    return v;
  }
  int64_t signed_bits(int n) {
    if (n == 0) return 0;
    uint64_t v = bits64(n);
    if (v & (uint64_t{1} << (n - 1))) return static_cast<int64_t>(v) - (int64_t{1} << n);
    return static_cast<int64_t>(v);
  }
  uint32_t unary() {
    uint32_t q = 0;
    while (bit() == 0) ++q;
    return q;
  }
  void align() { pos_ = (pos_ + 7) & ~size_t{7}; }
  size_t byte_pos() const { return pos_ / 8; }
  void seek_byte(size_t b) { pos_ = b * 8; }
  bool at_end() const { return pos_ / 8 >= size_; }

 private:
  uint32_t bit() {
    if (pos_ / 8 >= size_) throw LoadError("FLAC stream truncated");
    uint32_t b = (data_[pos_ / 8] >> (7 - pos_ % 8)) & 1;
    ++pos_;
    return b;
  }

  const uint8_t *data_;
  size_t size_;
  size_t pos_ = 0;
};

struct StreamInfo {
  uint32_t rate = 0;
  uint32_t channels = 0;
  uint32_t bps = 0;
  uint64_t total = 0;
};

void decode_residual(BitReader &br, int order, uint32_t block_size,
                     std::vector<int64_t> &out) {
  const uint32_t method = br.bits(2);
  if (method > 1) throw LoadError("reserved FLAC residual coding method");
  const int param_bits = method == 0 ? 4 : 5;
  const uint32_t escape = method == 0 ? 15 : 31;
  const uint32_t part_order = br.bits(4);
  const uint32_t partitions = 1u << part_order;
  if ((block_size >> part_order) < static_cast<uint32_t>(order) && part_order)
    throw LoadError("FLAC residual partition smaller than predictor order");
  for (uint32_t p = 0; p < partitions; ++p) {
    uint32_t n = block_size >> part_order;
    if (p == 0) n -= static_cast<uint32_t>(order);
    const uint32_t k = br.bits(param_bits);
    if (k == escape) {
      const int raw = static_cast<int>(br.bits(5));
      for (uint32_t i = 0; i < n; ++i) out.push_back(br.signed_bits(raw));
    } else {
      for (uint32_t i = 0; i < n; ++i) {
        const uint64_t u = (static_cast<uint64_t>(br.unary()) << k) | br.bits64(static_cast<int>(k));
        out.push_back(static_cast<int64_t>(u >> 1) ^ -static_cast<int64_t>(u & 1));
      }
    }
  }
}

std::vector<int64_t> decode_subframe(BitReader &br, uint32_t block_size,
                                     int bps) {
  if (br.bits(1) != 0) throw LoadError("FLAC subframe padding bit set");
  const uint32_t type = br.bits(6);
  int wasted = 0;
  if (br.bits(1)) wasted = static_cast<int>(br.unary()) + 1;
  bps -= wasted;
  std::vector<int64_t> s;
  s.reserve(block_size);
  if (type == 0) {
    s.assign(block_size, br.signed_bits(bps));
  } else if (type == 1) {
    for (uint32_t i = 0; i < block_size; ++i) s.push_back(br.signed_bits(bps));
  } else if (type >= 8 && type <= 12) {
    const int order = static_cast<int>(type - 8);
    for (int i = 0; i < order; ++i) s.push_back(br.signed_bits(bps));
    std::vector<int64_t> res;
    decode_residual(br, order, block_size, res);
    for (int64_t r : res) {
      const size_t n = s.size();
      int64_t pred = 0;
      switch (order) {
        case 1: pred = s[n - 1]; break;
        case 2: pred = 2 * s[n - 1] - s[n - 2]; break;
        case 3: pred = 3 * s[n - 1] - 3 * s[n - 2] + s[n - 3]; break;
        case 4: pred = 4 * s[n - 1] - 6 * s[n - 2] + 4 * s[n - 3] - s[n - 4]; break;
        default: break;
      }
      s.push_back(pred + r);
    }
  } else if (type >= 32) {
    const int order = static_cast<int>(type - 31);
    for (int i = 0; i < order; ++i) s.push_back(br.signed_bits(bps));
    const uint32_t precision = br.bits(4) + 1;
    if (precision == 16) throw LoadError("invalid FLAC LPC precision");
    const int64_t shift = br.signed_bits(5);
    if (shift < 0) throw LoadError("negative FLAC LPC shift");
    std::vector<int64_t> coef(order);
    for (auto &c : coef) c = br.signed_bits(static_cast<int>(precision));
    std::vector<int64_t> res;
    decode_residual(br, order, block_size, res);
    for (int64_t r : res) {
      const size_t n = s.size();
      int64_t acc = 0;
      for (int j = 0; j < order; ++j) acc += coef[j] * s[n - 1 - j];
      s.push_back((acc >> shift) + r);
    }
  } else {
    throw LoadError("reserved FLAC subframe type");
  }
  if (s.size() != block_size) throw LoadError("FLAC subframe length mismatch");
  if (wasted)
    for (auto &v : s) v *= int64_t{1} << wasted;
  return s;
}

uint32_t block_size_from_code(uint32_t code, BitReader &br) {
  if (code == 1) return 192;
  if (code >= 2 && code <= 5) return 576u << (code - 2);
  if (code == 6) return br.bits(8) + 1;
  if (code == 7) return br.bits(16) + 1;
  if (code >= 8) return 256u << (code - 8);
  throw LoadError("reserved FLAC block size code");
}

}  // namespace

RawAudio decode_flac(const std::vector<uint8_t> &bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "fLaC", 4) != 0)
    throw LoadError("not a FLAC stream");
  BitReader br(bytes.data(), bytes.size());
  br.seek_byte(4);
  StreamInfo info;
  bool last = false;
  bool have_info = false;
  while (!last) {
    last = br.bits(1);
    const uint32_t type = br.bits(7);
    const uint32_t len = br.bits(24);
    const size_t body = br.byte_pos();
    if (type == 0) {
      br.bits(16);
      br.bits(16);
      br.bits(24);
      br.bits(24);
      info.rate = br.bits(20);
      info.channels = br.bits(3) + 1;
      info.bps = br.bits(5) + 1;
      info.total = br.bits64(36);
      have_info = true;
    }
    br.seek_byte(body + len);
  }
  if (!have_info) throw LoadError("FLAC stream lacks STREAMINFO");
  if (info.rate == 0) throw LoadError("FLAC stream declares zero sample rate");

  RawAudio out;
  out.sample_rate = static_cast<int>(info.rate);
  if (info.total) out.samples.reserve(info.total);
  const double scale = 1.0 / static_cast<double>(int64_t{1} << (info.bps - 1));

  while (!br.at_end()) {
    const size_t frame_start = br.byte_pos();
    if (br.bits(14) != 0x3ffe) {
      // Trailing garbage (e.g. ID3 tags) ends decoding.
      if (!out.samples.empty()) break;
      throw LoadError("FLAC frame sync not found");
    }
    br.bits(1);
    br.bits(1);  // blocking strategy
    const uint32_t bs_code = br.bits(4);
    const uint32_t rate_code = br.bits(4);
    const uint32_t chan_code = br.bits(4);
    const uint32_t size_code = br.bits(3);
    br.bits(1);
    // UTF-8 style coded frame/sample number.
    uint32_t first = br.bits(8);
    int extra = 0;
    if ((first & 0x80) == 0) extra = 0;
    else if ((first & 0xe0) == 0xc0) extra = 1;
    else if ((first & 0xf0) == 0xe0) extra = 2;
    else if ((first & 0xf8) == 0xf0) extra = 3;
    else if ((first & 0xfc) == 0xf8) extra = 4;
    else if ((first & 0xfe) == 0xfc) extra = 5;
    else if (first == 0xfe) extra = 6;
    else throw LoadError("bad FLAC frame number");
    for (int i = 0; i < extra; ++i) br.bits(8);
    const uint32_t block_size = block_size_from_code(bs_code, br);
    if (rate_code == 12) br.bits(8);
    else if (rate_code == 13 || rate_code == 14) br.bits(16);
    else if (rate_code == 15) throw LoadError("invalid FLAC sample rate code");
    br.bits(8);  // header CRC-8

    int bps = static_cast<int>(info.bps);
    switch (size_code) {
      case 0: break;
      case 1: bps = 8; break;
      case 2: bps = 12; break;
      case 4: bps = 16; break;
      case 5: bps = 20; break;
      case 6: bps = 24; break;
      case 7: bps = 32; break;
      default: throw LoadError("reserved FLAC sample size code");
    }
    uint32_t channels = chan_code < 8 ? chan_code + 1 : 2;
    if (chan_code > 10) throw LoadError("reserved FLAC channel assignment");

    std::vector<std::vector<int64_t>> ch(channels);
    for (uint32_t c = 0; c < channels; ++c) {
      int sub_bps = bps;
      if ((chan_code == 8 && c == 1) || (chan_code == 9 && c == 0) ||
          (chan_code == 10 && c == 1))
        ++sub_bps;  // side channel carries one extra bit
      ch[c] = decode_subframe(br, block_size, sub_bps);
    }
    if (chan_code == 8) {
      for (uint32_t i = 0; i < block_size; ++i) ch[1][i] = ch[0][i] - ch[1][i];
    } else if (chan_code == 9) {
      for (uint32_t i = 0; i < block_size; ++i) ch[0][i] = ch[0][i] + ch[1][i];
    } else if (chan_code == 10) {
      for (uint32_t i = 0; i < block_size; ++i) {
        int64_t mid = ch[0][i] * 2 | (ch[1][i] & 1);
        const int64_t side = ch[1][i];
        ch[0][i] = (mid + side) >> 1;
        ch[1][i] = (mid - side) >> 1;
      }
    }
    const double sample_scale = bps == static_cast<int>(info.bps)
                                    ? scale
                                    : 1.0 / static_cast<double>(int64_t{1} << (bps - 1));
    for (uint32_t i = 0; i < block_size; ++i) {
      double acc = 0.0;
      for (uint32_t c = 0; c < channels; ++c) acc += ch[c][i] * sample_scale;
      out.samples.push_back(acc / channels);
    }
    br.align();
    br.bits(16);  // frame CRC-16
    if (br.byte_pos() <= frame_start) throw LoadError("FLAC decoder stalled");
  }
  if (info.total && out.samples.size() < info.total)
    throw LoadError("FLAC stream truncated: " + std::to_string(out.samples.size()) + " of " +
                    std::to_string(info.total) + " samples");
  if (info.total && out.samples.size() > info.total)
    out.samples.resize(info.total);
  return out;
}

}  // namespace sld
