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


// Stand-in for an external model speaking the encoder adapter protocol.
// Layer l, feature f, frame t holds l + 0.01 f + mean of frame t.
//
//   fake_encoder [--layers N] [--dim F] [--hop H] [--embedding] [--garbage]

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

namespace {

bool read_exact(void *dst, size_t n) { return std::fread(dst, 1, n, stdin) == n; }

void put_u32(std::string &b, uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t le32(const unsigned char *p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

int main(int argc, char **argv) {
  uint32_t layers = 12, dim = 4, hop = 320;
  bool embedding = false, garbage = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--layers" && i + 1 < argc) layers = std::stoul(argv[++i]);
    else if (a == "--dim" && i + 1 < argc) dim = std::stoul(argv[++i]);
    else if (a == "--hop" && i + 1 < argc) hop = std::stoul(argv[++i]);
    else if (a == "--embedding") embedding = true;
    else if (a == "--garbage") garbage = true;
    else return 3;
  }
  unsigned char head[16];
  if (!read_exact(head, 16) || std::memcmp(head, "SLDWAV1\n", 8) != 0) return 4;
  const uint32_t n = le32(head + 8);
  std::vector<float> x(n);
  if (n > 0 && !read_exact(x.data(), 4 * static_cast<size_t>(n))) return 4;
  if (garbage) {
    std::fputs("not a reply\n", stdout);
    return 0;
  }
  const uint32_t T = n / hop;
  const uint32_t L = layers + (embedding ? 1 : 0);
  std::string out = "SLDREP1\n";
  put_u32(out, L);
  put_u32(out, dim);
  put_u32(out, T);
  put_u32(out, embedding ? 1 : 0);
  std::vector<double> frame_mean(T, 0.0);
  for (uint32_t t = 0; t < T; ++t) {
    for (uint32_t k = 0; k < hop; ++k) frame_mean[t] += x[t * hop + k];
    frame_mean[t] /= hop;
  }
  for (uint32_t l = 0; l < L; ++l)
    for (uint32_t f = 0; f < dim; ++f)
      for (uint32_t t = 0; t < T; ++t) {
        const float v = static_cast<float>(l + 0.01 * f + frame_mean[t]);
        char b[4];
        std::memcpy(b, &v, 4);
        out.append(b, 4);
      }
  std::fwrite(out.data(), 1, out.size(), stdout);
  return 0;
}
