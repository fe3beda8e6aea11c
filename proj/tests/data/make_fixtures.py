# Copyright 2026 The sld Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#       http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Writes the FLAC/WAV fixture pairs used by audio_io_test.

Each pair holds identical integer PCM, so the FLAC decoder must reproduce
the WAV decoder's output exactly. Run from this directory:

    python3 make_fixtures.py
"""

import numpy as np
import soundfile as sf

rng = np.random.default_rng(7)


def signal(n, channels, rate):
    t = np.arange(n) / rate
    x = 0.6 * np.sin(2 * np.pi * 440 * t) + 0.2 * np.sin(2 * np.pi * 3100 * t)
    x = x + 0.05 * rng.standard_normal(n)
    if channels == 1:
        return x[:, None]
    return np.stack([x, np.roll(x, 17) * 0.5], axis=1)


FIXTURES = [
    # name, rate, channels, subtype, frames, flac block size hint
    ("mono16_16k", 16000, 1, "PCM_16", 4000),
    ("stereo24_44k", 44100, 2, "PCM_24", 11025),
    ("mono8_8k", 8000, 1, "PCM_S8", 1999),
    ("silence16_16k", 16000, 1, "PCM_16", 3000),
]

for name, rate, ch, subtype, n in FIXTURES:
    x = signal(n, ch, rate)
    if name.startswith("silence"):
        x[:] = 0.0
    x = np.clip(x, -0.99, 0.99)
    # Quantize once to the target depth and hand libsndfile int32 samples
    # with the unused low bits zero, so no container rescales differently.
    bits = {"PCM_16": 16, "PCM_24": 24, "PCM_S8": 8}[subtype]
    q = np.round(x * 2 ** (bits - 1)).astype(np.int32) << (32 - bits)
    sf.write(f"{name}.flac", q, rate, subtype=subtype, format="FLAC")
    wav_subtype = "PCM_U8" if subtype == "PCM_S8" else subtype
    sf.write(f"{name}.wav", q, rate, subtype=wav_subtype, format="WAV")
