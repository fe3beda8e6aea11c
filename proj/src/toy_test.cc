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

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "sld/audio_io.h"
#include "sld/encoder.h"
#include "testing.h"

namespace sld {
namespace {

ToyCorpusOptions small(uint64_t seed = 1) {
  ToyCorpusOptions o;
  o.seed = seed;
  o.n_bonafide = 6;
  o.n_spoof = 9;
  o.attacks = {{"A01", 0.0}, {"A02", 0.5}, {"A03", 1.0}};
  o.codecs = {"C1", "C2"};
  o.min_duration_s = 0.5;
  o.max_duration_s = 0.8;
  return o;
}

TEST(Toy, Deterministic) {
  const auto a = synth_toy_corpus(small()), b = synth_toy_corpus(small());
  EXPECT_EQ(a.records, b.records);
  for (const auto &[id, w] : *a.audio) EXPECT_EQ(w.samples, b.audio->at(id).samples);
  const auto c = synth_toy_corpus(small(2));
  EXPECT_NE(a.audio->begin()->second.samples, c.audio->begin()->second.samples);
}

TEST(Toy, ClassesAttacksAndCodecs) {
  const auto c = synth_toy_corpus(small());
  ASSERT_EQ(c.records.size(), 15u);
  std::map<std::string, int> per_attack;
  size_t bona = 0;
  std::set<std::string> ids;
  for (size_t i = 0; i < c.records.size(); ++i) {
    const auto &r = c.records[i];
    ids.insert(r.utt_id);
    EXPECT_EQ(r.audio_path, r.utt_id + ".wav");
    EXPECT_EQ(r.codec_id, i % 2 ? "C2" : "C1");
    if (r.label == Label::kBonafide) {
      ++bona;
      EXPECT_FALSE(r.attack_id.has_value());
    } else {
      ASSERT_TRUE(r.attack_id.has_value());
      ++per_attack[*r.attack_id];
    }
  }
  EXPECT_EQ(ids.size(), 15u);
  EXPECT_EQ(bona, 6u);
  EXPECT_EQ(per_attack, (std::map<std::string, int>{{"A01", 3}, {"A02", 3}, {"A03", 3}}));
}

TEST(Toy, DurationsAndPeak) {
  const auto c = synth_toy_corpus(small());
  for (const auto &r : c.records) {
    const Waveform &w = c.audio->at(r.utt_id);
    EXPECT_EQ(w.sample_rate, 16000);
    EXPECT_DOUBLE_EQ(*r.duration_s, w.duration_s());
    EXPECT_GE(*r.duration_s, 0.5 - 1e-4);
    EXPECT_LE(*r.duration_s, 0.8 + 1e-4);
    EXPECT_NEAR(w.peak(), 1.0, 1e-12);
  }
}

TEST(Toy, PrefixSeparatesPartitions) {
  auto o = small();
  o.prefix = "dev";
  for (const auto &r : synth_toy_corpus(o).records) EXPECT_EQ(r.utt_id.rfind("dev_", 0), 0u);
}

TEST(Toy, FullyCorrelatedSpoofMatchesBonafideStatistics) {
  // With correlation 1 a spoof is generated exactly like a bonafide item;
  // the encoder sees the same kind of signal.
  auto o = small();
  o.n_bonafide = 0;
  o.n_spoof = 2;
  o.attacks = {{"A09", 1.0}};
  const auto c = synth_toy_corpus(o);
  const auto enc = make_toy_encoder({.seed = 1, .dim = 8});
  for (const auto &r : c.records) {
    const auto rep = enc->encode(c.audio->at(r.utt_id));
    EXPECT_NO_THROW(rep.validate());
  }
}

TEST(Toy, Validation) {
  auto o = small();
  o.attacks.clear();
  EXPECT_THROW(synth_toy_corpus(o), ValidationError);
  o = small();
  o.min_duration_s = 1.0;
  o.max_duration_s = 0.5;
  EXPECT_THROW(synth_toy_corpus(o), ValidationError);
  o = small();
  o.attacks[0].correlation = 1.5;
  EXPECT_THROW(synth_toy_corpus(o), ValidationError);
  o = small();
  o.n_bonafide = -1;
  EXPECT_THROW(synth_toy_corpus(o), ValidationError);
}

TEST(Toy, WrittenCorpusReadsBack) {
  const auto c = synth_toy_corpus(small());
  testing::TempDir dir("toy");
  write_toy_corpus(c, dir.str("audio"), dir.str("m.csv"));
  const auto recs = read_manifest_file(dir.str("m.csv"), ManifestFormat::kCsv);
  EXPECT_EQ(recs, c.records);
  const auto load = file_audio_provider(dir.str("audio"));
  for (const auto &r : recs) {
    const Waveform w = load(r);
    const Waveform &want = c.audio->at(r.utt_id);
    ASSERT_EQ(w.size(), want.size());
    for (size_t i = 0; i < w.size(); ++i) ASSERT_NEAR(w.samples[i], want.samples[i], 1e-7);
  }
}

}  // namespace
}  // namespace sld
