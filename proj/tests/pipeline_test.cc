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


// End-to-end runs of the library on small synthetic corpora.

#include <gtest/gtest.h>

#include <json.hpp>

#include "sld/corpus.h"
#include "sld/scoring.h"
#include "sld/toy.h"
#include "sld/training.h"
#include "testing.h"

namespace sld {
namespace {

ToyCorpusOptions options(uint64_t seed, int n_bona, int n_spoof, const std::string &prefix) {
  ToyCorpusOptions o;
  o.world.seed = 7;
  o.seed = seed;
  o.prefix = prefix;
  o.n_bonafide = n_bona;
  o.n_spoof = n_spoof;
  o.codecs = {"C1", "C2"};
  return o;
}

TrainData in_memory(const ToyCorpus &c) { return {c.records, memory_audio_provider(c.audio)}; }

ModelConfig small_model() {
  ModelConfig mc;
  mc.feature_dim = 32;
  mc.bottleneck_dim = 16;
  mc.dep_dim = 4;
  mc.attention_dim = 16;
  mc.hidden_dim = 32;
  return mc;
}

double eer_of(const SlimModel &model, const EncoderHandle &enc, const TrainData &data) {
  const auto out = score_records(model, enc, data, false, {}, 1);
  std::vector<double> s;
  std::vector<int> y;
  for (size_t i = 0; i < data.records.size(); ++i) {
    s.push_back(*out.scores[i]);
    y.push_back(data.records[i].label == Label::kBonafide);
  }
  return compute_eer(s, y).eer;
}

std::vector<double> epoch_metrics(const StageResult &r) {
  std::vector<double> v;
  for (const auto &line : r.log_lines) {
    const auto j = nlohmann::json::parse(line);
    if (j.contains("val_metric")) v.push_back(j["val_metric"].get<double>());
  }
  return v;
}

class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    enc_ = make_toy_encoder({.seed = 3, .dim = 32});
    StageConfig s1 = stage1_defaults();
    s1.lr_start = 0.1;
    s1.epochs = 10;
    s1.seed = 1;
    const auto pre = synth_toy_corpus(options(21, 800, 0, "p"));
    stage1_ = new Checkpoint(pretrain_stage1(in_memory(pre), {}, enc_, small_model(), s1, {}).best);
  }
  static void TearDownTestSuite() { delete stage1_; }

  static StageConfig stage2(int epochs) {
    StageConfig s2 = stage2_defaults();
    s2.lr_start = 0.01;
    s2.augment = false;
    s2.epochs = epochs;
    s2.early_stop_patience = epochs;
    s2.seed = 2;
    return s2;
  }

  static inline EncoderHandle enc_;
  static inline Checkpoint *stage1_ = nullptr;
};

TEST_F(Pipeline, ValidationEerDropsWithinThreeEpochs) {
  const auto train = synth_toy_corpus(options(22, 200, 200, "t"));
  const auto valid = synth_toy_corpus(options(23, 40, 40, "v"));
  const auto r = train_stage2(in_memory(train), in_memory(valid), enc_, stage1_, small_model(), stage2(3), {});
  const auto v = epoch_metrics(r);
  ASSERT_EQ(v.size(), 3u);
  EXPECT_LT(std::min(v[1], v[2]), v[0]) << "EER by epoch: " << v[0] << " " << v[1] << " " << v[2];
  EXPECT_DOUBLE_EQ(r.best.metric, *std::min_element(v.begin(), v.end()));
}

TEST_F(Pipeline, OnDiskCorpusMatchesInMemory) {
  testing::TempDir dir("pipeline");
  const auto train = synth_toy_corpus(options(24, 30, 30, "t"));
  const auto test = synth_toy_corpus(options(25, 20, 20, "e"));
  write_toy_corpus(train, dir.str() + "/train", dir.str() + "/train.csv");
  write_toy_corpus(test, dir.str() + "/test", dir.str() + "/test.csv");
  const TrainData train_disk{read_manifest_file(dir.str() + "/train.csv", ManifestFormat::kCsv),
                             file_audio_provider(dir.str() + "/train")};
  const TrainData test_disk{read_manifest_file(dir.str() + "/test.csv", ManifestFormat::kCsv),
                            file_audio_provider(dir.str() + "/test")};
  ASSERT_EQ(train_disk.records, train.records);

  TrainOptions opts;
  opts.checkpoint_dir = dir.str() + "/ckpt";
  const auto mem = train_stage2(in_memory(train), {}, enc_, stage1_, small_model(), stage2(2), {});
  const auto disk = train_stage2(train_disk, {}, enc_, stage1_, small_model(), stage2(2), opts);
  const auto loaded = load_checkpoint(opts.checkpoint_dir + "/stage2_best.ckpt");
  // 32-bit float WAV storage perturbs the audio slightly.
  const auto a = score_records(model_from_checkpoint(mem.best), enc_, in_memory(test), false, {}, 1);
  const auto b = score_records(model_from_checkpoint(loaded), enc_, test_disk, false, {}, 2);
  ASSERT_EQ(a.scores.size(), b.scores.size());
  for (size_t i = 0; i < a.scores.size(); ++i) EXPECT_NEAR(*a.scores[i], *b.scores[i], 1e-4);

  ScoreFile f;
  for (size_t i = 0; i < b.scores.size(); ++i) f.rows.push_back({test_disk.records[i].utt_id, *b.scores[i]});
  write_score_file(dir.str() + "/scores.tsv", f);
  ScoreFile back = read_score_file(dir.str() + "/scores.tsv");
  EXPECT_TRUE(attach_metadata(back, test_disk.records).empty());
  const auto table = breakdown_report(back, DcfParams{});
  EXPECT_EQ(table.codecs, (std::vector<std::string>{"C1", "C2"}));
  EXPECT_EQ(table.attacks, (std::vector<std::string>{"A01", "A02"}));
  std::vector<double> s;
  std::vector<int> y;
  for (const auto &row : back.rows) s.push_back(row.score), y.push_back(row.label == Label::kBonafide);
  EXPECT_DOUBLE_EQ(*table.find(kPooled, kPooled)->min_dcf, compute_min_dcf(s, y, DcfParams{}).min_dcf);
}

}  // namespace
}  // namespace sld
