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


#include "sld/scoring.h"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "oracles.h"
#include "testing.h"

namespace sld {
namespace {

struct Trials {
  std::vector<double> scores;
  std::vector<int> labels;
};

Trials random_trials(size_t n, uint64_t seed, double shift = 0.0, bool ties = false) {
  Rng rng(seed);
  Trials t;
  for (size_t i = 0; i < n; ++i) {
    const int y = rng.bernoulli(0.5) ? 1 : 0;
    double s = rng.normal() + (y ? shift : 0.0);
    if (ties) s = std::round(s * 4) / 4;
    t.scores.push_back(s);
    t.labels.push_back(y);
  }
  return t;
}

TEST(Eer, SeparableIsZero) {
  const std::vector<double> s{0.1, 0.2, 0.3, 0.8, 0.9};
  const std::vector<int> y{0, 0, 0, 1, 1};
  const auto r = compute_eer(s, y);
  EXPECT_EQ(r.eer, 0.0);
  EXPECT_GT(r.threshold, 0.3);
  EXPECT_LE(r.threshold, 0.8);
  EXPECT_EQ(compute_min_dcf(s, y, DcfParams{}).min_dcf, 0.0);
}

TEST(Eer, ChanceLevel) {
  const Trials t = random_trials(10000, 1);
  EXPECT_NEAR(compute_eer(t.scores, t.labels).eer, 0.5, 0.02);
}

TEST(Eer, MatchesExhaustiveSweep) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const Trials t = random_trials(200, 100 + seed, 1.0, seed % 2 == 1);
    for (auto pol : {Polarity::kHigherIsBonafide, Polarity::kHigherIsSpoof}) {
      const double want = oracle::eer(t.scores, t.labels, pol);
      EXPECT_NEAR(compute_eer(t.scores, t.labels, pol).eer, want, 1e-9) << seed;
    }
  }
}

TEST(Eer, ThresholdRealizesCrossing) {
  const Trials t = random_trials(300, 5, 1.5);
  const auto r = compute_eer(t.scores, t.labels);
  size_t miss = 0, fa = 0, nb = 0, ns = 0;
  for (size_t i = 0; i < t.scores.size(); ++i) {
    const bool accept = t.scores[i] >= r.threshold;
    if (t.labels[i]) ++nb, miss += !accept;
    else ++ns, fa += accept;
  }
  const double pm = static_cast<double>(miss) / nb, pf = static_cast<double>(fa) / ns;
  EXPECT_GE(pm, pf);
  EXPECT_LE(std::min(std::abs(pm - r.eer), std::abs(pf - r.eer)), 2.0 / std::min(nb, ns));
}

TEST(Eer, Errors) {
  const std::vector<double> s{1, 2};
  EXPECT_THROW(compute_eer(s, std::vector<int>{1, 1}), ValidationError);
  EXPECT_THROW(compute_eer(s, std::vector<int>{1}), ValidationError);
  EXPECT_THROW(compute_eer(std::vector<double>{1, NAN}, std::vector<int>{1, 0}), ValidationError);
  EXPECT_THROW(compute_min_dcf(s, std::vector<int>{0, 0}, DcfParams{}), ValidationError);
  EXPECT_THROW(compute_eer(std::vector<double>{}, std::vector<int>{}), ValidationError);
}

TEST(MinDcf, IdenticalScoresGiveOne) {
  const std::vector<double> s(50, 0.3);
  std::vector<int> y(50, 0);
  for (size_t i = 0; i < 20; ++i) y[i] = 1;
  EXPECT_DOUBLE_EQ(compute_min_dcf(s, y, DcfParams{}).min_dcf, 1.0);
  EXPECT_DOUBLE_EQ(compute_min_dcf(s, y, DcfParams{1, 1, 0.5}).min_dcf, 1.0);
}

TEST(MinDcf, MatchesExhaustiveSweep) {
  const DcfParams params[] = {{}, {1, 1, 0.5}, {2, 3, 0.2}};
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const Trials t = random_trials(500, 200 + seed, 1.0, seed % 3 == 0);
    for (const auto &p : params)
      for (auto pol : {Polarity::kHigherIsBonafide, Polarity::kHigherIsSpoof}) {
        const auto r = compute_min_dcf(t.scores, t.labels, p, pol);
        EXPECT_NEAR(r.min_dcf, oracle::min_dcf(t.scores, t.labels, p, pol), 1e-12);
        EXPECT_LE(r.min_dcf, 1.0);
        EXPECT_GE(r.min_dcf, 0.0);
      }
  }
}

TEST(MinDcf, DefaultsAndValidation) {
  const DcfParams d;
  EXPECT_EQ(d.cost_miss, 1.0);
  EXPECT_EQ(d.cost_fa, 10.0);
  EXPECT_EQ(d.prior_target, 0.95);
  EXPECT_THROW((DcfParams{0, 1, 0.5}.validate()), ValidationError);
  EXPECT_THROW((DcfParams{1, -1, 0.5}.validate()), ValidationError);
  EXPECT_THROW((DcfParams{1, 1, 1.0}.validate()), ValidationError);
}

TEST(Metrics, InvariantUnderMonotoneTransform) {
  const Trials t = random_trials(400, 7, 1.0);
  std::vector<double> warped;
  for (double s : t.scores) warped.push_back(std::exp(2 * s) + 3);
  EXPECT_NEAR(compute_eer(t.scores, t.labels).eer, compute_eer(warped, t.labels).eer, 1e-12);
  EXPECT_NEAR(compute_min_dcf(t.scores, t.labels, {}).min_dcf,
              compute_min_dcf(warped, t.labels, {}).min_dcf, 1e-12);
}

TEST(Metrics, PolarityFlipWithNegation) {
  const Trials t = random_trials(400, 8, 1.0, true);
  std::vector<double> neg;
  for (double s : t.scores) neg.push_back(-s);
  EXPECT_EQ(compute_eer(t.scores, t.labels).eer,
            compute_eer(neg, t.labels, Polarity::kHigherIsSpoof).eer);
  EXPECT_EQ(compute_min_dcf(t.scores, t.labels, {}).min_dcf,
            compute_min_dcf(neg, t.labels, {}, Polarity::kHigherIsSpoof).min_dcf);
  EXPECT_EQ(parse_polarity(polarity_name(Polarity::kHigherIsSpoof)), Polarity::kHigherIsSpoof);
  EXPECT_THROW(parse_polarity("sideways"), ValidationError);
}

TEST(Calibration, RecoversCalibratedGaussians) {
  // Class-conditional N(+1, 2) and N(-1, 2): the score is already the LLR.
  Rng rng(9);
  std::vector<double> s;
  std::vector<int> y;
  for (int i = 0; i < 10000; ++i) {
    const int label = i % 2;
    s.push_back((label ? 1.0 : -1.0) + std::sqrt(2.0) * rng.normal());
    y.push_back(label);
  }
  const auto map = calibrate_llr(s, y);
  EXPECT_NEAR(map.scale, 1.0, 0.05);
  EXPECT_NEAR(map.offset, 0.0, 0.05);
  const auto llr = apply_llr(map, s);
  EXPECT_EQ(compute_eer(s, y).eer, compute_eer(llr, y).eer);
  EXPECT_LT(cllr(llr, y), 1.0);
}

TEST(Calibration, IdentityMapAndPolarity) {
  const std::vector<double> s{-1.5, 0.0, 2.25};
  EXPECT_EQ(apply_llr(CalibrationMap{}, s), s);
  const Trials t = random_trials(2000, 10, 1.0);
  std::vector<double> neg;
  for (double v : t.scores) neg.push_back(-v);
  const auto a = calibrate_llr(t.scores, t.labels);
  const auto b = calibrate_llr(neg, t.labels, Polarity::kHigherIsSpoof);
  EXPECT_GT(a.scale, 0.0);
  EXPECT_NEAR(a.scale, b.scale, 1e-9);
  EXPECT_NEAR(a.offset, b.offset, 1e-9);
  const auto la = apply_llr(a, t.scores), lb = apply_llr(b, neg);
  for (size_t i = 0; i < la.size(); ++i) ASSERT_NEAR(la[i], lb[i], 1e-9);
  EXPECT_THROW(calibrate_llr(s, std::vector<int>{1, 1, 1}), ValidationError);
}

TEST(Cllr, ReferenceValues) {
  const std::vector<double> zero(4, 0.0);
  EXPECT_NEAR(cllr(zero, std::vector<int>{1, 0, 1, 0}), 1.0, 1e-12);
  EXPECT_LT(cllr(std::vector<double>{30, -30}, std::vector<int>{1, 0}), 1e-10);
}

// --- score files ---------------------------------------------------------------

TEST(ScoreFile, RoundTrip) {
  ScoreFile f;
  f.polarity = Polarity::kHigherIsSpoof;
  f.config_fingerprint = "00ff00ff00ff00ff";
  f.rows.push_back({"a", 0.1, Label::kBonafide, std::nullopt, "C1"});
  f.rows.push_back({"b", -1e-300, Label::kSpoof, "A07", std::nullopt});
  f.rows.push_back({"c", 1.0 / 3.0, Label::kUnknown, std::nullopt, std::nullopt});
  f.errors.push_back({"d", "cannot open audio file 'd.wav'"});
  const std::string text = serialize_scores(f);
  EXPECT_EQ(parse_scores(text), f);
  EXPECT_EQ(serialize_scores(parse_scores(text)), text);
  testing::TempDir dir("scores");
  write_score_file(dir.str("s.tsv"), f);
  EXPECT_EQ(read_score_file(dir.str("s.tsv")), f);
}

TEST(ScoreFile, ParseErrors) {
  EXPECT_THROW(parse_scores("# polarity=higher_is_bonafide\na\tx\n"), ParseError);
  EXPECT_THROW(parse_scores("# polarity=higher_is_bonafide\na\t1\na\t2\n"), ValidationError);
  EXPECT_THROW(parse_scores("# polarity=higher_is_bonafide\na\tinf\n"), ValidationError);
  try {
    parse_scores("# polarity=higher_is_bonafide\na\t1\nb\n");
    FAIL();
  } catch (const ParseError &e) {
    EXPECT_EQ(e.line(), 3u);
  }
  const ScoreFile minimal = parse_scores("a\t1.5\n");
  EXPECT_EQ(minimal.polarity, Polarity::kHigherIsBonafide);
  ASSERT_EQ(minimal.rows.size(), 1u);
  EXPECT_EQ(minimal.rows[0].label, Label::kUnknown);
}

TEST(ScoreFile, AttachMetadata) {
  ScoreFile f = parse_scores("a\t1\nb\t2\nz\t3\n");
  std::vector<SampleRecord> recs{{.utt_id = "a", .label = Label::kBonafide, .codec_id = "C1"},
                                 {.utt_id = "b", .label = Label::kSpoof, .attack_id = "A1"}};
  EXPECT_EQ(attach_metadata(f, recs), std::vector<std::string>{"z"});
  EXPECT_EQ(f.rows[0].label, Label::kBonafide);
  EXPECT_EQ(f.rows[0].codec_id, "C1");
  EXPECT_EQ(f.rows[1].attack_id, "A1");
  EXPECT_EQ(f.rows[2].label, Label::kUnknown);
}

// --- breakdown -------------------------------------------------------------------

ScoreFile planted(uint64_t seed) {
  // Attack A02's spoofs sit closer to bonafide than A01's.
  Rng rng(seed);
  ScoreFile f;
  int id = 0;
  for (const char *codec : {"C1", "C2"}) {
    for (int i = 0; i < 150; ++i)
      f.rows.push_back({"u" + std::to_string(id++), 2.0 + rng.normal(), Label::kBonafide,
                        std::nullopt, codec});
    for (int i = 0; i < 100; ++i)
      f.rows.push_back({"u" + std::to_string(id++), -2.0 + rng.normal(), Label::kSpoof, "A01",
                        codec});
    for (int i = 0; i < 100; ++i)
      f.rows.push_back({"u" + std::to_string(id++), 1.0 + rng.normal(), Label::kSpoof, "A02",
                        codec});
  }
  return f;
}

TEST(Breakdown, PlantedShiftRanksAttacks) {
  const auto t = breakdown_report(planted(11), DcfParams{});
  EXPECT_EQ(t.attacks, (std::vector<std::string>{"A01", "A02"}));
  EXPECT_EQ(t.codecs, (std::vector<std::string>{"C1", "C2"}));
  for (const char *c : {"C1", "C2", "*"}) {
    const auto *a = t.find("A01", c), *b = t.find("A02", c);
    ASSERT_TRUE(a && b && a->min_dcf && b->min_dcf);
    EXPECT_GT(*b->min_dcf, *a->min_dcf) << c;
    EXPECT_GT(*b->eer, *a->eer) << c;
  }
  const auto *cell = t.find("A01", "C1");
  EXPECT_EQ(cell->n_bonafide, 150u);
  EXPECT_EQ(cell->n_spoof, 100u);
  const auto *all = t.find("*", "*");
  EXPECT_EQ(all->n_bonafide, 300u);
  EXPECT_EQ(all->n_spoof, 400u);
  const double avg = (*t.find("A01", "*")->min_dcf + *t.find("A02", "*")->min_dcf) / 2;
  EXPECT_DOUBLE_EQ(*t.attack_average_min_dcf(), avg);
}

TEST(Breakdown, PoolsSweepTheirOwnThreshold) {
  const ScoreFile f = planted(12);
  const auto t = breakdown_report(f, DcfParams{});
  std::vector<double> s;
  std::vector<int> y;
  for (const auto &r : f.rows) {
    s.push_back(r.score);
    y.push_back(r.label == Label::kBonafide);
  }
  EXPECT_DOUBLE_EQ(*t.find("*", "*")->min_dcf, compute_min_dcf(s, y, DcfParams{}).min_dcf);
  EXPECT_DOUBLE_EQ(*t.find("*", "*")->eer, compute_eer(s, y).eer);
}

TEST(Breakdown, MissingClassIsNa) {
  ScoreFile f = planted(13);
  // Spoofs of A03 only under codec C3, which has no bonafide trials.
  for (int i = 0; i < 5; ++i)
    f.rows.push_back({"x" + std::to_string(i), 0.0, Label::kSpoof, "A03", "C3"});
  const auto t = breakdown_report(f, DcfParams{});
  const auto *na = t.find("A03", "C3");
  ASSERT_NE(na, nullptr);
  EXPECT_FALSE(na->min_dcf.has_value());
  EXPECT_FALSE(na->eer.has_value());
  EXPECT_FALSE(t.find("*", "C3")->min_dcf.has_value());
  EXPECT_TRUE(t.find("A03", "*")->min_dcf.has_value());  // row pools use every codec
  EXPECT_NE(breakdown_text(t).find("NA"), std::string::npos);
  const auto parsed = parse_breakdown_csv(breakdown_csv(t));
  EXPECT_FALSE(parsed.find("A03", "C3")->min_dcf.has_value());
}

TEST(Breakdown, SingleCellEqualsGlobalMetrics) {
  ScoreFile f;
  Rng rng(14);
  std::vector<double> s;
  std::vector<int> y;
  for (int i = 0; i < 200; ++i) {
    const bool bona = i % 2 == 0;
    const double v = rng.normal() + (bona ? 1.0 : 0.0);
    f.rows.push_back({"u" + std::to_string(i), v, bona ? Label::kBonafide : Label::kSpoof,
                      bona ? std::nullopt : std::optional<std::string>("A01"), "C1"});
    s.push_back(v);
    y.push_back(bona);
  }
  const auto t = breakdown_report(f, DcfParams{});
  ASSERT_EQ(t.attacks.size(), 1u);
  ASSERT_EQ(t.codecs.size(), 1u);
  const double m = compute_min_dcf(s, y, DcfParams{}).min_dcf;
  const double e = compute_eer(s, y).eer;
  for (const auto &cell : t.cells) {
    EXPECT_DOUBLE_EQ(*cell.min_dcf, m);
    EXPECT_DOUBLE_EQ(*cell.eer, e);
  }
}

TEST(Breakdown, AxesFollowAvailableMetadata) {
  ScoreFile f = planted(15);
  for (auto &r : f.rows) r.codec_id.reset();
  auto t = breakdown_report(f, DcfParams{});
  EXPECT_TRUE(t.codecs.empty());
  EXPECT_NE(t.find("A01", "*"), nullptr);
  EXPECT_NE(t.find("*", "*"), nullptr);
  for (auto &r : f.rows) r.attack_id.reset();
  t = breakdown_report(f, DcfParams{});
  EXPECT_TRUE(t.attacks.empty());
  EXPECT_EQ(t.cells.size(), 1u);
  EXPECT_FALSE(t.attack_average_min_dcf().has_value());
}

TEST(Breakdown, CsvRoundTripAndStamp) {
  ScoreFile f = planted(16);
  f.config_fingerprint = "0123456789abcdef";
  f.polarity = Polarity::kHigherIsBonafide;
  const DcfParams p{1, 10, 0.95};
  const auto t = breakdown_report(f, p);
  const std::string csv = breakdown_csv(t);
  EXPECT_EQ(csv.rfind("# ", 0), 0u);
  EXPECT_NE(csv.find("0123456789abcdef"), std::string::npos);
  EXPECT_NE(csv.find("attack,codec,n_bonafide,n_spoof,min_dcf,eer"), std::string::npos);
  const auto back = parse_breakdown_csv(csv);
  EXPECT_EQ(breakdown_csv(back), csv);
  EXPECT_EQ(back.attacks, t.attacks);
  EXPECT_EQ(back.codecs, t.codecs);
  EXPECT_EQ(back.config_fingerprint, t.config_fingerprint);
  ASSERT_EQ(back.cells.size(), t.cells.size());
  for (size_t i = 0; i < t.cells.size(); ++i) {
    EXPECT_EQ(back.cells[i].attack, t.cells[i].attack);
    EXPECT_EQ(back.cells[i].n_spoof, t.cells[i].n_spoof);
    EXPECT_DOUBLE_EQ(*back.cells[i].min_dcf, *t.cells[i].min_dcf);
  }
}

TEST(Breakdown, UnlabeledRowsIgnored) {
  ScoreFile f = planted(17);
  const auto base = breakdown_report(f, DcfParams{});
  f.rows.push_back({"extra", 100.0, Label::kUnknown, "A01", "C1"});
  EXPECT_EQ(breakdown_report(f, DcfParams{}), base);
}

}  // namespace
}  // namespace sld
