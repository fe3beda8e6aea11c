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

#include "sld/cli.h"

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sld/config.h"
#include "sld/scoring.h"
#include "sld/toy.h"
#include "sld/training.h"

namespace sld {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct CommonOptions {
  std::string config;
  std::optional<uint64_t> seed;
  std::optional<int> workers;
  std::string output_dir;
  std::string rawboost_preset;
  std::string polarity;
  std::optional<double> dcf_cmiss, dcf_cfa, dcf_ptar;
};

void add_common(CLI::App *app, CommonOptions &o) {
  app->add_option("--config", o.config, "YAML run config");
  app->add_option("--seed", o.seed, "global seed (overrides the config)");
  app->add_option("--workers", o.workers, "worker threads (results do not depend on it)");
  app->add_option("--output-dir", o.output_dir,
                  "output directory (default: config, then $SLD_OUTPUT_ROOT, then sld_runs)");
  app->add_option("--rawboost-preset", o.rawboost_preset, "RawBoost preset file");
  app->add_option("--polarity", o.polarity, "higher_is_bonafide or higher_is_spoof");
  app->add_option("--dcf-cmiss", o.dcf_cmiss, "minDCF miss cost");
  app->add_option("--dcf-cfa", o.dcf_cfa, "minDCF false-alarm cost");
  app->add_option("--dcf-ptar", o.dcf_ptar, "minDCF bonafide (target) prior");
}

RunConfig load_config(const CommonOptions &o) {
  RunConfig cfg = o.config.empty() ? parse_run_config("{}") : load_run_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.workers) cfg.workers = *o.workers;
  if (!o.output_dir.empty()) cfg.output_dir = o.output_dir;
  if (cfg.output_dir.empty()) cfg.output_dir = default_output_root();
  if (!o.rawboost_preset.empty()) {
    cfg.rawboost_preset = o.rawboost_preset;
    cfg.rawboost = load_rawboost_preset(o.rawboost_preset);
  }
  if (!o.polarity.empty()) cfg.polarity = parse_polarity(o.polarity);
  if (o.dcf_cmiss) cfg.dcf.cost_miss = *o.dcf_cmiss;
  if (o.dcf_cfa) cfg.dcf.cost_fa = *o.dcf_cfa;
  if (o.dcf_ptar) cfg.dcf.prior_target = *o.dcf_ptar;
  cfg.validate();
  resolve_run_config(cfg);
  return cfg;
}

fs::path out_path(const RunConfig &cfg, const char *sub) {
  const fs::path p = fs::path(cfg.output_dir) / sub;
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path &path, const std::string &text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw Error("write to '" + path.string() + "' failed");
}

void write_resolved(const RunConfig &cfg, const std::string &command) {
  write_text(out_path(cfg, "logs") / (command + ".config.yaml"), dump_run_config(cfg));
}

std::vector<SampleRecord> read_records(const RunConfig &cfg, const std::string &path,
                                       const char *what, bool need_durations) {
  if (path.empty()) throw ValidationError(std::string("no ") + what + " manifest configured");
  auto records = read_manifest_file(path, cfg.data.format);
  const std::string root = cfg.data.audio_root.empty()
      ? fs::path(path).parent_path().string()
      : cfg.data.audio_root;
  for (auto &r : records) r.audio_path = resolve_audio_path(root.empty() ? "." : root, r.audio_path);
  if (need_durations) resolve_durations(records, ".");
  return records;
}

EncoderHandle open_encoder(const RunConfig &cfg) {
  ExternalEncoderOptions eo;
  eo.include_embedding_layer = cfg.include_embedding_layer;
  eo.view_spec = cfg.model.views;
  EncoderHandle enc = make_encoder(cfg.encoder, eo);
  cfg.model.views.validate(enc->layer_count());
  return enc;
}

ModelConfig model_for(const RunConfig &cfg, const Encoder &enc) {
  ModelConfig m = cfg.model;
  m.feature_dim = enc.feature_dim();
  return m;
}

ConfigKeys model_subset(const ConfigKeys &keys) {
  ConfigKeys out;
  for (const auto &[k, v] : keys)
    if (k.rfind("encoder.", 0) == 0 || k.rfind("views.", 0) == 0 ||
        k.rfind("model.", 0) == 0 || k.rfind("silence.", 0) == 0)
      out[k] = v;
  return out;
}

void require_compatible(const RunConfig &cfg, const Checkpoint &ck, const std::string &path) {
  const ConfigKeys want = model_config_keys(cfg);
  const ConfigKeys have = model_subset(ck.config_keys);
  if (config_fingerprint(want) == config_fingerprint(have)) return;
  std::string msg = "checkpoint '" + path + "' does not match the config; divergent keys:";
  for (const auto &k : divergent_keys(have, want)) {
    auto a = have.find(k);
    auto b = want.find(k);
    msg += "\n  " + k + ": checkpoint=" + (a == have.end() ? "<absent>" : a->second) +
           " config=" + (b == want.end() ? "<absent>" : b->second);
  }
  throw ValidationError(msg);
}

std::string epoch_summary(const StageResult &r) {
  std::ostringstream s;
  s << "best epoch " << r.best.epoch << ", metric " << format_double(r.best.metric)
    << (r.complete ? "" : " (interrupted; resume with --resume)");
  return s.str();
}

// --- commands ---------------------------------------------------------------

struct StageArgs {
  std::string resume;
  bool resume_last = false;
  int stop_after = -1;
  std::string stage1;
};

TrainOptions train_options(const RunConfig &cfg, int stage, const StageArgs &a) {
  TrainOptions opt;
  const std::string tag = stage == 1 ? "stage1" : "stage2";
  opt.checkpoint_dir = out_path(cfg, "checkpoints").string();
  opt.log_path = (out_path(cfg, "logs") / (tag + ".jsonl")).string();
  if (!a.resume.empty()) opt.resume_from = a.resume;
  else if (a.resume_last) opt.resume_from = (fs::path(opt.checkpoint_dir) / (tag + "_last.ckpt")).string();
  opt.max_epochs_this_run = a.stop_after;
  opt.workers = cfg.workers;
  opt.config_keys = stage_config_keys(cfg, stage);
  opt.config_fingerprint = config_fingerprint(opt.config_keys);
  return opt;
}

int cmd_pretrain(const CommonOptions &co, const StageArgs &a, std::ostream &out) {
  const RunConfig cfg = load_config(co);
  auto train = read_records(cfg, cfg.data.pretrain, "data.pretrain", true);
  std::vector<SampleRecord> valid;
  if (!cfg.data.pretrain_valid.empty())
    valid = read_records(cfg, cfg.data.pretrain_valid, "data.pretrain_valid", true);
  for (const auto *set : {&train, &valid})
    for (const auto &r : *set)
      if (r.label != Label::kBonafide)
        throw ValidationError("pretrain manifests must be bonafide-only; record '" + r.utt_id +
                              "' is " + std::string(label_name(r.label)));
  write_resolved(cfg, "pretrain");
  const EncoderHandle enc = open_encoder(cfg);
  const AudioProvider audio = file_audio_provider(".");
  const StageResult r = pretrain_stage1({train, audio}, {valid, audio}, enc,
                                        model_for(cfg, *enc), cfg.stage1, train_options(cfg, 1, a));
  out << "stage1: " << epoch_summary(r) << "\n"
      << "checkpoint: " << (fs::path(cfg.output_dir) / "checkpoints" / "stage1_best.ckpt").string()
      << "\n";
  return kExitOk;
}

int cmd_train(const CommonOptions &co, const StageArgs &a, std::ostream &out) {
  const RunConfig cfg = load_config(co);
  auto train = read_records(cfg, cfg.data.train, "data.train", true);
  std::vector<SampleRecord> valid;
  if (!cfg.data.valid.empty()) valid = read_records(cfg, cfg.data.valid, "data.valid", true);
  std::optional<Checkpoint> stage1;
  if (cfg.model.use_dependency) {
    const std::string path = a.stage1.empty()
        ? (fs::path(cfg.output_dir) / "checkpoints" / "stage1_best.ckpt").string()
        : a.stage1;
    stage1 = load_checkpoint(path);
    require_compatible(cfg, *stage1, path);
  }
  write_resolved(cfg, "train");
  const EncoderHandle enc = open_encoder(cfg);
  const AudioProvider audio = file_audio_provider(".");
  const StageResult r =
      train_stage2({train, audio}, {valid, audio}, enc, stage1 ? &*stage1 : nullptr,
                   model_for(cfg, *enc), cfg.stage2, train_options(cfg, 2, a));
  out << "stage2: " << epoch_summary(r) << "\n"
      << "checkpoint: " << (fs::path(cfg.output_dir) / "checkpoints" / "stage2_best.ckpt").string()
      << "\n";
  return kExitOk;
}

struct ScoreArgs {
  std::string checkpoint;
  std::string manifest;
  std::string out;
};

int cmd_score(const CommonOptions &co, const ScoreArgs &a, std::ostream &out, std::ostream &err) {
  const RunConfig cfg = load_config(co);
  const std::string ck_path = a.checkpoint.empty()
      ? (fs::path(cfg.output_dir) / "checkpoints" / "stage2_best.ckpt").string()
      : a.checkpoint;
  const Checkpoint ck = load_checkpoint(ck_path);
  if (ck.stage != "stage2")
    throw ValidationError("'" + ck_path + "' is a " + ck.stage + " checkpoint; scoring needs stage2");
  require_compatible(cfg, ck, ck_path);
  const auto records = read_records(cfg, a.manifest.empty() ? cfg.data.score : a.manifest,
                                    "data.score", false);
  write_resolved(cfg, "score");
  const EncoderHandle enc = open_encoder(cfg);
  const SlimModel model = model_from_checkpoint(ck);
  const ScoreOutcome so = score_records(model, enc, {records, file_audio_provider(".")},
                                        cfg.remove_silence, cfg.silence, cfg.workers);
  ScoreFile sf;
  sf.polarity = cfg.polarity;
  sf.config_fingerprint = config_fingerprint(model_config_keys(cfg));
  const double sign = cfg.polarity == Polarity::kHigherIsBonafide ? 1.0 : -1.0;
  for (size_t i = 0; i < records.size(); ++i) {
    const auto &r = records[i];
    if (!so.scores[i]) {
      sf.errors.push_back({r.utt_id, so.errors[i]});
      continue;
    }
    sf.rows.push_back({r.utt_id, sign * *so.scores[i], r.label, r.attack_id, r.codec_id});
  }
  const fs::path path = a.out.empty() ? out_path(cfg, "scores") / "scores.tsv" : fs::path(a.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_score_file(path.string(), sf);
  out << "scored " << sf.rows.size() << " of " << records.size() << " records -> "
      << path.string() << "\n";
  for (const auto &e : sf.errors) err << "error: " << e.utt_id << ": " << e.message << "\n";
  return sf.errors.empty() ? kExitOk : kExitRuntime;
}

struct EvalArgs {
  std::string scores;
  std::string manifest;
  std::string calibration;
};

std::string stamp(const ScoreFile &sf, const DcfParams &p) {
  return "# sld fingerprint=" + (sf.config_fingerprint.empty() ? "-" : sf.config_fingerprint) +
         " polarity=" + std::string(polarity_name(sf.polarity)) +
         " dcf.cost_miss=" + format_double(p.cost_miss) +
         " dcf.cost_fa=" + format_double(p.cost_fa) +
         " dcf.prior_target=" + format_double(p.prior_target) + "\n";
}

void labeled_vectors(const ScoreFile &sf, std::vector<double> &scores, std::vector<int> &labels) {
  for (const auto &r : sf.rows) {
    if (r.label == Label::kUnknown)
      throw ValidationError("record '" + r.utt_id + "' has no label in the manifest");
    scores.push_back(r.score);
    labels.push_back(r.label == Label::kBonafide ? 1 : 0);
  }
}

int cmd_eval(const CommonOptions &co, const EvalArgs &a, std::ostream &out, std::ostream &err) {
  const RunConfig cfg = load_config(co);
  const std::string score_path = a.scores.empty()
      ? (fs::path(cfg.output_dir) / "scores" / "scores.tsv").string()
      : a.scores;
  ScoreFile sf = read_score_file(score_path);
  if (!co.polarity.empty()) sf.polarity = cfg.polarity;
  const auto records = read_records(cfg, a.manifest.empty() ? cfg.data.score : a.manifest,
                                    "evaluation", false);
  const auto missing = attach_metadata(sf, records);
  if (!missing.empty()) {
    err << missing.size() << " scored utt_id(s) not in the manifest:\n";
    for (const auto &id : missing) err << "  " << id << "\n";
    return kExitValidation;
  }
  std::vector<double> scores;
  std::vector<int> labels;
  labeled_vectors(sf, scores, labels);

  const EerResult eer = compute_eer(scores, labels, sf.polarity);
  const DcfResult dcf = compute_min_dcf(scores, labels, cfg.dcf, sf.polarity);
  CalibrationMap cal;
  std::string cal_source = "self";
  if (!a.calibration.empty()) {
    ScoreFile dev = read_score_file(a.calibration);
    if (!co.polarity.empty()) dev.polarity = cfg.polarity;
    const auto dev_missing = attach_metadata(dev, records);
    if (!dev_missing.empty()) {
      err << dev_missing.size() << " calibration utt_id(s) not in the manifest:\n";
      for (const auto &id : dev_missing) err << "  " << id << "\n";
      return kExitValidation;
    }
    std::vector<double> ds;
    std::vector<int> dl;
    labeled_vectors(dev, ds, dl);
    cal = calibrate_llr(ds, dl, dev.polarity);
    cal_source = a.calibration;
  } else {
    cal = calibrate_llr(scores, labels, sf.polarity);
  }
  if (cal.polarity != sf.polarity)
    throw ValidationError("calibration and evaluation score files declare different polarities");
  const auto llr = apply_llr(cal, scores);
  const double c_llr = cllr(llr, labels);
  const BreakdownTable table = breakdown_report(sf, cfg.dcf);
  const auto avg = table.attack_average_min_dcf();

  size_t nb = 0;
  for (int l : labels) nb += static_cast<size_t>(l);
  json m;
  m["score_file"] = score_path;
  m["config_fingerprint"] = sf.config_fingerprint;
  m["polarity"] = polarity_name(sf.polarity);
  m["dcf"] = {{"cost_miss", cfg.dcf.cost_miss},
              {"cost_fa", cfg.dcf.cost_fa},
              {"prior_target", cfg.dcf.prior_target}};
  m["n_bonafide"] = nb;
  m["n_spoof"] = labels.size() - nb;
  m["eer"] = eer.eer;
  m["eer_threshold"] = eer.threshold;
  m["min_dcf"] = dcf.min_dcf;
  m["min_dcf_threshold"] = std::isfinite(dcf.threshold) ? json(dcf.threshold) : json("inf");
  m["attack_average_min_dcf"] = avg ? json(*avg) : json(nullptr);
  m["calibration"] = {{"source", cal_source}, {"scale", cal.scale}, {"offset", cal.offset},
                      {"cllr", c_llr}};

  const fs::path rep = out_path(cfg, "reports");
  write_text(rep / "metrics.json", m.dump(2) + "\n");
  write_text(rep / "breakdown.csv", breakdown_csv(table));
  write_text(rep / "breakdown.txt", stamp(sf, cfg.dcf) + breakdown_text(table));
  write_resolved(cfg, "eval");

  out << stamp(sf, cfg.dcf);
  out << "trials: " << nb << " bonafide, " << labels.size() - nb << " spoof\n";
  out << "EER: " << format_double(eer.eer) << " (threshold " << format_double(eer.threshold)
      << ")\n";
  out << "minDCF: " << format_double(dcf.min_dcf) << "\n";
  out << "average minDCF over attacks: " << (avg ? format_double(*avg) : "NA") << "\n";
  out << "LLR calibration (" << cal_source << "): scale " << format_double(cal.scale)
      << ", offset " << format_double(cal.offset) << ", Cllr " << format_double(c_llr) << "\n";
  out << "reports: " << rep.string() << "\n";
  return kExitOk;
}

struct ToyArgs {
  std::string out_dir;
  std::string manifest;
  int n_bonafide = 100;
  int n_spoof = 100;
  uint64_t seed = 1;
  uint64_t world_seed = 0;
  std::string prefix = "toy";
  std::vector<std::string> attacks;
  std::vector<std::string> codecs;
  double min_duration = 1.0;
  double max_duration = 2.0;
  double snr_db = 30.0;
  int content_dim = 4;
  double speaker_noise = 0.15;
};

int cmd_synth_toy(const ToyArgs &a, std::ostream &out) {
  ToyCorpusOptions o;
  o.world.seed = a.world_seed;
  o.world.content_dim = a.content_dim;
  o.world.speaker_noise = a.speaker_noise;
  o.seed = a.seed;
  o.prefix = a.prefix;
  o.n_bonafide = a.n_bonafide;
  o.n_spoof = a.n_spoof;
  if (!a.attacks.empty()) {
    o.attacks.clear();
    for (const auto &spec : a.attacks) {
      const auto colon = spec.find(':');
      ToyAttack t;
      t.id = spec.substr(0, colon);
      if (colon != std::string::npos) {
        try {
          t.correlation = std::stod(spec.substr(colon + 1));
        } catch (const std::exception &) {
          throw ValidationError("--attack expects ID[:correlation], got '" + spec + "'");
        }
      }
      if (t.id.empty()) throw ValidationError("--attack needs an id");
      o.attacks.push_back(t);
    }
  }
  o.codecs = a.codecs;
  o.min_duration_s = a.min_duration;
  o.max_duration_s = a.max_duration;
  o.snr_db = a.snr_db;
  const ToyCorpus c = synth_toy_corpus(o);
  const std::string manifest =
      a.manifest.empty() ? (fs::path(a.out_dir) / "manifest.csv").string() : a.manifest;
  write_toy_corpus(c, a.out_dir, manifest);
  out << "wrote " << c.records.size() << " records to " << a.out_dir << ", manifest "
      << manifest << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"sld: style-linguistics dependency spoofing detector"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "sld 1.0.0");

  CommonOptions co;
  StageArgs stage_args;
  ScoreArgs score_args;
  EvalArgs eval_args;
  ToyArgs toy;

  auto *pretrain = app.add_subcommand("pretrain", "Stage 1 dependency pretraining (bonafide only)");
  add_common(pretrain, co);
  pretrain->add_option("--resume", stage_args.resume, "resume from this _last checkpoint");
  pretrain->add_flag("--resume-last", stage_args.resume_last,
                     "resume from checkpoints/stage1_last.ckpt");
  pretrain->add_option("--stop-after-epochs", stage_args.stop_after)->group("");

  auto *train = app.add_subcommand("train", "Stage 2 supervised training");
  add_common(train, co);
  train->add_option("--stage1", stage_args.stage1,
                    "Stage 1 checkpoint (default: checkpoints/stage1_best.ckpt)");
  train->add_option("--resume", stage_args.resume, "resume from this _last checkpoint");
  train->add_flag("--resume-last", stage_args.resume_last,
                  "resume from checkpoints/stage2_last.ckpt");
  train->add_option("--stop-after-epochs", stage_args.stop_after)->group("");

  auto *score = app.add_subcommand("score", "score a manifest at full length");
  add_common(score, co);
  score->add_option("--checkpoint", score_args.checkpoint,
                    "Stage 2 checkpoint (default: checkpoints/stage2_best.ckpt)");
  score->add_option("--manifest", score_args.manifest, "manifest (default: data.score)");
  score->add_option("--out", score_args.out, "score file (default: scores/scores.tsv)");

  auto *eval = app.add_subcommand("eval", "metrics and breakdown of a score file");
  add_common(eval, co);
  eval->add_option("--scores", eval_args.scores, "score file (default: scores/scores.tsv)");
  eval->add_option("--manifest", eval_args.manifest, "labeled manifest (default: data.score)");
  eval->add_option("--calibration-scores", eval_args.calibration,
                   "dev score file for the LLR calibration (default: the evaluated scores)");

  auto *synth = app.add_subcommand("synth-toy", "write a synthetic toy corpus");
  synth->add_option("--out-dir", toy.out_dir, "audio directory")->required();
  synth->add_option("--manifest", toy.manifest, "manifest path (default: <out-dir>/manifest.csv)");
  synth->add_option("--n-bonafide", toy.n_bonafide);
  synth->add_option("--n-spoof", toy.n_spoof);
  synth->add_option("--seed", toy.seed, "corpus seed");
  synth->add_option("--world-seed", toy.world_seed, "seed of the shared style/content maps");
  synth->add_option("--prefix", toy.prefix, "utt_id prefix");
  synth->add_option("--attack", toy.attacks, "ID[:style-content correlation], repeatable");
  synth->add_option("--codec", toy.codecs, "codec label, repeatable (round-robin)");
  synth->add_option("--min-duration", toy.min_duration);
  synth->add_option("--max-duration", toy.max_duration);
  synth->add_option("--snr-db", toy.snr_db);
  synth->add_option("--content-dim", toy.content_dim);
  synth->add_option("--speaker-noise", toy.speaker_noise);

  auto *config = app.add_subcommand("config", "print the resolved config");
  add_common(config, co);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (pretrain->parsed()) return cmd_pretrain(co, stage_args, out);
    if (train->parsed()) return cmd_train(co, stage_args, out);
    if (score->parsed()) return cmd_score(co, score_args, out, err);
    if (eval->parsed()) return cmd_eval(co, eval_args, out, err);
    if (synth->parsed()) return cmd_synth_toy(toy, out);
    if (config->parsed()) {
      out << dump_run_config(load_config(co));
      return kExitOk;
    }
  } catch (const ValidationError &e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace sld
