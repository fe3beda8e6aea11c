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

#include "sld/training.h"

#include <atomic>
#include <cmath>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "json.hpp"
#include "sld/scoring.h"

namespace sld {

using json = nlohmann::json;

std::string_view loss_choice_name(LossChoice c) {
  return c == LossChoice::kWeightedBce ? "weighted_bce" : "focal";
}

LossChoice parse_loss_choice(std::string_view name) {
  if (name == "weighted_bce") return LossChoice::kWeightedBce;
  if (name == "focal") return LossChoice::kFocal;
  throw ValidationError("unknown loss '" + std::string(name) +
                        "' (expected weighted_bce or focal)");
}

void StageConfig::validate() const {
  std::vector<std::string> e;
  if (stage != 1 && stage != 2) e.push_back("stage must be 1 or 2");
  if (batch_size < 1) e.push_back("batch_size must be >= 1");
  if (epochs < 1) e.push_back("epochs must be >= 1");
  if (!(max_audio_s > 0)) e.push_back("max_audio_s must be > 0");
  if (!(lr_start > 0) || !(lr_end >= 0)) e.push_back("learning rates must be positive");
  if (!(lr_end <= lr_start)) e.push_back("lr_end must not exceed lr_start");
  if (early_stop_patience < 1) e.push_back("early_stop_patience must be >= 1");
  if (!(optimizer.beta1 >= 0 && optimizer.beta1 < 1 && optimizer.beta2 >= 0 &&
        optimizer.beta2 < 1))
    e.push_back("optimizer betas must lie in [0, 1)");
  if (!(optimizer.eps > 0)) e.push_back("optimizer eps must be > 0");
  if (!(optimizer.weight_decay >= 0)) e.push_back("weight_decay must be >= 0");
  if (!(lambda >= 0 && lambda <= 1)) e.push_back("lambda must lie in [0, 1]");
  if (!(bonafide_weight > 0)) e.push_back("bonafide_weight must be > 0");
  if (!(focal_gamma >= 0)) e.push_back("focal_gamma must be >= 0");
  if (!(focal_alpha > 0 && focal_alpha < 1)) e.push_back("focal_alpha must lie in (0, 1)");
  if (!(silence.frame_ms > 0 && silence.hop_ms > 0 && silence.threshold_db > 0))
    e.push_back("silence frame, hop and threshold must be positive");
  try {
    rawboost.validate();
  } catch (const ValidationError &err) {
    e.push_back(err.what());
  }
  if (!e.empty()) {
    std::string msg = "invalid stage " + std::to_string(stage) + " config:";
    for (const auto &s : e) msg += "\n  " + s;
    throw ValidationError(msg);
  }
}

StageConfig stage1_defaults() { return StageConfig{}; }

StageConfig stage2_defaults() {
  StageConfig c;
  c.stage = 2;
  c.batch_size = 4;
  c.epochs = 5;
  c.lr_start = 0.001;
  c.lr_end = 0.0001;
  return c;
}

double lr_at(int64_t step, int64_t total_steps, const StageConfig &cfg) {
  if (total_steps <= 0) throw ValidationError("lr_at: total_steps must be positive");
  if (step < 0 || step > total_steps)
    throw ValidationError("lr_at: step outside [0, total_steps]");
  // Weighted form so both endpoints come out exact.
  const double f = static_cast<double>(step) / static_cast<double>(total_steps);
  return (1.0 - f) * cfg.lr_start + f * cfg.lr_end;
}

StopDecision early_stop_update(EarlyStopping &s, double metric) {
  const int epoch = s.epochs_seen++;
  if (metric < s.best) {
    s.best = metric;
    s.best_epoch = epoch;
    s.bad_epochs = 0;
  } else {
    ++s.bad_epochs;
  }
  return s.bad_epochs >= s.patience ? StopDecision::kStop : StopDecision::kContinue;
}

// --- checkpoints -----------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'S', 'L', 'D', 'C', 'K', 'P', 'T', '\n'};
constexpr uint32_t kCheckpointVersion = 1;

json model_config_json(const ModelConfig &m) {
  return json{{"style_layers", {m.views.style.first, m.views.style.last}},
              {"linguistics_layers", {m.views.linguistics.first, m.views.linguistics.last}},
              {"feature_dim", m.feature_dim},
              {"bottleneck_dim", m.bottleneck_dim},
              {"dep_dim", m.dep_dim},
              {"attention_dim", m.attention_dim},
              {"hidden_dim", m.hidden_dim},
              {"bottleneck_dropout", m.bottleneck_dropout},
              {"projector_fc_dropout", m.projector_fc_dropout},
              {"classifier_dropout", m.classifier_dropout},
              {"use_dependency", m.use_dependency}};
}

ModelConfig model_config_from_json(const json &j) {
  ModelConfig m;
  m.views.style = {j.at("style_layers").at(0).get<int>(), j.at("style_layers").at(1).get<int>()};
  m.views.linguistics = {j.at("linguistics_layers").at(0).get<int>(),
                         j.at("linguistics_layers").at(1).get<int>()};
  m.feature_dim = j.at("feature_dim").get<int>();
  m.bottleneck_dim = j.at("bottleneck_dim").get<int>();
  m.dep_dim = j.at("dep_dim").get<int>();
  m.attention_dim = j.at("attention_dim").get<int>();
  m.hidden_dim = j.at("hidden_dim").get<int>();
  m.bottleneck_dropout = j.at("bottleneck_dropout").get<double>();
  m.projector_fc_dropout = j.at("projector_fc_dropout").get<double>();
  m.classifier_dropout = j.at("classifier_dropout").get<double>();
  m.use_dependency = j.at("use_dependency").get<bool>();
  return m;
}

json double_json(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);  // "nan", "inf", "-inf"
}

double json_double(const json &j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  throw LoadError("bad number '" + s + "' in checkpoint");
}

}  // namespace

void save_checkpoint(const std::string &path, const Checkpoint &c) {
  json h;
  h["format"] = "sld-checkpoint";
  h["version"] = kCheckpointVersion;
  h["stage"] = c.stage;
  h["epoch"] = c.epoch;
  h["metric"] = double_json(c.metric);
  h["config_fingerprint"] = c.config_fingerprint;
  h["config_keys"] = c.config_keys;
  h["rng_state"] = c.rng_state;
  h["model_config"] = model_config_json(c.model);
  h["resumable"] = c.resumable;
  std::vector<std::pair<std::string, const Eigen::MatrixXd *>> all;
  for (const auto &[k, v] : c.tensors) all.emplace_back(k, &v);
  if (c.resumable) {
    h["global_step"] = c.global_step;
    h["optimizer_steps"] = c.optimizer_steps;
    h["early_stop"] = {{"patience", c.early.patience},
                       {"best", double_json(c.early.best)},
                       {"best_epoch", c.early.best_epoch},
                       {"bad_epochs", c.early.bad_epochs},
                       {"epochs_seen", c.early.epochs_seen}};
    h["history"] = c.history;
    for (const auto &[k, v] : c.optimizer_m) all.emplace_back("adam.m/" + k, &v);
    for (const auto &[k, v] : c.optimizer_v) all.emplace_back("adam.v/" + k, &v);
    for (const auto &[k, v] : c.best_tensors) all.emplace_back("best/" + k, &v);
  }
  json manifest = json::array();
  uint64_t offset = 0;
  for (const auto &[name, m] : all) {
    manifest.push_back({{"name", name}, {"rows", m->rows()}, {"cols", m->cols()},
                        {"offset", offset}});
    offset += static_cast<uint64_t>(m->size()) * 8;
  }
  h["tensors"] = manifest;
  const std::string header = h.dump();

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint '" + path + "'");
    out.write(kMagic, 8);
    const uint32_t ver = kCheckpointVersion;
    const uint64_t hl = header.size();
    char b[8];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((ver >> (8 * i)) & 0xff);
    out.write(b, 4);
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((hl >> (8 * i)) & 0xff);
    out.write(b, 8);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const auto &[name, m] : all)
      out.write(reinterpret_cast<const char *>(m->data()),
                static_cast<std::streamsize>(m->size() * 8));
    if (!out) throw Error("write to '" + path + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto fail = [&](const std::string &why) -> LoadError {
    return LoadError("checkpoint '" + path + "': " + why);
  };
  if (bytes.size() < 20 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw fail("not an sld checkpoint");
  uint32_t ver = 0;
  uint64_t hl = 0;
  for (int i = 0; i < 4; ++i) ver |= static_cast<uint32_t>(static_cast<uint8_t>(bytes[8 + i])) << (8 * i);
  for (int i = 0; i < 8; ++i) hl |= static_cast<uint64_t>(static_cast<uint8_t>(bytes[12 + i])) << (8 * i);
  if (ver != kCheckpointVersion) throw fail("unsupported version " + std::to_string(ver));
  if (20 + hl > bytes.size()) throw fail("truncated header");
  json h;
  try {
    h = json::parse(bytes.substr(20, hl));
  } catch (const std::exception &e) {
    throw fail(std::string("bad header: ") + e.what());
  }
  const size_t data_start = 20 + hl;
  Checkpoint c;
  try {
    c.stage = h.at("stage").get<std::string>();
    c.epoch = h.at("epoch").get<int>();
    c.metric = json_double(h.at("metric"));
    c.config_fingerprint = h.at("config_fingerprint").get<std::string>();
    c.config_keys = h.at("config_keys").get<std::map<std::string, std::string>>();
    c.rng_state = h.at("rng_state").get<std::string>();
    c.model = model_config_from_json(h.at("model_config"));
    c.resumable = h.at("resumable").get<bool>();
    if (c.resumable) {
      c.global_step = h.at("global_step").get<int64_t>();
      c.optimizer_steps = h.at("optimizer_steps").get<int64_t>();
      const auto &es = h.at("early_stop");
      c.early.patience = es.at("patience").get<int>();
      c.early.best = json_double(es.at("best"));
      c.early.best_epoch = es.at("best_epoch").get<int>();
      c.early.bad_epochs = es.at("bad_epochs").get<int>();
      c.early.epochs_seen = es.at("epochs_seen").get<int>();
      c.history = h.at("history").get<std::vector<std::string>>();
    }
    for (const auto &t : h.at("tensors")) {
      const auto name = t.at("name").get<std::string>();
      const auto rows = t.at("rows").get<Eigen::Index>();
      const auto cols = t.at("cols").get<Eigen::Index>();
      const auto off = t.at("offset").get<uint64_t>();
      const uint64_t nbytes = static_cast<uint64_t>(rows * cols) * 8;
      if (data_start + off + nbytes > bytes.size()) throw fail("truncated tensor data for " + name);
      Eigen::MatrixXd m(rows, cols);
      std::memcpy(m.data(), bytes.data() + data_start + off, nbytes);
      if (name.rfind("adam.m/", 0) == 0) c.optimizer_m[name.substr(7)] = std::move(m);
      else if (name.rfind("adam.v/", 0) == 0) c.optimizer_v[name.substr(7)] = std::move(m);
      else if (name.rfind("best/", 0) == 0) c.best_tensors[name.substr(5)] = std::move(m);
      else c.tensors[name] = std::move(m);
    }
  } catch (const json::exception &e) {
    throw fail(std::string("bad header: ") + e.what());
  }
  return c;
}

namespace {

std::map<std::string, Eigen::MatrixXd> snapshot(SlimModel &m) {
  std::map<std::string, Eigen::MatrixXd> out;
  for (const auto &[k, p] : m.all_params()) out[k] = p->value;
  for (const auto &[k, p] : m.buffers()) out[k] = p->value;
  return out;
}

// Copies every tensor of `src` whose name matches; with `require_all`
// every model tensor must be present.
void restore(SlimModel &m, const std::map<std::string, Eigen::MatrixXd> &src,
             bool require_all, const std::string &what) {
  ParamList all = m.all_params();
  const ParamList buf = m.buffers();
  all.insert(all.end(), buf.begin(), buf.end());
  for (const auto &[k, p] : all) {
    auto it = src.find(k);
    if (it == src.end()) {
      if (require_all) throw LoadError(what + " lacks tensor '" + k + "'");
      continue;
    }
    if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols())
      throw LoadError(what + " tensor '" + k + "' has shape " +
                      std::to_string(it->second.rows()) + "x" +
                      std::to_string(it->second.cols()) + ", model expects " +
                      std::to_string(p->value.rows()) + "x" +
                      std::to_string(p->value.cols()));
    p->value = it->second;
  }
}

}  // namespace

SlimModel model_from_checkpoint(const Checkpoint &ckpt) {
  SlimModel m(ckpt.model);
  restore(m, ckpt.tensors, true, "checkpoint");
  return m;
}

// --- helpers ---------------------------------------------------------------

void parallel_for(size_t n, int workers, const std::function<void(size_t)> &fn) {
  const size_t w = std::min<size_t>(n, static_cast<size_t>(std::max(1, workers)));
  if (w <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> threads;
  for (size_t t = 0; t < w; ++t)
    threads.emplace_back([&] {
      for (size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!first) first = std::current_exception();
        }
      }
    });
  for (auto &t : threads) t.join();
  if (first) std::rethrow_exception(first);
}

Waveform prepare_waveform(const TrainData &data, const SampleRecord &r,
                          const StageConfig &cfg, bool training) {
  Waveform w = data.audio(r);
  if (cfg.remove_silence) w = remove_silence(w, cfg.silence);
  if (training) w = truncate(w, cfg.max_audio_s);
  return w;
}

ScoreOutcome score_records(const SlimModel &model, const EncoderHandle &encoder,
                           const TrainData &data, bool silence_removal,
                           const SilenceConfig &silence, int workers) {
  ScoreOutcome out;
  out.scores.resize(data.records.size());
  out.errors.resize(data.records.size());
  parallel_for(data.records.size(), workers, [&](size_t i) {
    try {
      Waveform w = data.audio(data.records[i]);
      if (silence_removal) w = remove_silence(w, silence);
      out.scores[i] = model.score(encoder->encode(w));
    } catch (const std::exception &e) {
      out.errors[i] = e.what();
      if (out.errors[i].empty()) out.errors[i] = "scoring failed";
    }
  });
  return out;
}

namespace {

// Encoder outputs keyed by utterance and input length, bounded in bytes.
class EncodeCache {
 public:
  explicit EncodeCache(size_t cap) : cap_(cap) {}

  std::shared_ptr<const LayeredRepresentation> get(const std::string &key) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = map_.find(key);
    return it == map_.end() ? nullptr : it->second;
  }
  void put(const std::string &key, std::shared_ptr<const LayeredRepresentation> rep) {
    size_t bytes = 0;
    for (const auto &l : rep->layers) bytes += static_cast<size_t>(l.size()) * 8;
    std::lock_guard<std::mutex> lock(mu_);
    if (used_ + bytes > cap_) return;
    if (map_.emplace(key, std::move(rep)).second) used_ += bytes;
  }

 private:
  size_t cap_;
  size_t used_ = 0;
  std::mutex mu_;
  std::unordered_map<std::string, std::shared_ptr<const LayeredRepresentation>> map_;
};

std::shared_ptr<const LayeredRepresentation> encode_cached(
    EncodeCache &cache, const Encoder &enc, const std::string &key, const Waveform &w) {
  if (!key.empty())
    if (auto hit = cache.get(key)) return hit;
  auto rep = std::make_shared<const LayeredRepresentation>(enc.encode(w));
  if (!key.empty()) cache.put(key, rep);
  return rep;
}

Waveform row_waveform(const PaddedBatch &b, size_t i) {
  Waveform w;
  const Eigen::VectorXd row = b.data.row(static_cast<Eigen::Index>(i));
  w.samples.assign(row.data(), row.data() + row.size());
  return w;
}

class Logger {
 public:
  Logger(const TrainOptions &o, std::vector<std::string> history)
      : opt_(o), lines_(std::move(history)) {
    if (!o.log_path.empty()) {
      if (auto dir = std::filesystem::path(o.log_path).parent_path(); !dir.empty())
        std::filesystem::create_directories(dir);
      out_.open(o.log_path, std::ios::trunc);
      if (!out_) throw Error("cannot write log '" + o.log_path + "'");
      for (const auto &l : lines_) out_ << l << '\n';
      out_.flush();
    }
  }
  void write(const json &j) {
    const std::string line = j.dump();
    lines_.push_back(line);
    if (out_.is_open()) {
      out_ << line << '\n';
      out_.flush();
    }
    if (opt_.on_log) opt_.on_log(line);
  }
  const std::vector<std::string> &lines() const { return lines_; }

 private:
  const TrainOptions &opt_;
  std::vector<std::string> lines_;
  std::ofstream out_;
};

struct StageHooks {
  std::string stage;
  ParamList trainable;
  int64_t steps_per_epoch = 0;
  // Runs one epoch; returns the mean training loss.
  std::function<double(int epoch, const Rng &rng, int64_t &step, AdamW &opt, Logger &log)>
      train_epoch;
  // Validation metric, lower is better.
  std::function<double(double train_loss)> validate;
};

StageResult run_stage(SlimModel &model, const StageConfig &cfg, const TrainOptions &opt,
                      StageHooks &hooks) {
  AdamW adam(cfg.optimizer);
  EarlyStopping es;
  es.patience = cfg.early_stop_patience;
  int64_t step = 0;
  int start_epoch = 0;
  std::map<std::string, Eigen::MatrixXd> best = snapshot(model);
  std::vector<std::string> history;

  if (opt.resume_from) {
    Checkpoint ck = load_checkpoint(*opt.resume_from);
    if (!ck.resumable) throw ValidationError("'" + *opt.resume_from + "' is not a resumable checkpoint");
    if (ck.stage != hooks.stage)
      throw ValidationError("cannot resume " + hooks.stage + " from a " + ck.stage + " checkpoint");
    if (!opt.config_fingerprint.empty() && !ck.config_fingerprint.empty() &&
        ck.config_fingerprint != opt.config_fingerprint) {
      std::string keys;
      for (const auto &[k, v] : opt.config_keys) {
        auto it = ck.config_keys.find(k);
        if (it == ck.config_keys.end() || it->second != v) keys += (keys.empty() ? "" : ", ") + k;
      }
      for (const auto &[k, v] : ck.config_keys)
        if (!opt.config_keys.count(k)) keys += (keys.empty() ? "" : ", ") + k;
      throw ValidationError("resume checkpoint was written under a different config" +
                            (keys.empty() ? std::string() : " (differs in: " + keys + ")"));
    }
    restore(model, ck.tensors, true, "resume checkpoint");
    std::map<std::string, AdamW::Moments> moments;
    for (const auto &[k, m] : ck.optimizer_m) moments[k] = {m, ck.optimizer_v.at(k)};
    adam.restore(ck.optimizer_steps, std::move(moments));
    es = ck.early;
    step = ck.global_step;
    start_epoch = ck.epoch + 1;
    best = ck.best_tensors;
    history = ck.history;
  }

  Logger log(opt, history);
  const int64_t total_steps = hooks.steps_per_epoch * cfg.epochs;
  if (!opt.checkpoint_dir.empty()) std::filesystem::create_directories(opt.checkpoint_dir);

  auto make_ckpt = [&](int epoch, const Rng &rng, bool resumable) {
    Checkpoint c;
    c.stage = hooks.stage;
    c.config_fingerprint = opt.config_fingerprint;
    c.config_keys = opt.config_keys;
    c.rng_state = rng.state();
    c.model = model.cfg;
    if (resumable) {
      c.epoch = epoch;
      c.metric = es.best;
      c.tensors = snapshot(model);
      c.resumable = true;
      c.global_step = step;
      c.optimizer_steps = adam.steps();
      for (const auto &[k, m] : adam.moments()) {
        c.optimizer_m[k] = m.m;
        c.optimizer_v[k] = m.v;
      }
      c.best_tensors = best;
      c.early = es;
      c.history = log.lines();
    } else {
      c.epoch = es.best_epoch;
      c.metric = es.best;
      c.tensors = best;
    }
    return c;
  };

  StageResult result;
  bool stopped = es.bad_epochs >= es.patience;
  int ran = 0;
  Rng last_rng(cfg.seed);
  for (int epoch = start_epoch; epoch < cfg.epochs && !stopped; ++epoch) {
    const Rng erng = Rng(cfg.seed).split(static_cast<uint64_t>(epoch) + 1);
    last_rng = erng;
    const double train_loss = hooks.train_epoch(epoch, erng, step, adam, log);
    const double metric = hooks.validate(train_loss);
    stopped = early_stop_update(es, metric) == StopDecision::kStop;
    if (es.best_epoch == epoch) best = snapshot(model);
    log.write({{"event", "epoch"},
               {"stage", hooks.stage},
               {"epoch", epoch},
               {"step", step},
               {"lr", lr_at(step, total_steps, cfg)},
               {"train_loss", double_json(train_loss)},
               {"val_metric", double_json(metric)},
               {"best_epoch", es.best_epoch},
               {"stop", stopped}});
    if (!opt.checkpoint_dir.empty()) {
      const auto dir = std::filesystem::path(opt.checkpoint_dir);
      save_checkpoint((dir / (hooks.stage + "_last.ckpt")).string(),
                      make_ckpt(epoch, erng, true));
      if (es.best_epoch == epoch)
        save_checkpoint((dir / (hooks.stage + "_best.ckpt")).string(),
                        make_ckpt(epoch, erng, false));
    }
    ++ran;
    if (!stopped && opt.max_epochs_this_run >= 0 && ran >= opt.max_epochs_this_run &&
        epoch + 1 < cfg.epochs) {
      result.last = make_ckpt(epoch, erng, true);
      result.best = make_ckpt(epoch, erng, false);
      result.complete = false;
      result.log_lines = log.lines();
      return result;
    }
  }
  result.best = make_ckpt(es.best_epoch, last_rng, false);
  result.last = result.best;
  result.complete = true;
  result.log_lines = log.lines();
  restore(model, best, true, "best snapshot");
  return result;
}

void check_labels_known(const std::vector<SampleRecord> &records, const char *what) {
  for (const auto &r : records)
    if (r.label == Label::kUnknown)
      throw ValidationError(std::string(what) + " record '" + r.utt_id + "' has no label");
}

int64_t count_batches(size_t n, int batch_size) {
  return static_cast<int64_t>((n + static_cast<size_t>(batch_size) - 1) /
                              static_cast<size_t>(batch_size));
}

}  // namespace

// --- Stage 1 ---------------------------------------------------------------

StageResult pretrain_stage1(const TrainData &train, const TrainData &valid,
                            const EncoderHandle &encoder, const ModelConfig &model_cfg,
                            const StageConfig &cfg, const TrainOptions &opt) {
  cfg.validate();
  if (cfg.stage != 1) throw ValidationError("pretrain_stage1 needs a stage 1 config");
  if (train.records.empty()) throw ValidationError("Stage 1 training set is empty");
  for (const auto *set : {&train.records, &valid.records})
    for (const auto &r : *set)
      if (r.label != Label::kBonafide)
        throw ValidationError("Stage 1 accepts bonafide speech only; record '" + r.utt_id +
                              "' is labeled " + std::string(label_name(r.label)));
  if (model_cfg.feature_dim != encoder->feature_dim())
    throw ValidationError("model feature_dim " + std::to_string(model_cfg.feature_dim) +
                          " does not match the encoder (" +
                          std::to_string(encoder->feature_dim()) + ")");
  model_cfg.views.validate(encoder->layer_count());
  if (!model_cfg.use_dependency)
    throw ValidationError("Stage 1 trains the dependency projectors; use_dependency is off");

  SlimModel model(model_cfg);
  Rng init = Rng(cfg.seed).split(0);
  model.init(init);
  EncodeCache cache(opt.encode_cache_bytes);

  // Forward over one padded batch: per-item dependency sequences.
  struct BatchOut {
    std::vector<LayeredRepresentation> style, ling;
    std::vector<Eigen::MatrixXd> S, L;
    std::vector<Projector::Cache> sc, lc;
  };
  auto run_batch = [&](const TrainData &data, const std::vector<SampleRecord> &batch,
                       bool training, Rng *rng, BatchOut &o) {
    std::vector<Waveform> waves(batch.size());
    parallel_for(batch.size(), opt.workers, [&](size_t i) {
      waves[i] = prepare_waveform(data, batch[i], cfg, training);
    });
    std::vector<std::string> ids;
    for (const auto &r : batch) ids.push_back(r.utt_id);
    const PaddedBatch pb = pad_batch(waves, ids);
    std::vector<std::shared_ptr<const LayeredRepresentation>> reps(batch.size());
    parallel_for(batch.size(), opt.workers, [&](size_t i) {
      const std::string key = batch[i].utt_id + (training ? "#t" : "#v") +
                              std::to_string(pb.max_length());
      reps[i] = encode_cached(cache, *encoder, key, row_waveform(pb, i));
    });
    const size_t B = batch.size();
    o.style.resize(B);
    o.ling.resize(B);
    o.S.resize(B);
    o.L.resize(B);
    o.sc.resize(B);
    o.lc.resize(B);
    for (size_t i = 0; i < B; ++i) {
      std::tie(o.style[i], o.ling[i]) = split_views(*reps[i], model_cfg.views);
      o.S[i] = model.style_proj.forward(o.style[i].layers, training, rng, &o.sc[i]);
      o.L[i] = model.ling_proj.forward(o.ling[i].layers, training, rng, &o.lc[i]);
    }
  };

  StageHooks hooks;
  hooks.stage = "stage1";
  hooks.trainable = model.projector_params();
  hooks.steps_per_epoch = count_batches(train.records.size(), cfg.batch_size);
  const int64_t total_steps = hooks.steps_per_epoch * cfg.epochs;

  hooks.train_epoch = [&](int epoch, const Rng &erng, int64_t &step, AdamW &adam,
                          Logger &log) {
    Rng brng = erng.split(0);
    const auto batches = make_batches(train.records, static_cast<size_t>(cfg.batch_size),
                                      cfg.length_sorted, brng);
    double sum = 0.0;
    for (size_t bi = 0; bi < batches.size(); ++bi) {
      Rng srng = erng.split(bi + 1);
      BatchOut o;
      run_batch(train, batches[bi], true, &srng, o);
      SscGrad g;
      const LossBreakdown lb = ssc_loss(o.S, o.L, cfg.lambda, &g);
      for (auto &[k, p] : hooks.trainable) p->zero_grad();
      for (size_t i = 0; i < o.S.size(); ++i) {
        model.style_proj.backward(o.style[i].layers, o.sc[i], g.d_style[i]);
        model.ling_proj.backward(o.ling[i].layers, o.lc[i], g.d_ling[i]);
      }
      const double lr = lr_at(step, total_steps, cfg);
      adam.step(hooks.trainable, lr);
      ++step;
      sum += lb.total;
      log.write({{"event", "step"},
                 {"stage", "stage1"},
                 {"epoch", epoch},
                 {"step", step},
                 {"lr", lr},
                 {"items", o.S.size()},
                 {"loss", double_json(lb.total)},
                 {"distance", double_json(lb.distance)},
                 {"redundancy", double_json(lb.redundancy)}});
    }
    return sum / static_cast<double>(batches.size());
  };

  hooks.validate = [&](double train_loss) {
    if (valid.records.empty()) return train_loss;
    Rng unused(0);
    const auto batches = make_batches(valid.records, static_cast<size_t>(cfg.batch_size),
                                      true, unused);
    double sum = 0.0;
    for (const auto &b : batches) {
      BatchOut o;
      run_batch(valid, b, false, nullptr, o);
      sum += ssc_loss(o.S, o.L, cfg.lambda).total;
    }
    return sum / static_cast<double>(batches.size());
  };

  return run_stage(model, cfg, opt, hooks);
}

// --- Stage 2 ---------------------------------------------------------------

StageResult train_stage2(const TrainData &train, const TrainData &valid,
                         const EncoderHandle &encoder, const Checkpoint *stage1,
                         const ModelConfig &model_cfg, const StageConfig &cfg,
                         const TrainOptions &opt) {
  cfg.validate();
  if (cfg.stage != 2) throw ValidationError("train_stage2 needs a stage 2 config");
  check_labels_known(train.records, "training");
  check_labels_known(valid.records, "validation");
  size_t nb = 0, ns = 0;
  for (const auto &r : train.records) (r.label == Label::kBonafide ? nb : ns) += 1;
  if (nb == 0 || ns == 0)
    throw ValidationError("Stage 2 training data needs both bonafide and spoof records");
  if (model_cfg.feature_dim != encoder->feature_dim())
    throw ValidationError("model feature_dim " + std::to_string(model_cfg.feature_dim) +
                          " does not match the encoder (" +
                          std::to_string(encoder->feature_dim()) + ")");
  model_cfg.views.validate(encoder->layer_count());
  if (model_cfg.use_dependency && !stage1)
    throw ValidationError("Stage 2 with dependency features needs a Stage 1 checkpoint");
  if (stage1 && stage1->stage != "stage1")
    throw ValidationError("expected a stage1 checkpoint, got " + stage1->stage);

  SlimModel model(model_cfg);
  Rng init = Rng(cfg.seed).split(0);
  model.init(init);
  EncodeCache cache(opt.encode_cache_bytes);

  if (model_cfg.use_dependency) {
    SlimModel pre = model_from_checkpoint(*stage1);
    const ParamList src = pre.projector_params();
    ParamList dst = model.projector_params();
    if (src.size() != dst.size()) throw ValidationError("Stage 1 projector layout differs");
    for (size_t i = 0; i < src.size(); ++i) {
      if (src[i].second->value.rows() != dst[i].second->value.rows() ||
          src[i].second->value.cols() != dst[i].second->value.cols())
        throw ValidationError("Stage 1 tensor '" + src[i].first +
                              "' does not fit the Stage 2 model");
      dst[i].second->value = src[i].second->value;
    }
    if (!opt.resume_from) {
      // Fixed standardization of the pooled dependency features.
      std::vector<Eigen::VectorXd> feats(train.records.size());
      parallel_for(train.records.size(), opt.workers, [&](size_t i) {
        const Waveform w = prepare_waveform(train, train.records[i], cfg, true);
        const auto rep = encode_cached(
            cache, *encoder, train.records[i].utt_id + "#o" + std::to_string(w.size()), w);
        auto [s, l] = model.dependency_features(*rep);
        feats[i].resize(s.size() + l.size());
        feats[i] << s, l;
      });
      const Eigen::Index D2 = feats[0].size();
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(D2), sd = Eigen::VectorXd::Zero(D2);
      for (const auto &f : feats) mean += f;
      mean /= static_cast<double>(feats.size());
      for (const auto &f : feats) sd += (f - mean).cwiseAbs2();
      sd = (sd / static_cast<double>(feats.size())).cwiseSqrt();
      for (Eigen::Index i = 0; i < D2; ++i)
        if (!(sd(i) > 1e-6)) sd(i) = 1.0;
      model.set_dependency_norm(mean, sd);
    }
  }

  StageHooks hooks;
  hooks.stage = "stage2";
  hooks.trainable = model.classifier_params();
  if (cfg.finetune_projector && model_cfg.use_dependency) {
    const ParamList p = model.projector_params();
    hooks.trainable.insert(hooks.trainable.end(), p.begin(), p.end());
  }
  hooks.steps_per_epoch = count_batches(train.records.size(), cfg.batch_size);
  const int64_t total_steps = hooks.steps_per_epoch * cfg.epochs;
  const bool finetune = cfg.finetune_projector && model_cfg.use_dependency;

  hooks.train_epoch = [&](int epoch, const Rng &erng, int64_t &step, AdamW &adam,
                          Logger &log) {
    Rng brng = erng.split(0);
    const auto batches = make_batches(train.records, static_cast<size_t>(cfg.batch_size),
                                      cfg.length_sorted, brng);
    double sum = 0.0;
    for (size_t bi = 0; bi < batches.size(); ++bi) {
      const Rng srng = erng.split(bi + 1);
      const auto &batch = batches[bi];
      std::vector<Waveform> waves(batch.size());
      parallel_for(batch.size(), opt.workers, [&](size_t i) {
        waves[i] = prepare_waveform(train, batch[i], cfg, true);
      });
      std::vector<std::string> ids;
      std::vector<double> labels;
      for (const auto &r : batch) {
        ids.push_back(r.utt_id);
        labels.push_back(r.label == Label::kBonafide ? 1.0 : 0.0);
      }
      const size_t n_orig = waves.size();
      if (cfg.augment) {
        waves = augment_batch(waves, cfg.rawboost, srng.split(0));
        for (size_t i = 0; i < n_orig; ++i) {
          ids.push_back(ids[i] + "+aug");
          labels.push_back(labels[i]);
        }
      }
      const PaddedBatch pb = pad_batch(waves, ids);
      const size_t n = waves.size();
      std::vector<std::shared_ptr<const LayeredRepresentation>> reps(n);
      parallel_for(n, opt.workers, [&](size_t i) {
        const std::string key =
            i < n_orig ? ids[i] + "#t" + std::to_string(pb.max_length()) : std::string();
        reps[i] = encode_cached(cache, *encoder, key, row_waveform(pb, i));
      });
      Rng drop = srng.split(1);
      std::vector<ForwardState> states(n);
      Eigen::VectorXd logits(static_cast<Eigen::Index>(n));
      for (size_t i = 0; i < n; ++i)
        logits(static_cast<Eigen::Index>(i)) =
            model.forward(*reps[i], true, finetune, &drop, &states[i]);
      const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(labels.data(),
                                                                  static_cast<Eigen::Index>(n));
      const LossValue lv = cfg.loss == LossChoice::kWeightedBce
                               ? weighted_bce(logits, y, cfg.bonafide_weight)
                               : focal_loss(logits, y, cfg.focal_gamma, cfg.focal_alpha);
      for (auto &[k, p] : hooks.trainable) p->zero_grad();
      for (size_t i = 0; i < n; ++i)
        model.backward(states[i], lv.dlogits(static_cast<Eigen::Index>(i)), finetune);
      const double lr = lr_at(step, total_steps, cfg);
      adam.step(hooks.trainable, lr);
      ++step;
      sum += lv.loss;
      log.write({{"event", "step"},
                 {"stage", "stage2"},
                 {"epoch", epoch},
                 {"step", step},
                 {"lr", lr},
                 {"items", n},
                 {"loss", double_json(lv.loss)}});
    }
    return sum / static_cast<double>(batches.size());
  };

  hooks.validate = [&](double train_loss) {
    if (valid.records.empty()) return train_loss;
    std::vector<double> scores(valid.records.size());
    std::vector<int> labels(valid.records.size());
    parallel_for(valid.records.size(), opt.workers, [&](size_t i) {
      const auto &r = valid.records[i];
      const Waveform w = prepare_waveform(valid, r, cfg, false);
      const auto rep = encode_cached(cache, *encoder, r.utt_id + "#v" + std::to_string(w.size()), w);
      scores[i] = model.score(*rep);
      labels[i] = r.label == Label::kBonafide ? 1 : 0;
    });
    bool both = false;
    for (int l : labels) both |= l != labels[0];
    if (!both) return train_loss;
    return compute_eer(scores, labels).eer;
  };

  return run_stage(model, cfg, opt, hooks);
}

}  // namespace sld
