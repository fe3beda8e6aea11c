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

#include "sld/config.h"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

namespace sld {

namespace {

std::string format_name(ManifestFormat f) {
  return f == ManifestFormat::kCsv ? "csv" : "asvspoof_protocol";
}

// Reads one YAML mapping, remembering which keys were consumed so the rest
// can be reported as unknown.
class Section {
 public:
  Section(YAML::Node node, std::string path, std::vector<std::string> &errors)
      : node_(std::move(node)), path_(std::move(path)), errors_(errors) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) {
      errors_.push_back(where() + "must be a mapping");
      node_ = YAML::Node();
    }
  }

  template <typename T>
  void get(const std::string &key, T &out) {
    const YAML::Node v = lookup(key);
    if (v.IsNull()) return;
    try {
      if (!v.IsScalar()) throw YAML::Exception(YAML::Mark::null_mark(), "");
      if constexpr (std::is_same_v<T, uint64_t>) {
        const auto s = v.Scalar();
        if (s.empty() || s[0] == '-') throw YAML::Exception(YAML::Mark::null_mark(), "");
      }
      out = v.as<T>();
    } catch (const YAML::Exception &) {
      errors_.push_back(path_ + key + ": expected " + type_name<T>());
    }
  }

  // Scalar parsed by a callback that throws ValidationError.
  template <typename T>
  void get_parsed(const std::string &key, T &out,
                  const std::function<T(const std::string &)> &parse) {
    std::string text;
    if (lookup(key).IsNull()) return;
    get(key, text);
    try {
      out = parse(text);
    } catch (const ValidationError &e) {
      errors_.push_back(path_ + key + ": " + e.what());
    }
  }

  void get_range(const std::string &key, LayerRange &out) {
    const YAML::Node v = lookup(key);
    if (v.IsNull()) return;
    if (!v.IsSequence() || v.size() != 2) {
      errors_.push_back(path_ + key + ": expected [first, last]");
      return;
    }
    try {
      out = {v[0].as<int>(), v[1].as<int>()};
    } catch (const YAML::Exception &) {
      errors_.push_back(path_ + key + ": expected two integers");
    }
  }

  Section sub(const std::string &key) { return Section(lookup(key), path_ + key + ".", errors_); }

  YAML::Node raw_all() const { return node_; }

  void finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto &kv : node_) {
      const auto k = kv.first.as<std::string>();
      if (!used_.count(k)) errors_.push_back(path_ + k + ": unknown key");
    }
  }

 private:
  std::string where() const {
    return path_.empty() ? "config " : path_.substr(0, path_.size() - 1) + ": ";
  }

  // Missing keys come back as a null node.
  YAML::Node lookup(const std::string &key) {
    used_.insert(key);
    if (!node_ || !node_.IsMap()) return YAML::Node();
    const YAML::Node &map = node_;
    YAML::Node v = map[key];
    if (!v || v.IsNull()) return YAML::Node();
    return v;
  }

  template <typename T>
  static const char *type_name() {
    if constexpr (std::is_same_v<T, bool>) return "true or false";
    if constexpr (std::is_same_v<T, std::string>) return "a string";
    if constexpr (std::is_floating_point_v<T>) return "a number";
    if constexpr (std::is_same_v<T, uint64_t>) return "a nonnegative integer";
    return "an integer";
  }

  YAML::Node node_;
  std::string path_;
  std::vector<std::string> &errors_;
  std::set<std::string> used_;
};

void read_optimizer(Section s, AdamWConfig &o) {
  s.get("beta1", o.beta1);
  s.get("beta2", o.beta2);
  s.get("eps", o.eps);
  s.get("weight_decay", o.weight_decay);
  s.finish();
}

void read_stage(Section s, StageConfig &c) {
  s.get("batch_size", c.batch_size);
  s.get("epochs", c.epochs);
  s.get("max_audio_s", c.max_audio_s);
  s.get("lr_start", c.lr_start);
  s.get("lr_end", c.lr_end);
  s.get("early_stop_patience", c.early_stop_patience);
  s.get("length_sorted", c.length_sorted);
  read_optimizer(s.sub("optimizer"), c.optimizer);
  if (c.stage == 1) {
    s.get("lambda", c.lambda);
  } else {
    s.get_parsed<LossChoice>("loss", c.loss, [](const std::string &t) {
      return parse_loss_choice(t);
    });
    s.get("bonafide_weight", c.bonafide_weight);
    s.get("focal_gamma", c.focal_gamma);
    s.get("focal_alpha", c.focal_alpha);
    s.get("augment", c.augment);
    s.get("finetune_projector", c.finetune_projector);
  }
  s.finish();
}

// Flattens nested mappings into dotted keys.
void flatten(const YAML::Node &n, const std::string &prefix,
             std::map<std::string, std::string> &out, std::vector<std::string> &errors) {
  for (const auto &kv : n) {
    const std::string key = prefix + kv.first.as<std::string>();
    if (kv.second.IsMap()) flatten(kv.second, key + ".", out, errors);
    else if (kv.second.IsScalar()) out[key] = kv.second.Scalar();
    else errors.push_back("rawboost." + key + ": expected a scalar");
  }
}

std::map<std::string, std::string> preset_lines(const std::string &text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

std::string read_text(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RawBoostConfig build_rawboost(const std::string &preset_path, const YAML::Node &section,
                              std::vector<std::string> &errors) {
  std::map<std::string, std::string> kv;
  try {
    kv = preset_lines(preset_path.empty()
                          ? serialize_rawboost_preset(default_rawboost_preset())
                          : read_text(preset_path));
  } catch (const Error &e) {
    errors.push_back(std::string("rawboost.preset: ") + e.what());
    return default_rawboost_preset();
  }
  if (section && section.IsMap()) {
    std::map<std::string, std::string> over;
    flatten(section, "", over, errors);
    over.erase("preset");
    for (auto &[k, v] : over) kv[k] = v;
  }
  std::string text;
  for (const auto &[k, v] : kv) text += k + " = " + v + "\n";
  try {
    return parse_rawboost_preset(text);
  } catch (const ValidationError &e) {
    errors.push_back(std::string("rawboost: ") + e.what());
    return default_rawboost_preset();
  }
}

// --- emit -------------------------------------------------------------------

YAML::Node range_node(const LayerRange &r) {
  YAML::Node n(YAML::NodeType::Sequence);
  n.push_back(r.first);
  n.push_back(r.last);
  n.SetStyle(YAML::EmitterStyle::Flow);
  return n;
}

std::string num(double v) { return format_double(v); }

YAML::Node stage_node(const StageConfig &c) {
  YAML::Node n;
  n["batch_size"] = c.batch_size;
  n["epochs"] = c.epochs;
  n["max_audio_s"] = num(c.max_audio_s);
  n["lr_start"] = num(c.lr_start);
  n["lr_end"] = num(c.lr_end);
  n["early_stop_patience"] = c.early_stop_patience;
  n["length_sorted"] = c.length_sorted;
  n["optimizer"]["beta1"] = num(c.optimizer.beta1);
  n["optimizer"]["beta2"] = num(c.optimizer.beta2);
  n["optimizer"]["eps"] = num(c.optimizer.eps);
  n["optimizer"]["weight_decay"] = num(c.optimizer.weight_decay);
  if (c.stage == 1) {
    n["lambda"] = num(c.lambda);
  } else {
    n["loss"] = std::string(loss_choice_name(c.loss));
    n["bonafide_weight"] = num(c.bonafide_weight);
    n["focal_gamma"] = num(c.focal_gamma);
    n["focal_alpha"] = num(c.focal_alpha);
    n["augment"] = c.augment;
    n["finetune_projector"] = c.finetune_projector;
  }
  return n;
}

YAML::Node config_node(const RunConfig &c) {
  YAML::Node n;
  n["seed"] = c.seed;
  n["workers"] = c.workers;
  n["output_dir"] = c.output_dir;
  n["polarity"] = std::string(polarity_name(c.polarity));
  n["encoder"]["descriptor"] = c.encoder;
  n["encoder"]["include_embedding_layer"] = c.include_embedding_layer;
  n["views"]["style"] = range_node(c.model.views.style);
  n["views"]["linguistics"] = range_node(c.model.views.linguistics);
  n["model"]["bottleneck_dim"] = c.model.bottleneck_dim;
  n["model"]["dep_dim"] = c.model.dep_dim;
  n["model"]["attention_dim"] = c.model.attention_dim;
  n["model"]["hidden_dim"] = c.model.hidden_dim;
  n["model"]["bottleneck_dropout"] = num(c.model.bottleneck_dropout);
  n["model"]["projector_fc_dropout"] = num(c.model.projector_fc_dropout);
  n["model"]["classifier_dropout"] = num(c.model.classifier_dropout);
  n["model"]["use_dependency"] = c.model.use_dependency;
  n["data"]["format"] = format_name(c.data.format);
  n["data"]["audio_root"] = c.data.audio_root;
  n["data"]["pretrain"] = c.data.pretrain;
  n["data"]["pretrain_valid"] = c.data.pretrain_valid;
  n["data"]["train"] = c.data.train;
  n["data"]["valid"] = c.data.valid;
  n["data"]["score"] = c.data.score;
  n["silence"]["enabled"] = c.remove_silence;
  n["silence"]["frame_ms"] = num(c.silence.frame_ms);
  n["silence"]["hop_ms"] = num(c.silence.hop_ms);
  n["silence"]["threshold_db"] = num(c.silence.threshold_db);
  n["stage1"] = stage_node(c.stage1);
  n["stage2"] = stage_node(c.stage2);
  n["rawboost"]["preset"] = c.rawboost_preset;
  for (const auto &[k, v] : preset_lines(serialize_rawboost_preset(c.rawboost)))
    if (k != "version") n["rawboost"][k] = v;
  n["dcf"]["cost_miss"] = num(c.dcf.cost_miss);
  n["dcf"]["cost_fa"] = num(c.dcf.cost_fa);
  n["dcf"]["prior_target"] = num(c.dcf.prior_target);
  return n;
}

void flatten_all(const YAML::Node &n, const std::string &prefix, ConfigKeys &out) {
  for (const auto &kv : n) {
    const std::string key = prefix + kv.first.as<std::string>();
    if (kv.second.IsMap()) {
      flatten_all(kv.second, key + ".", out);
    } else if (kv.second.IsSequence()) {
      std::string v;
      for (size_t i = 0; i < kv.second.size(); ++i)
        v += (i ? "," : "") + kv.second[i].as<std::string>();
      out[key] = v;
    } else {
      out[key] = kv.second.as<std::string>();
    }
  }
}

bool has_prefix(const std::string &s, std::string_view p) { return s.rfind(p, 0) == 0; }

}  // namespace

void RunConfig::validate() const {
  std::vector<std::string> e;
  if (workers < 1) e.push_back("workers must be >= 1");
  if (!(encoder == "toy" || has_prefix(encoder, "toy:") || has_prefix(encoder, "exec:")))
    e.push_back("encoder.descriptor must be 'toy[:...]' or 'exec:<program>'");
  try {
    model.views.validate(std::numeric_limits<int>::max());
  } catch (const ValidationError &err) {
    e.push_back(std::string("views: ") + err.what());
  }
  if (model.bottleneck_dim < 1 || model.dep_dim < 1 || model.attention_dim < 1 ||
      model.hidden_dim < 1)
    e.push_back("model dimensions must be >= 1");
  for (double d : {model.bottleneck_dropout, model.projector_fc_dropout, model.classifier_dropout})
    if (!(d >= 0 && d < 1)) e.push_back("model dropouts must lie in [0, 1)");
  if (!(silence.frame_ms > 0 && silence.hop_ms > 0 && silence.threshold_db > 0))
    e.push_back("silence: frame_ms, hop_ms and threshold_db must be positive");
  for (const StageConfig *s : {&stage1, &stage2}) {
    try {
      s->validate();
    } catch (const ValidationError &err) {
      e.push_back(err.what());
    }
  }
  try {
    rawboost.validate();
  } catch (const ValidationError &err) {
    e.push_back(std::string("rawboost: ") + err.what());
  }
  try {
    dcf.validate();
  } catch (const ValidationError &err) {
    e.push_back(std::string("dcf: ") + err.what());
  }
  if (!e.empty()) {
    std::string msg = "invalid config:";
    for (const auto &s : e) msg += "\n  " + s;
    throw ValidationError(msg);
  }
}

RunConfig parse_run_config(const std::string &text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException &e) {
    throw ParseError(e.mark.line + 1, std::string("YAML: ") + e.msg);
  }
  RunConfig c;
  std::vector<std::string> errors;
  Section top(root, "", errors);
  top.get("seed", c.seed);
  top.get("workers", c.workers);
  top.get("output_dir", c.output_dir);
  top.get_parsed<Polarity>("polarity", c.polarity,
                           [](const std::string &t) { return parse_polarity(t); });
  {
    Section s = top.sub("encoder");
    s.get("descriptor", c.encoder);
    s.get("include_embedding_layer", c.include_embedding_layer);
    s.finish();
  }
  {
    Section s = top.sub("views");
    s.get_range("style", c.model.views.style);
    s.get_range("linguistics", c.model.views.linguistics);
    s.finish();
  }
  {
    Section s = top.sub("model");
    s.get("bottleneck_dim", c.model.bottleneck_dim);
    s.get("dep_dim", c.model.dep_dim);
    s.get("attention_dim", c.model.attention_dim);
    s.get("hidden_dim", c.model.hidden_dim);
    s.get("bottleneck_dropout", c.model.bottleneck_dropout);
    s.get("projector_fc_dropout", c.model.projector_fc_dropout);
    s.get("classifier_dropout", c.model.classifier_dropout);
    s.get("use_dependency", c.model.use_dependency);
    s.finish();
  }
  {
    Section s = top.sub("data");
    s.get_parsed<ManifestFormat>("format", c.data.format, [](const std::string &t) {
      return parse_manifest_format(t);
    });
    s.get("audio_root", c.data.audio_root);
    s.get("pretrain", c.data.pretrain);
    s.get("pretrain_valid", c.data.pretrain_valid);
    s.get("train", c.data.train);
    s.get("valid", c.data.valid);
    s.get("score", c.data.score);
    s.finish();
  }
  {
    Section s = top.sub("silence");
    s.get("enabled", c.remove_silence);
    s.get("frame_ms", c.silence.frame_ms);
    s.get("hop_ms", c.silence.hop_ms);
    s.get("threshold_db", c.silence.threshold_db);
    s.finish();
  }
  read_stage(top.sub("stage1"), c.stage1);
  read_stage(top.sub("stage2"), c.stage2);
  {
    Section s = top.sub("rawboost");
    s.get("preset", c.rawboost_preset);
    c.rawboost = build_rawboost(c.rawboost_preset, s.raw_all(), errors);
  }
  {
    Section s = top.sub("dcf");
    s.get("cost_miss", c.dcf.cost_miss);
    s.get("cost_fa", c.dcf.cost_fa);
    s.get("prior_target", c.dcf.prior_target);
    s.finish();
  }
  top.finish();

  try {
    c.validate();
  } catch (const ValidationError &e) {
    std::string msg = e.what();
    const auto nl = msg.find('\n');
    if (nl != std::string::npos) {
      std::istringstream in(msg.substr(nl + 1));
      for (std::string line; std::getline(in, line);) errors.push_back(line.substr(2));
    }
  }
  if (!errors.empty()) {
    std::string msg = "invalid config:";
    for (const auto &s : errors) msg += "\n  " + s;
    throw ValidationError(msg);
  }
  return c;
}

RunConfig load_run_config(const std::string &path) { return parse_run_config(read_text(path)); }

std::string dump_run_config(const RunConfig &cfg) {
  YAML::Emitter out;
  out << config_node(cfg);
  return std::string(out.c_str()) + "\n";
}

void resolve_run_config(RunConfig &c) {
  const Rng root(c.seed);
  c.stage1.seed = root.split(1).next_u64();
  c.stage2.seed = root.split(2).next_u64();
  for (StageConfig *s : {&c.stage1, &c.stage2}) {
    s->remove_silence = c.remove_silence;
    s->silence = c.silence;
  }
  c.stage2.rawboost = c.rawboost;
}

ConfigKeys config_keys(const RunConfig &cfg) {
  ConfigKeys out;
  flatten_all(config_node(cfg), "", out);
  return out;
}

ConfigKeys model_config_keys(const RunConfig &cfg) {
  ConfigKeys out;
  for (const auto &[k, v] : config_keys(cfg))
    if (has_prefix(k, "encoder.") || has_prefix(k, "views.") || has_prefix(k, "model.") ||
        has_prefix(k, "silence."))
      out[k] = v;
  return out;
}

ConfigKeys stage_config_keys(const RunConfig &cfg, int stage) {
  ConfigKeys out = model_config_keys(cfg);
  const std::string prefix = stage == 1 ? "stage1." : "stage2.";
  for (const auto &[k, v] : config_keys(cfg))
    if (k == "seed" || has_prefix(k, prefix) || (stage == 2 && has_prefix(k, "rawboost.") &&
                                                  k != "rawboost.preset"))
      out[k] = v;
  return out;
}

std::string config_fingerprint(const ConfigKeys &keys) {
  std::string text;
  for (const auto &[k, v] : keys) text += k + "=" + v + "\n";
  return hex64(fnv1a64(text));
}

std::vector<std::string> divergent_keys(const ConfigKeys &a, const ConfigKeys &b) {
  std::vector<std::string> out;
  for (const auto &[k, v] : a) {
    auto it = b.find(k);
    if (it == b.end() || it->second != v) out.push_back(k);
  }
  for (const auto &[k, v] : b)
    if (!a.count(k)) out.push_back(k);
  std::sort(out.begin(), out.end());
  return out;
}

std::string default_output_root() {
  const char *env = std::getenv("SLD_OUTPUT_ROOT");
  return env && *env ? std::string(env) : std::string("sld_runs");
}

}  // namespace sld
