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

#include "sld/encoder.h"

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <numbers>
#include <sstream>

extern char **environ;

namespace sld {

Eigen::MatrixXd LayeredRepresentation::layer_mean() const {
  if (layers.empty()) throw ValidationError("empty representation");
  Eigen::MatrixXd m = layers[0];
  for (size_t l = 1; l < layers.size(); ++l) m += layers[l];
  return m / static_cast<double>(layers.size());
}

void LayeredRepresentation::validate() const {
  if (layers.empty()) throw ValidationError("representation has no layers");
  for (size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].rows() != layers[0].rows() ||
        layers[l].cols() != layers[0].cols())
      throw ValidationError("representation layer " + std::to_string(l) +
                            " has a different shape");
    if (!layers[l].allFinite())
      throw ValidationError("representation layer " + std::to_string(l) +
                            " has non-finite entries");
  }
}

void LayerViewSpec::validate(int layer_count) const {
  auto check = [&](const LayerRange &r, const char *name) {
    if (r.first > r.last)
      throw ValidationError(std::string(name) + " layer range is empty");
    if (r.first < 0 || r.last >= layer_count)
      throw ValidationError(std::string(name) + " layers " +
                            std::to_string(r.first) + "-" +
                            std::to_string(r.last) + " fall outside [0, " +
                            std::to_string(layer_count) + ")");
  };
  check(style, "style");
  check(linguistics, "linguistics");
  if (style.first <= linguistics.last && linguistics.first <= style.last)
    throw ValidationError("style and linguistics layer ranges overlap");
}

std::pair<LayeredRepresentation, LayeredRepresentation> split_views(
    const LayeredRepresentation &rep, const LayerViewSpec &spec) {
  spec.validate(rep.layer_count());
  LayeredRepresentation s, l;
  s.frame_rate = l.frame_rate = rep.frame_rate;
  for (int i = spec.style.first; i <= spec.style.last; ++i)
    s.layers.push_back(rep.layers[static_cast<size_t>(i)]);
  for (int i = spec.linguistics.first; i <= spec.linguistics.last; ++i)
    l.layers.push_back(rep.layers[static_cast<size_t>(i)]);
  return {std::move(s), std::move(l)};
}

std::vector<double> toy_band_centers() {
  std::vector<double> c(kToyBands);
  for (int k = 0; k < kToyBands; ++k) c[static_cast<size_t>(k)] = 150.0 + 200.0 * k;
  return c;
}

namespace {

void check_input(const Waveform &w, int hop) {
  if (w.sample_rate != kSampleRate)
    throw ValidationError("encoder input must be 16 kHz, got " +
                          std::to_string(w.sample_rate));
  if (w.size() < static_cast<size_t>(hop))
    throw ValidationError("waveform of " + std::to_string(w.size()) +
                          " samples is shorter than one hop (" +
                          std::to_string(hop) + ")");
}

// Centered moving average over +-radius frames, normalized at the edges.
Eigen::MatrixXd smooth_time(const Eigen::MatrixXd &x, int radius) {
  if (radius == 0) return x;
  const Eigen::Index T = x.cols();
  Eigen::MatrixXd prefix = Eigen::MatrixXd::Zero(x.rows(), T + 1);
  for (Eigen::Index t = 0; t < T; ++t) prefix.col(t + 1) = prefix.col(t) + x.col(t);
  Eigen::MatrixXd out(x.rows(), T);
  for (Eigen::Index t = 0; t < T; ++t) {
    const Eigen::Index a = std::max<Eigen::Index>(0, t - radius);
    const Eigen::Index b = std::min<Eigen::Index>(T, t + radius + 1);
    out.col(t) = (prefix.col(b) - prefix.col(a)) / static_cast<double>(b - a);
  }
  return out;
}

class ToyEncoder : public Encoder {
 public:
  explicit ToyEncoder(const ToyEncoderOptions &o) : opt_(o) {
    if (o.layers < 2) throw ValidationError("toy encoder needs at least 2 layers");
    if (o.dim < 1) throw ValidationError("toy encoder dim must be positive");
    if (o.hop < 16) throw ValidationError("toy encoder hop must be >= 16");
    n_style_ = (2 * o.layers + 2) / 3;
    const auto centers = toy_band_centers();
    cos_.resize(kToyBands, o.hop);
    sin_.resize(kToyBands, o.hop);
    const double norm = o.hop / 4.0;  // unit tone at a centre -> magnitude ~1
    for (int k = 0; k < kToyBands; ++k) {
      for (int n = 0; n < o.hop; ++n) {
        const double win = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / o.hop);
        const double ph = 2.0 * std::numbers::pi * centers[static_cast<size_t>(k)] * n / kSampleRate;
        cos_(k, n) = win * std::cos(ph) / norm;
        sin_(k, n) = -win * std::sin(ph) / norm;
      }
    }
    const Rng root(o.seed);
    const int groups = kToyBands / kToyBandsPerGroup;
    for (int l = 0; l < o.layers; ++l) {
      Rng r = root.split(static_cast<uint64_t>(l));
      const int in = l < n_style_ ? groups : kToyBands;
      Eigen::MatrixXd w(o.dim, in);
      const double s = 1.0 / std::sqrt(static_cast<double>(in));
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = s * r.normal();
      proj_.push_back(std::move(w));
    }
  }

  LayeredRepresentation encode(const Waveform &w) const override {
    check_input(w, opt_.hop);
    const Eigen::Index T = static_cast<Eigen::Index>(w.size()) / opt_.hop;
    const Eigen::Map<const Eigen::MatrixXd> frames(w.samples.data(), opt_.hop, T);
    const Eigen::MatrixXd re = cos_ * frames;
    const Eigen::MatrixXd im = sin_ * frames;
    const Eigen::MatrixXd mag = (re.array().square() + im.array().square()).sqrt().matrix();

    const int groups = kToyBands / kToyBandsPerGroup;
    Eigen::MatrixXd energy(groups, T);
    for (int g = 0; g < groups; ++g)
      energy.row(g) = mag.middleRows(g * kToyBandsPerGroup, kToyBandsPerGroup)
                          .array().square().colwise().sum();
    constexpr double kFloor = 1e-6;
    Eigen::MatrixXd detail(kToyBands, T);
    for (int k = 0; k < kToyBands; ++k) {
      const int g = k / kToyBandsPerGroup;
      detail.row(k) = (mag.row(k).array() + kFloor).log() -
                      ((energy.row(g).array() / kToyBandsPerGroup).sqrt() + kFloor).log();
    }

    LayeredRepresentation rep;
    rep.frame_rate = frame_rate();
    rep.layers.reserve(static_cast<size_t>(opt_.layers));
    for (int l = 0; l < opt_.layers; ++l) {
      const auto &p = proj_[static_cast<size_t>(l)];
      if (l == 0) {
        rep.layers.push_back(p * (energy.array() / kToyBandsPerGroup).sqrt().matrix());
      } else if (l < n_style_) {
        const Eigen::MatrixXd env = smooth_time(energy, 2 * l);
        rep.layers.push_back(p * (env.array() + kFloor).log().matrix());
      } else {
        rep.layers.push_back(p * smooth_time(detail, l - n_style_));
      }
    }
    return rep;
  }

  int layer_count() const override { return opt_.layers; }
  int feature_dim() const override { return opt_.dim; }
  int hop() const override { return opt_.hop; }
  std::string descriptor() const override {
    return "toy:seed=" + std::to_string(opt_.seed) + ",layers=" +
           std::to_string(opt_.layers) + ",dim=" + std::to_string(opt_.dim) +
           ",hop=" + std::to_string(opt_.hop);
  }

 private:
  ToyEncoderOptions opt_;
  int n_style_ = 0;
  Eigen::MatrixXd cos_, sin_;
  std::vector<Eigen::MatrixXd> proj_;
};

// --- external process protocol ------------------------------------------

void put_u32(std::string &b, uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t get_u32(const std::string &b, size_t at) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<uint32_t>(static_cast<uint8_t>(b[at + i])) << (8 * i);
  return v;
}

struct RawRep {
  LayeredRepresentation rep;
  bool has_embedding = false;
};

// Runs `program` through /bin/sh, feeding `input` and collecting stdout.
std::string run_process(const std::string &program, const std::string &input) {
  int in_pipe[2], out_pipe[2];
  if (pipe(in_pipe) != 0) throw LoadError("pipe: " + std::string(std::strerror(errno)));
  if (pipe(out_pipe) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw LoadError("pipe: " + std::string(std::strerror(errno)));
  }
  posix_spawn_file_actions_t fa;
  posix_spawn_file_actions_init(&fa);
  posix_spawn_file_actions_adddup2(&fa, in_pipe[0], 0);
  posix_spawn_file_actions_adddup2(&fa, out_pipe[1], 1);
  posix_spawn_file_actions_addclose(&fa, in_pipe[1]);
  posix_spawn_file_actions_addclose(&fa, out_pipe[0]);
  std::string sh = "/bin/sh", dash_c = "-c", cmd = "exec " + program;
  char *argv[] = {sh.data(), dash_c.data(), cmd.data(), nullptr};
  pid_t pid;
  const int rc = posix_spawn(&pid, "/bin/sh", &fa, nullptr, argv, environ);
  posix_spawn_file_actions_destroy(&fa);
  close(in_pipe[0]);
  close(out_pipe[1]);
  if (rc != 0) {
    close(in_pipe[1]);
    close(out_pipe[0]);
    throw LoadError("cannot start encoder '" + program + "': " + std::strerror(rc));
  }

  // A child that exits early must surface as a load error, not SIGPIPE.
  sigset_t block, old;
  sigemptyset(&block);
  sigaddset(&block, SIGPIPE);
  pthread_sigmask(SIG_BLOCK, &block, &old);
  bool write_failed = false;
  for (size_t off = 0; off < input.size();) {
    const ssize_t n = write(in_pipe[1], input.data() + off, input.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      write_failed = true;
      break;
    }
    off += static_cast<size_t>(n);
  }
  close(in_pipe[1]);
  if (write_failed) {
    timespec zero{0, 0};
    sigtimedwait(&block, nullptr, &zero);
  }
  pthread_sigmask(SIG_SETMASK, &old, nullptr);

  std::string out;
  char buf[1 << 16];
  for (;;) {
    const ssize_t n = read(out_pipe[0], buf, sizeof buf);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    out.append(buf, static_cast<size_t>(n));
  }
  close(out_pipe[0]);
  int status = 0;
  while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {}
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
    throw LoadError("encoder '" + program + "' failed (status " +
                    std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1) + ")");
  if (write_failed) throw LoadError("encoder '" + program + "' closed its input early");
  return out;
}

RawRep invoke_external(const std::string &program, const Waveform &w) {
  std::string req = "SLDWAV1\n";
  put_u32(req, static_cast<uint32_t>(w.size()));
  put_u32(req, static_cast<uint32_t>(w.sample_rate));
  for (double v : w.samples) {
    const float f = static_cast<float>(v);
    char b[4];
    std::memcpy(b, &f, 4);
    req.append(b, 4);
  }
  const std::string out = run_process(program, req);
  if (out.size() < 24 || out.compare(0, 8, "SLDREP1\n") != 0)
    throw LoadError("encoder '" + program + "' returned a malformed reply");
  const uint32_t L = get_u32(out, 8), F = get_u32(out, 12), T = get_u32(out, 16);
  const uint32_t flags = get_u32(out, 20);
  const size_t count = static_cast<size_t>(L) * F * T;
  if (L == 0 || F == 0 || T == 0 || out.size() != 24 + 4 * count)
    throw LoadError("encoder '" + program + "' reply has inconsistent size");
  RawRep r;
  r.has_embedding = flags & 1;
  const char *p = out.data() + 24;
  for (uint32_t l = 0; l < L; ++l) {
    Eigen::MatrixXd m(F, T);
    for (uint32_t f = 0; f < F; ++f)
      for (uint32_t t = 0; t < T; ++t, p += 4) {
        float v;
        std::memcpy(&v, p, 4);
        m(f, t) = v;
      }
    r.rep.layers.push_back(std::move(m));
  }
  try {
    r.rep.validate();
  } catch (const ValidationError &e) {
    throw LoadError("encoder '" + program + "': " + e.what());
  }
  return r;
}

class ExternalEncoder : public Encoder {
 public:
  ExternalEncoder(std::string program, const ExternalEncoderOptions &o)
      : program_(std::move(program)), opt_(o) {
    Waveform probe;
    probe.samples.assign(kSampleRate, 0.0);
    const RawRep r = invoke_external(program_, probe);
    drop_first_ = r.has_embedding && !o.include_embedding_layer;
    layers_ = r.rep.layer_count() - (drop_first_ ? 1 : 0);
    dim_ = r.rep.feature_dim();
    const int T = r.rep.time_steps();
    hop_ = static_cast<int>(std::lround(static_cast<double>(kSampleRate) / T));
    if (layers_ < 2)
      throw LoadError("encoder '" + program_ + "' exposes fewer than 2 layers");
    if (o.view_spec) o.view_spec->validate(layers_);
  }

  LayeredRepresentation encode(const Waveform &w) const override {
    check_input(w, hop_);
    RawRep r = invoke_external(program_, w);
    if (drop_first_) r.rep.layers.erase(r.rep.layers.begin());
    if (r.rep.layer_count() != layers_ || r.rep.feature_dim() != dim_)
      throw LoadError("encoder '" + program_ + "' changed its output shape");
    r.rep.frame_rate = frame_rate();
    return std::move(r.rep);
  }

  int layer_count() const override { return layers_; }
  int feature_dim() const override { return dim_; }
  int hop() const override { return hop_; }
  std::string descriptor() const override {
    return "exec:" + program_ + (opt_.include_embedding_layer ? "#embedding" : "");
  }

 private:
  std::string program_;
  ExternalEncoderOptions opt_;
  bool drop_first_ = false;
  int layers_ = 0, dim_ = 0, hop_ = 0;
};

}  // namespace

EncoderHandle make_toy_encoder(const ToyEncoderOptions &options) {
  return std::make_shared<ToyEncoder>(options);
}

EncoderHandle external_encoder_adapter(const std::string &program,
                                       const ExternalEncoderOptions &options) {
  if (program.empty()) throw LoadError("empty encoder program");
  return std::make_shared<ExternalEncoder>(program, options);
}

EncoderHandle make_encoder(const std::string &descriptor,
                           const ExternalEncoderOptions &options) {
  if (descriptor.rfind("exec:", 0) == 0)
    return external_encoder_adapter(descriptor.substr(5), options);
  if (descriptor != "toy" && descriptor.rfind("toy:", 0) != 0)
    throw LoadError("unknown encoder descriptor '" + descriptor + "'");
  ToyEncoderOptions o;
  if (descriptor.size() > 4) {
    std::stringstream ss(descriptor.substr(4));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos)
        throw LoadError("bad toy encoder option '" + item + "'");
      const std::string key = item.substr(0, eq), val = item.substr(eq + 1);
      long long v;
      try {
        size_t used = 0;
        v = std::stoll(val, &used);
        if (used != val.size()) throw std::invalid_argument(val);
      } catch (const std::exception &) {
        throw LoadError("bad toy encoder value '" + item + "'");
      }
      if (key == "seed") o.seed = static_cast<uint64_t>(v);
      else if (key == "layers") o.layers = static_cast<int>(v);
      else if (key == "dim") o.dim = static_cast<int>(v);
      else if (key == "hop") o.hop = static_cast<int>(v);
      else throw LoadError("unknown toy encoder option '" + key + "'");
    }
  }
  auto enc = make_toy_encoder(o);
  if (options.view_spec) options.view_spec->validate(enc->layer_count());
  return enc;
}

}  // namespace sld
