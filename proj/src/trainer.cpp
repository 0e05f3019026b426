// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

#include "facevc/trainer.hpp"

#include <cmath>
#include <numbers>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "facevc/io.hpp"
#include "facevc/kv.hpp"

namespace facevc {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kShuffleStream = 11;
constexpr std::uint64_t kCropStream = 12;
constexpr std::uint64_t kNoiseStream = 13;

constexpr char kCheckpointMagic[4] = {'C', 'V', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
constexpr const char* precision_name() {
  return std::is_same_v<T, float> ? "float" : "double";
}

std::string kv_text(const std::map<std::string, std::string>& kv) {
  std::string s;
  for (const auto& [k, v] : kv) s += k + "=" + v + "\n";
  return s;
}

std::map<std::string, std::string> parse_kv_text(std::string_view text, const std::string& what) {
  std::map<std::string, std::string> kv;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(what + ": malformed line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

void put_u32(std::string& out, std::uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::string& out, std::uint64_t v) { out.append(reinterpret_cast<const char*>(&v), 8); }

}  // namespace

// ---------------------------------------------------------------------------
// Config

void TrainConfig::validate() const {
  std::vector<std::string> problems;
  if (batch_size < 2) problems.push_back("train.batch_size must be >= 2");
  if (steps < 1) problems.push_back("train.steps must be >= 1");
  if (!(learning_rate > 0)) problems.push_back("train.learning_rate must be > 0");
  if (!(lambda >= 0)) problems.push_back("train.lambda must be >= 0");
  if (precision != "float" && precision != "double") problems.push_back("train.precision must be float or double");
  if (crop_frames == 0) problems.push_back("train.crop_frames must be >= 1");
  if (!problems.empty()) {
    std::string msg = "invalid training configuration:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
}

std::map<std::string, std::string> TrainConfig::to_map() const {
  return {
      {"train.batch_size", std::to_string(batch_size)},
      {"train.steps", std::to_string(steps)},
      {"train.learning_rate", format_double(learning_rate)},
      {"train.lr_decay_steps", std::to_string(lr_decay_steps)},
      {"train.lambda", format_double(lambda)},
      {"train.seed", std::to_string(seed)},
      {"train.kl_warmup_steps", std::to_string(kl_warmup_steps)},
      {"train.checkpoint_every", std::to_string(checkpoint_every)},
      {"train.precision", precision},
      {"train.crop_frames", std::to_string(crop_frames)},
      {"train.independent_pairing", independent_pairing ? "1" : "0"},
      {"train.mean_propagation", mean_propagation ? "1" : "0"},
      {"train.alternate", alternate ? "1" : "0"},
  };
}

TrainConfig TrainConfig::from_map(const std::map<std::string, std::string>& kv) {
  TrainConfig c;
  for (const auto& [k, v] : kv) {
    if (k == "train.batch_size") c.batch_size = parse_size(k, v);
    else if (k == "train.steps") c.steps = parse_size(k, v);
    else if (k == "train.learning_rate") c.learning_rate = parse_double(k, v);
    else if (k == "train.lr_decay_steps") c.lr_decay_steps = parse_size(k, v);
    else if (k == "train.lambda") c.lambda = parse_double(k, v);
    else if (k == "train.seed") c.seed = parse_u64(k, v);
    else if (k == "train.kl_warmup_steps") c.kl_warmup_steps = parse_size(k, v);
    else if (k == "train.checkpoint_every") c.checkpoint_every = parse_size(k, v);
    else if (k == "train.precision") c.precision = v;
    else if (k == "train.crop_frames") c.crop_frames = parse_size(k, v);
    else if (k == "train.independent_pairing") c.independent_pairing = parse_bool(k, v);
    else if (k == "train.mean_propagation") c.mean_propagation = parse_bool(k, v);
    else if (k == "train.alternate") c.alternate = parse_bool(k, v);
    else throw ConfigError("unknown training key: " + k);
  }
  return c;
}

double kl_weight_at(const TrainConfig& config, std::size_t step) {
  if (config.kl_warmup_steps == 0) return 1.0;
  return std::min(1.0, static_cast<double>(step + 1) / static_cast<double>(config.kl_warmup_steps));
}

double learning_rate_at(const TrainConfig& config, std::size_t step) {
  if (config.lr_decay_steps == 0) return config.learning_rate;
  const double progress = std::min(1.0, static_cast<double>(step) / static_cast<double>(config.lr_decay_steps));
  const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  return config.learning_rate * (kLrFloorFraction + (1.0 - kLrFloorFraction) * cosine);
}

// ---------------------------------------------------------------------------
// Optimizer step

template <typename T>
AdamState<T> AdamState<T>::zeros(ModelParams<T>& params) {
  AdamState<T> s;
  for (Parameter<T>* p : params.parameters()) {
    s.m.emplace_back(p->value.shape(), T(0));
    s.v.emplace_back(p->value.shape(), T(0));
  }
  return s;
}

template <typename T>
LossBreakdown train_step(ModelParams<T>& params, const Batch<T>& batch, AdamState<T>& adam, Rng& rng,
                         const TrainConfig& config, std::size_t step) {
  std::vector<Parameter<T>*> ps = params.parameters();
  if (adam.m.size() != ps.size() || adam.v.size() != ps.size()) {
    throw ConfigError("optimizer state does not match the parameter set");
  }

  std::vector<char> update(ps.size(), 1);
  if (config.alternate) {
    std::set<const Parameter<T>*> voice;
    params.voice_encoder.visit([&](Parameter<T>& p) { voice.insert(&p); });
    const bool voice_phase = step % 2 == 1;
    for (std::size_t i = 0; i < ps.size(); ++i) update[i] = (voice.count(ps[i]) != 0) == voice_phase;
  }
  for (std::size_t i = 0; i < ps.size(); ++i) {
    ps[i]->requires_grad = update[i] != 0;
    ps[i]->zero_grad();
  }
  struct Restore {
    std::vector<Parameter<T>*>& ps;
    ~Restore() {
      for (Parameter<T>* p : ps) p->requires_grad = true;
    }
  } restore{ps};

  ObjectiveOptions options;
  options.lambda = config.lambda;
  options.kl_weight = kl_weight_at(config, step);
  options.independent_pairing = config.independent_pairing;
  options.mean_propagation = config.mean_propagation;

  Graph<T> g;
  ObjectiveTerms<T> terms = build_objective(g, params, batch, rng, options, true);
  const LossBreakdown& b = terms.breakdown;
  if (!b.finite() || !std::isfinite(static_cast<double>(terms.objective.value()[0]))) {
    throw DivergenceError("step " + std::to_string(step + 1) + ": non-finite objective (" + b.describe() + ")");
  }
  g.backward(scale(terms.objective, T(-1)));
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (update[i] && !ps[i]->grad.all_finite()) {
      throw DivergenceError("step " + std::to_string(step + 1) + ": non-finite gradient for " + ps[i]->name +
                            " (" + b.describe() + ")");
    }
  }

  adam.t += 1;
  const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(adam.t));
  const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(adam.t));
  const T b1 = static_cast<T>(kAdamBeta1), b2 = static_cast<T>(kAdamBeta2);
  const T step_size = static_cast<T>(learning_rate_at(config, step) / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);
  const T eps = static_cast<T>(kAdamEpsilon);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (!update[i]) continue;
    T* w = ps[i]->value.data();
    const T* gr = ps[i]->grad.data();
    T* m = adam.m[i].data();
    T* v = adam.v[i].data();
    for (std::size_t k = 0; k < ps[i]->value.size(); ++k) {
      m[k] = b1 * m[k] + (T(1) - b1) * gr[k];
      v[k] = b2 * v[k] + (T(1) - b2) * gr[k] * gr[k];
      w[k] -= step_size * m[k] / (std::sqrt(v[k] * inv_c2) + eps);
    }
  }
  return b;
}

// ---------------------------------------------------------------------------
// Batches

BatchSampler::BatchSampler(const std::vector<PairedExample>& pairs, std::uint64_t seed, std::size_t batch_size,
                           std::size_t crop_frames)
    : pairs_(&pairs), seed_(seed), batch_size_(batch_size), crop_(crop_frames) {
  if (pairs.empty()) throw DegenerateError("training set is empty");
  if (batch_size == 0 || crop_frames == 0) throw ConfigError("batch size and crop length must be positive");
  std::vector<std::vector<std::size_t>> by_group(kGroupCount);
  for (std::size_t i = 0; i < pairs.size(); ++i) by_group[static_cast<std::size_t>(pairs[i].attrs.group())].push_back(i);
  for (auto& g : by_group) {
    if (!g.empty()) groups_.push_back(std::move(g));
  }
}

const std::vector<std::size_t>& BatchSampler::permutation(std::size_t group, std::size_t epoch) const {
  const auto key = std::make_pair(group, epoch);
  auto it = perms_.find(key);
  if (it != perms_.end()) return it->second;
  if (perms_.size() > 4 * groups_.size()) perms_.erase(perms_.begin());
  std::vector<std::size_t> perm = groups_[group];
  Rng rng(mix_seed(mix_seed(mix_seed(seed_, kShuffleStream), group), epoch));
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  return perms_.emplace(key, std::move(perm)).first->second;
}

std::vector<std::size_t> BatchSampler::indices(std::size_t step) const {
  const std::size_t n_groups = groups_.size();
  std::vector<std::size_t> out(batch_size_);
  for (std::size_t k = 0; k < batch_size_; ++k) {
    const std::size_t pos = step * batch_size_ + k;
    const std::size_t group = pos % n_groups;
    const std::size_t draw = pos / n_groups;
    const std::size_t n = groups_[group].size();
    out[k] = permutation(group, draw / n)[draw % n];
  }
  return out;
}

template <typename T>
Batch<T> BatchSampler::batch(std::size_t step) const {
  const std::vector<std::size_t> idx = indices(step);
  const PairedExample& first = (*pairs_)[idx[0]];
  const std::size_t d = first.x.dim(0);
  const Shape image_shape = first.y.shape();
  const std::size_t image_size = first.y.size();
  Shape bshape{batch_size_};
  bshape.insert(bshape.end(), image_shape.begin(), image_shape.end());

  Batch<T> b{Tensor<T>({batch_size_, 1, d, crop_}), Tensor<T>(bshape)};
  Rng rng(mix_seed(mix_seed(seed_, kCropStream), step));
  for (std::size_t k = 0; k < batch_size_; ++k) {
    const PairedExample& p = (*pairs_)[idx[k]];
    if (p.x.dim(0) != d || p.y.shape() != image_shape) {
      throw DimensionError("pair " + p.pair_id + " is not shape-consistent with pair " + first.pair_id);
    }
    const std::size_t n = p.x.dim(1);
    const std::size_t offset = n > crop_ ? rng.below(n - crop_ + 1) : 0;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t t = 0; t < crop_; ++t) {
        const std::size_t src = std::min(offset + t, n - 1);
        b.features[(k * d + i) * crop_ + t] = static_cast<T>(p.x.at(i, src));
      }
    }
    for (std::size_t j = 0; j < image_size; ++j) b.images[k * image_size + j] = static_cast<T>(p.y[j]);
  }
  return b;
}

// ---------------------------------------------------------------------------
// Loop

template <typename T>
TrainState<T> init_train_state(const ArchConfig& arch, const TrainConfig& config, const NormStats& norm) {
  config.validate();
  if (config.precision != precision_name<T>()) {
    throw ConfigError("train.precision is " + config.precision + " but the run uses " + precision_name<T>());
  }
  TrainState<T> s{arch, config, norm, init_params<T>(arch, config.seed), {}, Rng(mix_seed(config.seed, kNoiseStream)), 0};
  s.adam = AdamState<T>::zeros(s.params);
  return s;
}

std::string metrics_row(std::size_t step, const LossBreakdown& b) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", step, b.speech_recon, b.face_recon,
                b.kl_z, b.kl_c, b.regularizer_r, b.total);
  return buf;
}

namespace {

// Rewrites metrics.csv keeping the header and rows of steps <= keep.
void reset_metrics(const std::string& path, std::size_t keep) {
  std::string out = std::string(kMetricsHeader) + "\n";
  if (keep > 0 && fs::exists(path)) {
    std::istringstream in(read_file(path));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      const auto comma = line.find(',');
      if (comma == std::string::npos) continue;
      if (parse_size("metrics step", line.substr(0, comma)) <= keep) out += line + "\n";
    }
  }
  write_file_atomic(path, out);
}

}  // namespace

template <typename T>
std::vector<LossBreakdown> train(TrainState<T>& state, const std::vector<PairedExample>& pairs, std::size_t until,
                                 const TrainRun& run) {
  state.config.validate();
  const BatchSampler sampler(pairs, state.config.seed, state.config.batch_size, state.config.crop_frames);
  if (pairs.front().x.dim(0) != state.arch.feature_dim) {
    throw DimensionError("features have " + std::to_string(pairs.front().x.dim(0)) +
                         " dimensions, architecture expects " + std::to_string(state.arch.feature_dim));
  }

  std::ofstream metrics;
  std::string ckpt_path;
  if (!run.out_dir.empty()) {
    fs::create_directories(run.out_dir);
    const std::string metrics_path = (fs::path(run.out_dir) / "metrics.csv").string();
    ckpt_path = (fs::path(run.out_dir) / "checkpoint.cvck").string();
    reset_metrics(metrics_path, state.step);
    metrics.open(metrics_path, std::ios::app);
    if (!metrics) throw Error("cannot append to " + metrics_path);
  }

  std::vector<LossBreakdown> history;
  while (state.step < until) {
    const Batch<T> batch = sampler.batch<T>(state.step);
    const LossBreakdown b = train_step(state.params, batch, state.adam, state.rng, state.config, state.step);
    state.step += 1;
    history.push_back(b);
    if (metrics.is_open()) metrics << metrics_row(state.step, b) << "\n" << std::flush;
    if (run.on_step) run.on_step(state.step, b);
    if (run.log && run.log_every > 0 && (state.step % run.log_every == 0 || state.step == until)) {
      *run.log << "step " << state.step << "/" << until << " " << b.describe() << "\n" << std::flush;
    }
    const bool periodic = state.config.checkpoint_every > 0 && state.step % state.config.checkpoint_every == 0;
    if (!ckpt_path.empty() && (periodic || state.step == until)) save_checkpoint(ckpt_path, state);
  }
  return history;
}

// ---------------------------------------------------------------------------
// Checkpoints

template <typename T>
std::string encode_checkpoint(TrainState<T>& s) {
  constexpr DType dtype = std::is_same_v<T, float> ? DType::f32 : DType::f64;
  std::vector<std::pair<std::string, std::string>> sections;
  sections.emplace_back("dtype", precision_name<T>());
  sections.emplace_back("arch", kv_text(s.arch.to_map()));
  sections.emplace_back("train_config", kv_text(s.config.to_map()));
  sections.emplace_back("step", std::to_string(s.step));
  sections.emplace_back("rng", s.rng.state());
  if (!s.norm.empty()) {
    const std::size_t d = s.norm.mean.size();
    sections.emplace_back("norm/mean", encode_tensor(Tensor<double>({d}, s.norm.mean), DType::f64));
    sections.emplace_back("norm/std", encode_tensor(Tensor<double>({d}, s.norm.std), DType::f64));
  }
  const std::vector<Parameter<T>*> ps = s.params.parameters();
  for (const Parameter<T>* p : ps) {
    sections.emplace_back("param/" + p->name, encode_tensor(p->value.template cast<double>(), dtype));
  }
  for (std::size_t i = 0; i < ps.size(); ++i) {
    sections.emplace_back("adam_m/" + ps[i]->name, encode_tensor(s.adam.m[i].template cast<double>(), dtype));
    sections.emplace_back("adam_v/" + ps[i]->name, encode_tensor(s.adam.v[i].template cast<double>(), dtype));
  }
  sections.emplace_back("adam_t", std::to_string(s.adam.t));
  s.params.visit_stats([&](const std::string& name, RunningStats<T>& st) {
    sections.emplace_back("bn_mean/" + name, encode_tensor(st.mean.template cast<double>(), dtype));
    sections.emplace_back("bn_var/" + name, encode_tensor(st.var.template cast<double>(), dtype));
  });

  std::string out(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(sections.size()));
  for (const auto& [name, payload] : sections) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u64(out, payload.size());
    out += payload;
  }
  return out;
}

template <typename T>
void save_checkpoint(const std::string& path, TrainState<T>& state) {
  write_file_atomic(path, encode_checkpoint(state));
}

namespace {

std::map<std::string, std::string_view> read_sections(std::string_view bytes, const std::string& what) {
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (bytes.size() - pos < n) throw FormatError(what + ": corrupt checkpoint, truncated at byte " + std::to_string(pos));
  };
  auto u32 = [&]() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, bytes.data() + pos, 4);
    pos += 4;
    return v;
  };
  auto u64 = [&]() {
    need(8);
    std::uint64_t v;
    std::memcpy(&v, bytes.data() + pos, 8);
    pos += 8;
    return v;
  };
  need(4);
  if (bytes.substr(0, 4) != std::string_view(kCheckpointMagic, 4)) {
    throw FormatError(what + ": corrupt checkpoint, bad magic (expected CVCK)");
  }
  pos = 4;
  const std::uint32_t version = u32();
  if (version != kCheckpointVersion) {
    throw FormatError(what + ": unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = u32();
  std::map<std::string, std::string_view> sections;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = u32();
    need(name_len);
    std::string name(bytes.substr(pos, name_len));
    pos += name_len;
    const std::uint64_t len = u64();
    need(len);
    if (!sections.emplace(name, bytes.substr(pos, len)).second) {
      throw FormatError(what + ": duplicate checkpoint section " + name);
    }
    pos += len;
  }
  if (pos != bytes.size()) throw FormatError(what + ": trailing bytes after the last checkpoint section");
  return sections;
}

std::string_view section(const std::map<std::string, std::string_view>& s, const std::string& name,
                         const std::string& what) {
  auto it = s.find(name);
  if (it == s.end()) throw FormatError(what + ": checkpoint lacks section " + name);
  return it->second;
}

template <typename T>
Tensor<T> tensor_section(const std::map<std::string, std::string_view>& s, const std::string& name,
                         const Shape& expected, const std::string& what) {
  Tensor<double> t = decode_tensor(section(s, name, what), what + " [" + name + "]");
  if (t.shape() != expected) {
    throw FormatError(what + ": section " + name + " has shape " + shape_string(t.shape()) + ", expected " +
                      shape_string(expected));
  }
  return t.template cast<T>();
}

}  // namespace

template <typename T>
TrainState<T> decode_checkpoint(std::string_view bytes, const std::string& what, const ArchConfig* expected_arch) {
  const auto s = read_sections(bytes, what);
  const std::string dtype(section(s, "dtype", what));
  if (dtype != precision_name<T>()) {
    throw ConfigError(what + ": checkpoint precision is " + dtype + ", run precision is " + precision_name<T>());
  }
  TrainState<T> st;
  st.arch = ArchConfig::from_map(parse_kv_text(section(s, "arch", what), what));
  st.arch.validate();
  if (expected_arch && !(*expected_arch == st.arch)) {
    throw ConfigError(what + ": checkpoint architecture differs from the configured architecture");
  }
  st.config = TrainConfig::from_map(parse_kv_text(section(s, "train_config", what), what));
  try {
    st.step = parse_size("step", std::string(section(s, "step", what)));
    st.adam.t = parse_u64("adam_t", std::string(section(s, "adam_t", what)));
  } catch (const ConfigError& e) {
    throw FormatError(what + ": " + e.what());
  }
  st.rng.set_state(std::string(section(s, "rng", what)));
  if (s.count("norm/mean")) {
    st.norm.mean = decode_tensor(section(s, "norm/mean", what), what).storage();
    st.norm.std = decode_tensor(section(s, "norm/std", what), what).storage();
  }

  st.params = init_params<T>(st.arch, 0);
  std::size_t expected_sections = 6 + (st.norm.empty() ? 0 : 2);
  for (Parameter<T>* p : st.params.parameters()) {
    p->value = tensor_section<T>(s, "param/" + p->name, p->value.shape(), what);
    st.adam.m.push_back(tensor_section<T>(s, "adam_m/" + p->name, p->value.shape(), what));
    st.adam.v.push_back(tensor_section<T>(s, "adam_v/" + p->name, p->value.shape(), what));
    expected_sections += 3;
  }
  st.params.visit_stats([&](const std::string& name, RunningStats<T>& rs) {
    rs.mean = tensor_section<T>(s, "bn_mean/" + name, rs.mean.shape(), what);
    rs.var = tensor_section<T>(s, "bn_var/" + name, rs.var.shape(), what);
    expected_sections += 2;
  });
  if (s.size() != expected_sections) {
    throw FormatError(what + ": checkpoint has " + std::to_string(s.size()) + " sections, expected " +
                      std::to_string(expected_sections));
  }
  return st;
}

template <typename T>
TrainState<T> load_checkpoint(const std::string& path, const ArchConfig* expected_arch) {
  return decode_checkpoint<T>(read_file(path), path, expected_arch);
}

std::string checkpoint_precision(const std::string& path) {
  const std::string bytes = read_file(path);
  const std::string dtype(section(read_sections(bytes, path), "dtype", path));
  if (dtype != "float" && dtype != "double") throw FormatError(path + ": unknown checkpoint precision " + dtype);
  return dtype;
}

#define FACEVC_INSTANTIATE_TRAINER(T)                                                                       \
  template struct AdamState<T>;                                                                             \
  template LossBreakdown train_step(ModelParams<T>&, const Batch<T>&, AdamState<T>&, Rng&,                  \
                                    const TrainConfig&, std::size_t);                                       \
  template Batch<T> BatchSampler::batch<T>(std::size_t) const;                                             \
  template TrainState<T> init_train_state(const ArchConfig&, const TrainConfig&, const NormStats&);         \
  template std::vector<LossBreakdown> train(TrainState<T>&, const std::vector<PairedExample>&, std::size_t, \
                                            const TrainRun&);                                               \
  template std::string encode_checkpoint(TrainState<T>&);                                                   \
  template void save_checkpoint(const std::string&, TrainState<T>&);                                        \
  template TrainState<T> decode_checkpoint(std::string_view, const std::string&, const ArchConfig*);        \
  template TrainState<T> load_checkpoint(const std::string&, const ArchConfig*);

FACEVC_INSTANTIATE_TRAINER(float)
FACEVC_INSTANTIATE_TRAINER(double)

}  // namespace facevc
