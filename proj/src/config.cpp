// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

#include "facevc/config.hpp"

#include <sstream>

#include "facevc/io.hpp"

namespace facevc {

KeyValues RunConfig::to_map() const {
  KeyValues kv = train.to_map();
  kv.merge(arch.to_map());
  kv.merge(gen.to_map());
  kv["path.data"] = data_path;
  kv["path.out"] = out_dir;
  return kv;
}

RunConfig RunConfig::from_map(const KeyValues& kv) {
  RunConfig c;
  KeyValues train_kv, arch_kv, gen_kv;
  for (const auto& [k, v] : kv) {
    if (k.rfind("train.", 0) == 0) train_kv.emplace(k, v);
    else if (k.rfind("arch.", 0) == 0) arch_kv.emplace(k, v);
    else if (k.rfind("gen.", 0) == 0) gen_kv.emplace(k, v);
    else if (k == "path.data") c.data_path = v;
    else if (k == "path.out") c.out_dir = v;
    else throw ConfigError("unknown configuration key: " + k);
  }
  c.train = TrainConfig::from_map(train_kv);
  c.arch = ArchConfig::from_map(arch_kv);
  c.gen = GenParams::from_map(gen_kv);
  return c;
}

std::string RunConfig::serialize() const {
  std::string out;
  for (const auto& [k, v] : to_map()) out += k + " = " + v + "\n";
  return out;
}

KeyValues parse_key_values(const std::string& text, const std::string& source) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    const std::string where = source + ":" + std::to_string(n);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (!kv.emplace(key, trim(t.substr(eq + 1))).second) throw ConfigError(where + ": repeated key " + key);
  }
  return kv;
}

RunConfig RunConfig::parse(const std::string& text, const std::string& source) {
  const KeyValues kv = parse_key_values(text, source);
  try {
    return from_map(kv);
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
}

RunConfig RunConfig::load(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const FormatError&) {
    throw ConfigError("cannot read configuration file " + path);
  }
  return parse(text, path);
}

const std::vector<KeyDoc>& config_key_docs() {
  static const std::vector<KeyDoc> docs = {
      {"train.batch_size", "pairs per mini-batch (>= 2)"},
      {"train.steps", "optimizer steps"},
      {"train.learning_rate", "peak Adam step size"},
      {"train.lr_decay_steps", "steps of cosine step-size decay to 5% of the peak; 0 keeps it constant"},
      {"train.lambda", "weight of the regularizer R in J + lambda R"},
      {"train.seed", "seed of initialization, batch order, crops and model noise"},
      {"train.kl_warmup_steps", "steps of linear KL warm-up; 0 disables it"},
      {"train.checkpoint_every", "steps between checkpoints; 0 saves only at the end"},
      {"train.precision", "float or double"},
      {"train.crop_frames", "frames per training crop"},
      {"train.independent_pairing", "draw R from independently shuffled pairs (0/1)"},
      {"train.mean_propagation", "feed the decoder mean instead of a sample to R (0/1)"},
      {"train.alternate", "alternate voice-encoder-only and voice-encoder-frozen steps (0/1)"},
      {"arch.feature_dim", "acoustic feature dimension D"},
      {"arch.latent_channels", "channels D' of the latent sequence z"},
      {"arch.code_dim", "dimension Dc of the latent code c"},
      {"arch.image_size", "face image side I = J"},
      {"arch.image_channels", "face image channels"},
      {"arch.utterance_channels", "GLU block channels of the utterance encoder (decoder mirrors)"},
      {"arch.utterance_kernels", "kernels HxW of the utterance encoder blocks"},
      {"arch.utterance_strides", "strides HxW of the utterance encoder blocks"},
      {"arch.voice_channels", "GLU block channels of the voice encoder"},
      {"arch.voice_kernels", "kernels HxW of the voice encoder blocks"},
      {"arch.voice_strides", "strides HxW of the voice encoder blocks"},
      {"arch.face_channels", "conv block channels of the face encoder (decoder mirrors)"},
      {"arch.face_kernel", "square kernel of the face networks (stride 2)"},
      {"arch.fixed_decoder_variance", "fix both decoder variances to one (0/1)"},
      {"gen.world_seed", "seed of the content mixing matrix shared by all corpora"},
      {"gen.feature_dim", "generated feature dimension (>= 24)"},
      {"gen.min_frames", "shortest generated sequence"},
      {"gen.max_frames", "longest generated sequence"},
      {"gen.attribute_offset", "magnitude of the gender and age feature offsets"},
      {"gen.content_rank", "sinusoids in the content trajectory"},
      {"gen.period_min", "shortest content period in frames"},
      {"gen.period_max", "longest content period in frames"},
      {"gen.content_std", "per-dimension std of the content trajectory"},
      {"gen.image_size", "generated image side"},
      {"gen.brightness_male", "radial gradient peak for male faces"},
      {"gen.brightness_female", "radial gradient peak for female faces"},
      {"gen.stripe_freq_young", "stripe cycles per image for young faces"},
      {"gen.stripe_freq_aged", "stripe cycles per image for aged faces"},
      {"gen.stripe_amplitude", "stripe amplitude"},
      {"gen.center_jitter", "max gradient center offset in pixels"},
      {"gen.image_noise", "pixel noise std"},
      {"path.data", "training manifest (overridden by --data)"},
      {"path.out", "output directory (overridden by --out)"},
  };
  return docs;
}

std::string documented_defaults() {
  const KeyValues kv = RunConfig{}.to_map();
  std::string out;
  for (const auto& d : config_key_docs()) {
    out += "# " + d.doc + "\n" + d.key + " = " + kv.at(d.key) + "\n";
  }
  return out;
}

}  // namespace facevc
