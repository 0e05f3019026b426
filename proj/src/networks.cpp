// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

#include "facevc/networks.hpp"

#include <algorithm>
#include <sstream>

#include "facevc/kv.hpp"

namespace facevc {

namespace {

std::size_t product(const std::vector<Kernel2>& strides, bool width) {
  std::size_t p = 1;
  for (const Kernel2& s : strides) p *= width ? s.w : s.h;
  return p;
}

std::string join_kernels(const std::vector<Kernel2>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    s += (i ? "," : "") + std::to_string(v[i].h) + "x" + std::to_string(v[i].w);
  }
  return s;
}

std::vector<Kernel2> parse_kernels(const std::string& key, const std::string& text) {
  std::vector<Kernel2> out;
  for (const std::string& item : split(text, ',')) {
    const auto parts = split(item, 'x');
    if (parts.size() != 2) throw ConfigError("key " + key + ": expected HxW items, got '" + item + "'");
    out.push_back({parse_size(key, parts[0]), parse_size(key, parts[1])});
  }
  return out;
}

void check_stack(const std::string& what, const std::vector<std::size_t>& channels,
                 const std::vector<Kernel2>& kernels, const std::vector<Kernel2>& strides,
                 std::vector<std::string>& problems) {
  if (channels.empty()) problems.push_back(what + ": no blocks");
  if (channels.size() != kernels.size() || channels.size() != strides.size()) {
    problems.push_back(what + ": " + std::to_string(channels.size()) + " channel counts, " +
                       std::to_string(kernels.size()) + " kernels, " +
                       std::to_string(strides.size()) + " strides");
    return;
  }
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (channels[i] == 0) problems.push_back(what + " block " + std::to_string(i) + ": zero channels");
    try {
      matched_padding(kernels[i].h, strides[i].h);
      matched_padding(kernels[i].w, strides[i].w);
    } catch (const ConfigError& e) {
      problems.push_back(what + " block " + std::to_string(i) + ": " + e.what());
    }
  }
}

ConvSpec stack_spec(std::size_t in, std::size_t out, const Kernel2& k, const Kernel2& s,
                    bool transposed) {
  ConvSpec spec;
  spec.in_channels = in;
  spec.out_channels = out;
  spec.kernel_h = k.h;
  spec.kernel_w = k.w;
  spec.geom = {s.h, s.w, matched_padding(k.h, s.h), matched_padding(k.w, s.w)};
  spec.transposed = transposed;
  return spec;
}

template <typename T>
GaussianValue<T> values_of(const DiagGaussian<T>& q, const Shape& shape) {
  return {q.mean().value().reshaped(shape), q.var().value().reshaped(shape)};
}

}  // namespace

// ---------------------------------------------------------------------------
// ArchConfig

std::size_t ArchConfig::time_downsample() const { return product(utterance_strides, true); }
std::size_t ArchConfig::voice_time_downsample() const { return product(voice_strides, true); }
std::size_t ArchConfig::utterance_feature_extent() const {
  return feature_dim / product(utterance_strides, false);
}
std::size_t ArchConfig::voice_feature_extent() const {
  return feature_dim / product(voice_strides, false);
}
std::size_t ArchConfig::face_grid() const {
  return image_size >> face_channels.size();
}

void ArchConfig::validate() const {
  std::vector<std::string> problems;
  if (feature_dim == 0) problems.push_back("feature_dim must be positive");
  if (latent_channels == 0) problems.push_back("latent_channels must be positive");
  if (code_dim == 0) problems.push_back("code_dim must be positive");
  if (image_channels == 0) problems.push_back("image_channels must be positive");
  check_stack("utterance", utterance_channels, utterance_kernels, utterance_strides, problems);
  check_stack("voice", voice_channels, voice_kernels, voice_strides, problems);
  if (problems.empty()) {
    const std::size_t fu = product(utterance_strides, false), fv = product(voice_strides, false);
    if (feature_dim % fu != 0) {
      problems.push_back("feature_dim " + std::to_string(feature_dim) +
                         " not divisible by utterance frequency stride " + std::to_string(fu));
    }
    if (feature_dim % fv != 0) {
      problems.push_back("feature_dim " + std::to_string(feature_dim) +
                         " not divisible by voice frequency stride " + std::to_string(fv));
    }
  }
  if (face_channels.empty()) problems.push_back("face: no blocks");
  if (face_kernel < 2 || face_kernel % 2 != 0) {
    problems.push_back("face_kernel " + std::to_string(face_kernel) + " must be even and >= 2");
  }
  if (!face_channels.empty() &&
      (face_channels.size() >= 32 || image_size % (std::size_t{1} << face_channels.size()) != 0 ||
       image_size >> face_channels.size() == 0)) {
    problems.push_back("image_size " + std::to_string(image_size) + " not divisible by 2^" +
                       std::to_string(face_channels.size()));
  }
  if (!problems.empty()) {
    std::string msg = "inconsistent architecture:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
}

std::map<std::string, std::string> ArchConfig::to_map() const {
  return {
      {"arch.feature_dim", std::to_string(feature_dim)},
      {"arch.latent_channels", std::to_string(latent_channels)},
      {"arch.code_dim", std::to_string(code_dim)},
      {"arch.image_size", std::to_string(image_size)},
      {"arch.image_channels", std::to_string(image_channels)},
      {"arch.utterance_channels", join_sizes(utterance_channels)},
      {"arch.utterance_kernels", join_kernels(utterance_kernels)},
      {"arch.utterance_strides", join_kernels(utterance_strides)},
      {"arch.voice_channels", join_sizes(voice_channels)},
      {"arch.voice_kernels", join_kernels(voice_kernels)},
      {"arch.voice_strides", join_kernels(voice_strides)},
      {"arch.face_channels", join_sizes(face_channels)},
      {"arch.face_kernel", std::to_string(face_kernel)},
      {"arch.fixed_decoder_variance", fixed_decoder_variance ? "1" : "0"},
  };
}

ArchConfig ArchConfig::from_map(const std::map<std::string, std::string>& kv) {
  ArchConfig a;
  for (const auto& [key, value] : kv) {
    if (key == "arch.feature_dim") a.feature_dim = parse_size(key, value);
    else if (key == "arch.latent_channels") a.latent_channels = parse_size(key, value);
    else if (key == "arch.code_dim") a.code_dim = parse_size(key, value);
    else if (key == "arch.image_size") a.image_size = parse_size(key, value);
    else if (key == "arch.image_channels") a.image_channels = parse_size(key, value);
    else if (key == "arch.utterance_channels") a.utterance_channels = parse_sizes(key, value);
    else if (key == "arch.utterance_kernels") a.utterance_kernels = parse_kernels(key, value);
    else if (key == "arch.utterance_strides") a.utterance_strides = parse_kernels(key, value);
    else if (key == "arch.voice_channels") a.voice_channels = parse_sizes(key, value);
    else if (key == "arch.voice_kernels") a.voice_kernels = parse_kernels(key, value);
    else if (key == "arch.voice_strides") a.voice_strides = parse_kernels(key, value);
    else if (key == "arch.face_channels") a.face_channels = parse_sizes(key, value);
    else if (key == "arch.face_kernel") a.face_kernel = parse_size(key, value);
    else if (key == "arch.fixed_decoder_variance") a.fixed_decoder_variance = parse_size(key, value) != 0;
    else throw ConfigError("unknown architecture key: " + key);
  }
  return a;
}

ArchConfig ArchConfig::tiny() {
  ArchConfig a;
  a.feature_dim = 8;
  a.latent_channels = 2;
  a.code_dim = 3;
  a.image_size = 8;
  a.utterance_channels = {2, 3};
  a.utterance_kernels = {{3, 3}, {4, 4}};
  a.utterance_strides = {{1, 1}, {2, 2}};
  a.voice_channels = {2, 3};
  a.voice_kernels = {{3, 3}, {4, 8}};
  a.voice_strides = {{1, 1}, {2, 4}};
  a.face_channels = {2, 3};
  return a;
}

// ---------------------------------------------------------------------------
// Networks

template <typename T>
SequenceEncoder<T>::SequenceEncoder(const std::string& name, const ArchConfig& arch,
                                    const std::vector<std::size_t>& channels,
                                    const std::vector<Kernel2>& kernels,
                                    const std::vector<Kernel2>& strides, std::size_t out_channels,
                                    Rng& rng)
    : feature_dim_(arch.feature_dim), time_downsample_(product(strides, true)), name_(name) {
  std::size_t in = 1;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    blocks_.emplace_back(name + ".block" + std::to_string(i),
                         stack_spec(in, channels[i], kernels[i], strides[i], false), rng);
    in = channels[i];
  }
  ConvSpec head;
  head.in_channels = channels.back() * (arch.feature_dim / product(strides, false));
  head.out_channels = out_channels;
  mean_head_ = ConvLayer<T>(name + ".mean_head", head, true, rng);
  var_head_ = ConvLayer<T>(name + ".var_head", head, true, rng);
}

template <typename T>
DiagGaussian<T> SequenceEncoder<T>::forward(Graph<T>& g, Var<T> x, Mode mode) {
  const Shape& s = x.shape();
  if (s.size() != 4 || s[1] != 1 || s[2] != feature_dim_) {
    throw DimensionError(name_ + ": expected [B,1," + std::to_string(feature_dim_) + ",N], got " +
                         shape_string(s));
  }
  if (s[3] < time_downsample_ || s[3] % time_downsample_ != 0) {
    throw LengthError(name_ + ": sequence of " + std::to_string(s[3]) +
                      " frames; need a positive multiple of " + std::to_string(time_downsample_) +
                      " (minimum " + std::to_string(time_downsample_) + " frames)");
  }
  Var<T> h = x;
  for (auto& block : blocks_) h = block.forward(g, h, mode);
  const Shape& hs = h.shape();
  h = reshape(h, {hs[0], hs[1] * hs[2], 1, hs[3]});
  Var<T> mean = mean_head_.forward(g, h);
  Var<T> var = positive_variance(var_head_.forward(g, h));
  return DiagGaussian<T>(mean, var);
}

template <typename T>
UtteranceDecoder<T>::UtteranceDecoder(const ArchConfig& arch, Rng& rng)
    : latent_channels_(arch.latent_channels),
      code_dim_(arch.code_dim),
      top_channels_(arch.utterance_channels.back()),
      top_extent_(arch.utterance_feature_extent()),
      fixed_variance_(arch.fixed_decoder_variance) {
  const auto& ch = arch.utterance_channels;
  const auto& ks = arch.utterance_kernels;
  const auto& ss = arch.utterance_strides;
  ConvSpec first;
  first.in_channels = latent_channels_ + code_dim_;
  first.out_channels = top_channels_ * top_extent_;
  input_block_ = GluBlock<T>("utt_dec.input", first, rng);
  for (std::size_t i = ch.size() - 1; i >= 1; --i) {
    blocks_.emplace_back("utt_dec.block" + std::to_string(ch.size() - 1 - i),
                         stack_spec(ch[i] + code_dim_, ch[i - 1], ks[i], ss[i], true), rng);
  }
  const ConvSpec head = stack_spec(ch[0] + code_dim_, 1, ks[0], ss[0], true);
  mean_head_ = ConvLayer<T>("utt_dec.mean_head", head, true, rng);
  if (!fixed_variance_) var_head_ = ConvLayer<T>("utt_dec.var_head", head, true, rng);
}

template <typename T>
DiagGaussian<T> UtteranceDecoder<T>::forward(Graph<T>& g, Var<T> z, Var<T> c, Mode mode) {
  const Shape& zs = z.shape();
  if (zs.size() != 4 || zs[1] != latent_channels_ || zs[2] != 1) {
    throw DimensionError("utterance decoder: latent must be [B," + std::to_string(latent_channels_) +
                         ",1,N'], got " + shape_string(zs));
  }
  if (c.shape() != Shape{zs[0], code_dim_}) {
    throw DimensionError("utterance decoder: code must be [" + std::to_string(zs[0]) + "," +
                         std::to_string(code_dim_) + "], got " + shape_string(c.shape()));
  }
  auto with_code = [&](Var<T> h) {
    return concat_channels(h, broadcast_code(c, h.shape()[2], h.shape()[3]));
  };
  Var<T> h = input_block_.forward(g, with_code(z), mode);
  h = reshape(h, {zs[0], top_channels_, top_extent_, zs[3]});
  for (auto& block : blocks_) h = block.forward(g, with_code(h), mode);
  h = with_code(h);
  Var<T> mean = mean_head_.forward(g, h);
  Var<T> var = fixed_variance_ ? g.constant(Tensor<T>(mean.shape(), T(1)))
                               : positive_variance(var_head_.forward(g, h));
  return DiagGaussian<T>(mean, var);
}

template <typename T>
FaceEncoder<T>::FaceEncoder(const ArchConfig& arch, Rng& rng)
    : image_shape_{arch.image_channels, arch.image_size, arch.image_size} {
  std::size_t in = arch.image_channels;
  const Kernel2 k{arch.face_kernel, arch.face_kernel}, s{2, 2};
  for (std::size_t i = 0; i < arch.face_channels.size(); ++i) {
    const std::string name = "face_enc.block" + std::to_string(i);
    convs_.emplace_back(name + ".conv", stack_spec(in, arch.face_channels[i], k, s, false), false, rng);
    norms_.emplace_back(name + ".norm", arch.face_channels[i]);
    in = arch.face_channels[i];
  }
  const std::size_t flat = in * arch.face_grid() * arch.face_grid();
  mean_head_ = LinearLayer<T>("face_enc.mean_head", flat, arch.code_dim, rng);
  var_head_ = LinearLayer<T>("face_enc.var_head", flat, arch.code_dim, rng);
}

template <typename T>
DiagGaussian<T> FaceEncoder<T>::forward(Graph<T>& g, Var<T> y, Mode mode) {
  const Shape& s = y.shape();
  if (s.size() != 4 || Shape(s.begin() + 1, s.end()) != image_shape_) {
    throw DimensionError("face encoder: expected [B," + shape_string(image_shape_).substr(1) +
                         ", got " + shape_string(s));
  }
  Var<T> h = y;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    h = leaky_relu(norms_[i].forward(g, convs_[i].forward(g, h), mode), T(0.2));
  }
  h = reshape(h, {s[0], h.size() / s[0]});
  Var<T> mean = mean_head_.forward(g, h);
  Var<T> var = positive_variance(var_head_.forward(g, h));
  return DiagGaussian<T>(mean, var);
}

template <typename T>
FaceDecoder<T>::FaceDecoder(const ArchConfig& arch, Rng& rng)
    : code_dim_(arch.code_dim),
      top_channels_(arch.face_channels.back()),
      grid_(arch.face_grid()),
      fixed_variance_(arch.fixed_decoder_variance) {
  const auto& ch = arch.face_channels;
  const std::size_t flat = top_channels_ * grid_ * grid_;
  input_ = LinearLayer<T>("face_dec.input", code_dim_, flat, rng, false);
  input_norm_ = BatchNormLayer<T>("face_dec.input_norm", flat);
  const Kernel2 k{arch.face_kernel, arch.face_kernel}, s{2, 2};
  for (std::size_t i = ch.size() - 1; i >= 1; --i) {
    const std::string name = "face_dec.block" + std::to_string(ch.size() - 1 - i);
    deconvs_.emplace_back(name + ".deconv", stack_spec(ch[i], ch[i - 1], k, s, true), false, rng);
    norms_.emplace_back(name + ".norm", ch[i - 1]);
  }
  const ConvSpec head = stack_spec(ch[0], arch.image_channels, k, s, true);
  mean_head_ = ConvLayer<T>("face_dec.mean_head", head, true, rng);
  if (!fixed_variance_) var_head_ = ConvLayer<T>("face_dec.var_head", head, true, rng);
}

template <typename T>
DiagGaussian<T> FaceDecoder<T>::forward(Graph<T>& g, Var<T> c, Mode mode) {
  const Shape& s = c.shape();
  if (s.size() != 2 || s[1] != code_dim_) {
    throw DimensionError("face decoder: code must be [B," + std::to_string(code_dim_) + "], got " +
                         shape_string(s));
  }
  Var<T> h = leaky_relu(input_norm_.forward(g, input_.forward(g, c), mode), T(0.2));
  h = reshape(h, {s[0], top_channels_, grid_, grid_});
  for (std::size_t i = 0; i < deconvs_.size(); ++i) {
    h = leaky_relu(norms_[i].forward(g, deconvs_[i].forward(g, h), mode), T(0.2));
  }
  Var<T> mean = sigmoid(mean_head_.forward(g, h));
  Var<T> var = fixed_variance_ ? g.constant(Tensor<T>(mean.shape(), T(1)))
                               : positive_variance(var_head_.forward(g, h));
  return DiagGaussian<T>(mean, var);
}

// ---------------------------------------------------------------------------
// ModelParams

template <typename T>
std::vector<Parameter<T>*> ModelParams<T>::parameters() {
  std::vector<Parameter<T>*> out;
  visit([&](Parameter<T>& p) { out.push_back(&p); });
  return out;
}

template <typename T>
void ModelParams<T>::zero_grad() {
  visit([](Parameter<T>& p) { p.zero_grad(); });
}

template <typename T>
std::size_t ModelParams<T>::parameter_count() {
  std::size_t n = 0;
  visit([&](Parameter<T>& p) { n += p.value.size(); });
  return n;
}

template <typename T>
ModelParams<T> init_params(const ArchConfig& arch, std::uint64_t seed) {
  arch.validate();
  ModelParams<T> m;
  m.arch = arch;
  Rng r_dec_a(mix_seed(seed, 1)), r_enc_a(mix_seed(seed, 2)), r_dec_v(mix_seed(seed, 3)),
      r_enc_v(mix_seed(seed, 4)), r_voice(mix_seed(seed, 5));
  m.utterance_decoder = UtteranceDecoder<T>(arch, r_dec_a);
  m.utterance_encoder = SequenceEncoder<T>("utt_enc", arch, arch.utterance_channels,
                                           arch.utterance_kernels, arch.utterance_strides,
                                           arch.latent_channels, r_enc_a);
  m.face_decoder = FaceDecoder<T>(arch, r_dec_v);
  m.face_encoder = FaceEncoder<T>(arch, r_enc_v);
  m.voice_encoder = SequenceEncoder<T>("voice_enc", arch, arch.voice_channels, arch.voice_kernels,
                                       arch.voice_strides, arch.code_dim, r_voice);
  return m;
}

// ---------------------------------------------------------------------------
// Inference

namespace {

void check_features(const ArchConfig& arch, const Shape& s) {
  if (s.size() != 2 || s[0] != arch.feature_dim) {
    throw DimensionError("acoustic features must be [" + std::to_string(arch.feature_dim) +
                         ",N], got " + shape_string(s));
  }
}

template <typename T>
Tensor<T> as_feature_batch(const ArchConfig& arch, const Tensor<T>& x) {
  check_features(arch, x.shape());
  return x.reshaped({1, 1, x.dim(0), x.dim(1)});
}

template <typename T>
Tensor<T> as_image_batch(const ArchConfig& arch, const Tensor<T>& y) {
  const Shape want{arch.image_channels, arch.image_size, arch.image_size};
  if (y.shape() != want) {
    throw DimensionError("face image must be " + shape_string(want) + ", got " + shape_string(y.shape()));
  }
  return y.reshaped({1, want[0], want[1], want[2]});
}

template <typename T>
Tensor<T> as_code_batch(const ArchConfig& arch, const Tensor<T>& c) {
  if (c.shape() != Shape{arch.code_dim}) {
    throw DimensionError("latent code must be [" + std::to_string(arch.code_dim) + "], got " +
                         shape_string(c.shape()));
  }
  return c.reshaped({1, arch.code_dim});
}

template <typename T>
Tensor<T> crop_frames(const Tensor<T>& x, std::size_t frames) {
  Tensor<T> out({x.dim(0), frames});
  for (std::size_t d = 0; d < x.dim(0); ++d)
    for (std::size_t t = 0; t < frames; ++t) out.at(d, t) = x.at(d, t);
  return out;
}

template <typename T>
void require_min_frames(const ArchConfig& arch, const Tensor<T>& x) {
  check_features(arch, x.shape());
  if (x.dim(1) < arch.min_frames()) {
    throw LengthError("sequence of " + std::to_string(x.dim(1)) + " frames is shorter than the minimum " +
                      std::to_string(arch.min_frames()));
  }
}

}  // namespace

template <typename T>
Tensor<T> pad_frames(const Tensor<T>& x, std::size_t multiple) {
  if (x.rank() != 2) throw DimensionError("pad_frames expects [D,N], got " + shape_string(x.shape()));
  const std::size_t n = x.dim(1);
  const std::size_t padded = (n + multiple - 1) / multiple * multiple;
  if (padded == n) return x;
  Tensor<T> out({x.dim(0), padded});
  for (std::size_t d = 0; d < x.dim(0); ++d)
    for (std::size_t t = 0; t < padded; ++t) out.at(d, t) = x.at(d, std::min(t, n - 1));
  return out;
}

template <typename T>
GaussianValue<T> utterance_encode(ModelParams<T>& params, const Tensor<T>& features) {
  Graph<T> g(false);
  auto q = params.utterance_encoder.forward(g, g.constant(as_feature_batch(params.arch, features)),
                                            Mode::eval);
  const Shape& s = q.shape();
  return values_of(q, {s[1], s[3]});
}

template <typename T>
GaussianValue<T> utterance_decode(ModelParams<T>& params, const Tensor<T>& latent,
                                  const Tensor<T>& code) {
  if (latent.rank() != 2) throw DimensionError("latent sequence must be [D',N']");
  Graph<T> g(false);
  Var<T> z = g.constant(latent.reshaped({1, latent.dim(0), 1, latent.dim(1)}));
  auto p = params.utterance_decoder.forward(g, z, g.constant(as_code_batch(params.arch, code)), Mode::eval);
  const Shape& s = p.shape();
  return values_of(p, {s[2], s[3]});
}

template <typename T>
GaussianValue<T> face_encode(ModelParams<T>& params, const Tensor<T>& image) {
  Graph<T> g(false);
  auto q = params.face_encoder.forward(g, g.constant(as_image_batch(params.arch, image)), Mode::eval);
  return values_of(q, {params.arch.code_dim});
}

template <typename T>
GaussianValue<T> face_decode(ModelParams<T>& params, const Tensor<T>& code) {
  Graph<T> g(false);
  auto p = params.face_decoder.forward(g, g.constant(as_code_batch(params.arch, code)), Mode::eval);
  const Shape& s = p.shape();
  return values_of(p, {s[1], s[2], s[3]});
}

template <typename T>
GaussianValue<T> voice_encode(ModelParams<T>& params, const Tensor<T>& features) {
  Graph<T> g(false);
  auto q = params.voice_encoder.forward(g, g.constant(as_feature_batch(params.arch, features)),
                                        Mode::eval);
  const Shape& s = q.shape();
  return values_of(q, {s[1], s[3]});
}

template <typename T>
Tensor<T> convert_voice(ModelParams<T>& params, const Tensor<T>& features, const Tensor<T>& image) {
  require_min_frames(params.arch, features);
  const Tensor<T> padded = pad_frames(features, params.arch.time_downsample());
  const Tensor<T> z = utterance_encode(params, padded).mean;
  const Tensor<T> c = face_encode(params, image).mean;
  return crop_frames(utterance_decode(params, z, c).mean, features.dim(1));
}

template <typename T>
Tensor<T> generate_face(ModelParams<T>& params, const Tensor<T>& features) {
  require_min_frames(params.arch, features);
  const Tensor<T> codes = voice_encode(params, pad_frames(features, params.arch.voice_time_downsample())).mean;
  Tensor<T> code({codes.dim(0)});
  for (std::size_t d = 0; d < codes.dim(0); ++d) {
    T acc = 0;
    for (std::size_t t = 0; t < codes.dim(1); ++t) acc += codes.at(d, t);
    code[d] = acc / static_cast<T>(codes.dim(1));
  }
  return face_decode(params, code).mean;
}

#define FACEVC_INSTANTIATE_NETWORKS(T)                                                     \
  template class SequenceEncoder<T>;                                                       \
  template class UtteranceDecoder<T>;                                                      \
  template class FaceEncoder<T>;                                                           \
  template class FaceDecoder<T>;                                                           \
  template struct ModelParams<T>;                                                          \
  template ModelParams<T> init_params(const ArchConfig&, std::uint64_t);                   \
  template GaussianValue<T> utterance_encode(ModelParams<T>&, const Tensor<T>&);           \
  template GaussianValue<T> utterance_decode(ModelParams<T>&, const Tensor<T>&, const Tensor<T>&); \
  template GaussianValue<T> face_encode(ModelParams<T>&, const Tensor<T>&);                \
  template GaussianValue<T> face_decode(ModelParams<T>&, const Tensor<T>&);                \
  template GaussianValue<T> voice_encode(ModelParams<T>&, const Tensor<T>&);               \
  template Tensor<T> convert_voice(ModelParams<T>&, const Tensor<T>&, const Tensor<T>&);   \
  template Tensor<T> generate_face(ModelParams<T>&, const Tensor<T>&);                     \
  template Tensor<T> pad_frames(const Tensor<T>&, std::size_t);

FACEVC_INSTANTIATE_NETWORKS(float)
FACEVC_INSTANTIATE_NETWORKS(double)

}  // namespace facevc
