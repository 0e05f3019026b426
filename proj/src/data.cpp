// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

#include "facevc/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "facevc/io.hpp"
#include "facevc/kv.hpp"

namespace facevc {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifestHeader = "pair_id,gender,age,feature_path,image_path";

// Seed streams of the generator.
constexpr std::uint64_t kMixingStream = 0xC0;
constexpr std::uint64_t kFeatureStream = 100;
constexpr std::uint64_t kImageStream = 200;
constexpr std::uint64_t kPairingStream = 300;

std::string resolve(const std::string& dir, const std::string& path) {
  const fs::path p(path);
  if (p.is_absolute() || dir.empty()) return p.string();
  return (fs::path(dir) / p).string();
}

}  // namespace

AttributeLabel AttributeLabel::from_group(int group) {
  if (group < 0 || group >= kGroupCount) throw Error("attribute group out of range: " + std::to_string(group));
  return {static_cast<Gender>(group / 2), static_cast<Age>(group % 2)};
}

std::string AttributeLabel::name() const { return to_string(gender) + "_" + to_string(age); }

std::string to_string(Gender g) { return g == Gender::male ? "male" : "female"; }
std::string to_string(Age a) { return a == Age::young ? "young" : "aged"; }

Gender parse_gender(const std::string& s) {
  if (s == "male") return Gender::male;
  if (s == "female") return Gender::female;
  throw FormatError("unknown gender '" + s + "'");
}

Age parse_age(const std::string& s) {
  if (s == "young") return Age::young;
  if (s == "aged") return Age::aged;
  throw FormatError("unknown age '" + s + "'");
}

// ---------------------------------------------------------------------------
// Generator parameters

void GenParams::validate() const {
  std::vector<std::string> problems;
  if (feature_dim < 24) problems.push_back("gen.feature_dim must be >= 24 (attribute dims 0-23)");
  if (min_frames == 0 || min_frames > max_frames) problems.push_back("gen.min_frames must be in [1, gen.max_frames]");
  if (content_rank == 0) problems.push_back("gen.content_rank must be >= 1");
  if (!(period_min > 0) || period_min > period_max) problems.push_back("gen.period_min must be in (0, gen.period_max]");
  if (content_std < 0) problems.push_back("gen.content_std must be >= 0");
  if (image_size < 4) problems.push_back("gen.image_size must be >= 4");
  if (image_noise < 0) problems.push_back("gen.image_noise must be >= 0");
  if (center_jitter < 0) problems.push_back("gen.center_jitter must be >= 0");
  if (!problems.empty()) {
    std::string msg = "invalid generator parameters:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
}

std::map<std::string, std::string> GenParams::to_map() const {
  return {
      {"gen.world_seed", std::to_string(world_seed)},
      {"gen.feature_dim", std::to_string(feature_dim)},
      {"gen.min_frames", std::to_string(min_frames)},
      {"gen.max_frames", std::to_string(max_frames)},
      {"gen.attribute_offset", format_double(attribute_offset)},
      {"gen.content_rank", std::to_string(content_rank)},
      {"gen.period_min", format_double(period_min)},
      {"gen.period_max", format_double(period_max)},
      {"gen.content_std", format_double(content_std)},
      {"gen.image_size", std::to_string(image_size)},
      {"gen.brightness_male", format_double(brightness_male)},
      {"gen.brightness_female", format_double(brightness_female)},
      {"gen.stripe_freq_young", format_double(stripe_freq_young)},
      {"gen.stripe_freq_aged", format_double(stripe_freq_aged)},
      {"gen.stripe_amplitude", format_double(stripe_amplitude)},
      {"gen.center_jitter", format_double(center_jitter)},
      {"gen.image_noise", format_double(image_noise)},
  };
}

GenParams GenParams::from_map(const std::map<std::string, std::string>& kv) {
  GenParams p;
  for (const auto& [k, v] : kv) {
    if (k == "gen.world_seed") p.world_seed = parse_u64(k, v);
    else if (k == "gen.feature_dim") p.feature_dim = parse_size(k, v);
    else if (k == "gen.min_frames") p.min_frames = parse_size(k, v);
    else if (k == "gen.max_frames") p.max_frames = parse_size(k, v);
    else if (k == "gen.attribute_offset") p.attribute_offset = parse_double(k, v);
    else if (k == "gen.content_rank") p.content_rank = parse_size(k, v);
    else if (k == "gen.period_min") p.period_min = parse_double(k, v);
    else if (k == "gen.period_max") p.period_max = parse_double(k, v);
    else if (k == "gen.content_std") p.content_std = parse_double(k, v);
    else if (k == "gen.image_size") p.image_size = parse_size(k, v);
    else if (k == "gen.brightness_male") p.brightness_male = parse_double(k, v);
    else if (k == "gen.brightness_female") p.brightness_female = parse_double(k, v);
    else if (k == "gen.stripe_freq_young") p.stripe_freq_young = parse_double(k, v);
    else if (k == "gen.stripe_freq_aged") p.stripe_freq_aged = parse_double(k, v);
    else if (k == "gen.stripe_amplitude") p.stripe_amplitude = parse_double(k, v);
    else if (k == "gen.center_jitter") p.center_jitter = parse_double(k, v);
    else if (k == "gen.image_noise") p.image_noise = parse_double(k, v);
    else throw ConfigError("unknown generator key: " + k);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Samples

Tensor<double> content_mixing(const GenParams& p) {
  Rng rng(mix_seed(p.world_seed, kMixingStream));
  Tensor<double> a = rng.normal_tensor<double>({p.feature_dim, p.content_rank});
  for (std::size_t d = 0; d < p.feature_dim; ++d) {
    double norm = 0;
    for (std::size_t k = 0; k < p.content_rank; ++k) norm += a.at(d, k) * a.at(d, k);
    norm = std::sqrt(norm);
    for (std::size_t k = 0; k < p.content_rank; ++k) a.at(d, k) /= norm;
  }
  return a;
}

namespace {

Tensor<double> synth_features_with(const GenParams& p, const Tensor<double>& mixing, AttributeLabel attrs,
                                   Rng& rng) {
  const std::size_t n = p.min_frames + rng.below(p.max_frames - p.min_frames + 1);
  const std::size_t k_count = p.content_rank;
  std::vector<double> omega(k_count), phase(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    omega[k] = 2 * std::numbers::pi / rng.uniform(p.period_min, p.period_max);
    phase[k] = rng.uniform(0, 2 * std::numbers::pi);
  }
  const double gender_sign = attrs.gender == Gender::male ? -1.0 : 1.0;
  const double age_sign = attrs.age == Age::young ? -1.0 : 1.0;
  // Unit-variance sinusoids: sin has variance 1/2.
  const double amplitude = p.content_std * std::numbers::sqrt2;

  Tensor<double> x({p.feature_dim, n});
  std::vector<double> wave(k_count);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t k = 0; k < k_count; ++k) wave[k] = std::sin(omega[k] * static_cast<double>(t) + phase[k]);
    for (std::size_t d = 0; d < p.feature_dim; ++d) {
      double v = 0;
      for (std::size_t k = 0; k < k_count; ++k) v += mixing.at(d, k) * wave[k];
      v *= amplitude;
      if (d < 12) v += gender_sign * p.attribute_offset;
      else if (d < 24) v += age_sign * p.attribute_offset;
      x.at(d, t) = static_cast<double>(static_cast<float>(v));
    }
  }
  return x;
}

}  // namespace

Tensor<double> synth_features(const GenParams& p, AttributeLabel attrs, Rng& rng) {
  p.validate();
  return synth_features_with(p, content_mixing(p), attrs, rng);
}

Tensor<double> synth_image(const GenParams& p, AttributeLabel attrs, Rng& rng) {
  const std::size_t size = p.image_size;
  const double mid = (static_cast<double>(size) - 1) / 2;
  const double cy = mid + rng.uniform(-p.center_jitter, p.center_jitter);
  const double cx = mid + rng.uniform(-p.center_jitter, p.center_jitter);
  const double brightness = attrs.gender == Gender::male ? p.brightness_male : p.brightness_female;
  const double freq = attrs.age == Age::young ? p.stripe_freq_young : p.stripe_freq_aged;
  const double spread = 0.45 * static_cast<double>(size);

  Tensor<double> img({1, size, size});
  for (std::size_t i = 0; i < size; ++i) {
    const double stripe =
        p.stripe_amplitude * std::sin(2 * std::numbers::pi * freq * static_cast<double>(i) / static_cast<double>(size));
    for (std::size_t j = 0; j < size; ++j) {
      const double dy = static_cast<double>(i) - cy;
      const double dx = static_cast<double>(j) - cx;
      const double radial = std::exp(-(dx * dx + dy * dy) / (2 * spread * spread));
      const double v = brightness * radial + stripe + p.image_noise * rng.normal();
      img[i * size + j] = quantize_pixel(v);
    }
  }
  return img;
}

// ---------------------------------------------------------------------------
// Pairing

std::vector<PairedExample> pair_by_attribute(const std::vector<FeatureItem>& features,
                                             const std::vector<ImageItem>& images, std::uint64_t seed) {
  std::array<std::vector<std::size_t>, kGroupCount> by_feature, by_image;
  for (std::size_t i = 0; i < features.size(); ++i) by_feature[features[i].attrs.group()].push_back(i);
  for (std::size_t i = 0; i < images.size(); ++i) by_image[images[i].attrs.group()].push_back(i);

  std::vector<PairedExample> out;
  for (int g = 0; g < kGroupCount; ++g) {
    const auto& fs_idx = by_feature[g];
    const auto& im_idx = by_image[g];
    if (fs_idx.empty() && im_idx.empty()) continue;
    const std::string group = AttributeLabel::from_group(g).name();
    if (fs_idx.empty()) throw DegenerateError("group " + group + " has images but no feature sequences");
    if (im_idx.empty()) throw DegenerateError("group " + group + " has feature sequences but no images");

    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(g)));
    const std::size_t n = std::max(fs_idx.size(), im_idx.size());
    std::vector<std::size_t> f_pick(n), i_pick(n);
    auto shuffled = [&](const std::vector<std::size_t>& v) {
      std::vector<std::size_t> s = v;
      for (std::size_t i = s.size(); i > 1; --i) std::swap(s[i - 1], s[rng.below(i)]);
      return s;
    };
    if (fs_idx.size() == im_idx.size()) {
      f_pick = fs_idx;
      i_pick = shuffled(im_idx);
    } else if (fs_idx.size() > im_idx.size()) {
      f_pick = fs_idx;
      for (auto& v : i_pick) v = im_idx[rng.below(im_idx.size())];
    } else {
      i_pick = im_idx;
      for (auto& v : f_pick) v = fs_idx[rng.below(fs_idx.size())];
    }
    for (std::size_t k = 0; k < n; ++k) {
      const FeatureItem& f = features[f_pick[k]];
      const ImageItem& im = images[i_pick[k]];
      out.push_back({f.id + "+" + im.id, f.attrs, f.features, im.image});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalization

NormStats compute_norm_stats(const std::vector<PairedExample>& pairs) {
  if (pairs.empty()) throw DegenerateError("normalization statistics need at least one example");
  const std::size_t d = pairs.front().x.dim(0);
  std::vector<double> sum(d, 0), sq(d, 0);
  std::size_t frames = 0;
  for (const auto& p : pairs) {
    if (p.x.rank() != 2 || p.x.dim(0) != d) {
      throw DimensionError("pair " + p.pair_id + ": features " + shape_string(p.x.shape()) +
                           " do not have " + std::to_string(d) + " dimensions");
    }
    const std::size_t n = p.x.dim(1);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t t = 0; t < n; ++t) sum[i] += p.x.at(i, t);
    }
    frames += n;
  }
  NormStats s;
  s.mean.resize(d);
  s.std.resize(d);
  for (std::size_t i = 0; i < d; ++i) s.mean[i] = sum[i] / static_cast<double>(frames);
  for (const auto& p : pairs) {
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t t = 0; t < p.x.dim(1); ++t) {
        const double c = p.x.at(i, t) - s.mean[i];
        sq[i] += c * c;
      }
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    s.std[i] = std::max(std::sqrt(sq[i] / static_cast<double>(frames)), 1e-8);
  }
  return s;
}

Tensor<double> NormStats::normalize(const Tensor<double>& x) const {
  if (x.rank() != 2 || x.dim(0) != mean.size()) {
    throw DimensionError("normalization stats cover " + std::to_string(mean.size()) +
                         " dimensions, features are " + shape_string(x.shape()));
  }
  Tensor<double> out(x.shape());
  for (std::size_t i = 0; i < x.dim(0); ++i) {
    for (std::size_t t = 0; t < x.dim(1); ++t) out.at(i, t) = (x.at(i, t) - mean[i]) / std[i];
  }
  return out;
}

Tensor<double> NormStats::denormalize(const Tensor<double>& x) const {
  if (x.rank() != 2 || x.dim(0) != mean.size()) {
    throw DimensionError("normalization stats cover " + std::to_string(mean.size()) +
                         " dimensions, features are " + shape_string(x.shape()));
  }
  Tensor<double> out(x.shape());
  for (std::size_t i = 0; i < x.dim(0); ++i) {
    for (std::size_t t = 0; t < x.dim(1); ++t) out.at(i, t) = x.at(i, t) * std[i] + mean[i];
  }
  return out;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

std::vector<double> split_doubles(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const auto& item : split(s, ',')) out.push_back(parse_double(what, trim(item)));
  return out;
}

// ---------------------------------------------------------------------------
// Corpus and manifest

std::size_t CorpusManifest::count(int group) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [&](const ManifestEntry& e) { return e.attrs.group() == group; }));
}

std::vector<PairedExample> generate_pairs(std::uint64_t seed, std::size_t per_group, const GenParams& params) {
  if (per_group == 0) throw ConfigError("per-group count must be >= 1");
  params.validate();
  const Tensor<double> mixing = content_mixing(params);
  std::vector<FeatureItem> features;
  std::vector<ImageItem> images;
  for (int g = 0; g < kGroupCount; ++g) {
    const AttributeLabel attrs = AttributeLabel::from_group(g);
    const std::uint64_t fseed = mix_seed(seed, kFeatureStream + static_cast<std::uint64_t>(g));
    const std::uint64_t iseed = mix_seed(seed, kImageStream + static_cast<std::uint64_t>(g));
    for (std::size_t i = 0; i < per_group; ++i) {
      char id[64];
      std::snprintf(id, sizeof id, "%s_%04zu", attrs.name().c_str(), i);
      Rng frng(mix_seed(fseed, i));
      Rng irng(mix_seed(iseed, i));
      features.push_back({std::string("utt_") + id, attrs, synth_features_with(params, mixing, attrs, frng)});
      images.push_back({std::string("face_") + id, attrs, synth_image(params, attrs, irng)});
    }
  }
  std::vector<PairedExample> pairs = pair_by_attribute(features, images, mix_seed(seed, kPairingStream));
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "pair_%05zu", i);
    pairs[i].pair_id = id;
  }
  return pairs;
}

CorpusManifest generate_corpus(const std::string& dir, std::uint64_t seed, std::size_t per_group,
                               const GenParams& params) {
  std::vector<PairedExample> pairs = generate_pairs(seed, per_group, params);
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "features", ec);
  if (!ec) fs::create_directories(fs::path(dir) / "images", ec);
  if (ec) throw Error("cannot create output directory " + dir + ": " + ec.message());

  CorpusManifest m;
  m.directory = dir;
  for (const auto& p : pairs) {
    ManifestEntry e{p.pair_id, p.attrs, "features/" + p.pair_id + ".cvt", "images/" + p.pair_id + ".pgm"};
    save_features(resolve(dir, e.feature_path), p.x);
    save_image(resolve(dir, e.image_path), p.y);
    m.entries.push_back(std::move(e));
  }
  m.trailer = params.to_map();
  m.trailer["seed"] = std::to_string(seed);
  m.trailer["per_group"] = std::to_string(per_group);
  const NormStats norm = compute_norm_stats(pairs);
  m.trailer["norm.mean"] = join_doubles(norm.mean);
  m.trailer["norm.std"] = join_doubles(norm.std);
  write_manifest((fs::path(dir) / "manifest.csv").string(), m);
  return m;
}

void write_manifest(const std::string& path, const CorpusManifest& m) {
  std::string out = std::string(kManifestHeader) + "\n";
  for (const auto& e : m.entries) {
    out += e.pair_id + "," + to_string(e.attrs.gender) + "," + to_string(e.attrs.age) + "," + e.feature_path +
           "," + e.image_path + "\n";
  }
  for (const auto& [k, v] : m.trailer) out += "# " + k + "=" + v + "\n";
  write_file_atomic(path, out);
}

CorpusManifest read_manifest(const std::string& path) {
  std::istringstream in(read_file(path));
  CorpusManifest m;
  m.directory = fs::path(path).parent_path().string();
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    if (line[0] == '#') {
      const std::string body = trim(line.substr(1));
      const auto eq = body.find('=');
      if (eq == std::string::npos) continue;  // free-form comment
      m.trailer[trim(body.substr(0, eq))] = trim(body.substr(eq + 1));
      continue;
    }
    if (!header_seen) {
      if (line != kManifestHeader) throw FormatError(where + ": expected header '" + kManifestHeader + "'");
      header_seen = true;
      continue;
    }
    const auto cols = split(line, ',');
    if (cols.size() != 5) throw FormatError(where + ": expected 5 columns, found " + std::to_string(cols.size()));
    ManifestEntry e;
    e.pair_id = cols[0];
    try {
      e.attrs = {parse_gender(cols[1]), parse_age(cols[2])};
    } catch (const FormatError& err) {
      throw FormatError(where + ": " + err.what());
    }
    e.feature_path = cols[3];
    e.image_path = cols[4];
    m.entries.push_back(std::move(e));
  }
  if (!header_seen) throw FormatError(path + ": missing manifest header");
  if (m.entries.empty()) throw FormatError(path + ": manifest lists no pairs");
  return m;
}

std::vector<PairedExample> load_pairs(const CorpusManifest& m) {
  std::vector<PairedExample> pairs;
  pairs.reserve(m.entries.size());
  for (const auto& e : m.entries) {
    PairedExample p{e.pair_id, e.attrs, load_features(resolve(m.directory, e.feature_path)),
                    load_image(resolve(m.directory, e.image_path))};
    if (!pairs.empty()) {
      const auto& first = pairs.front();
      if (p.x.dim(0) != first.x.dim(0) || p.y.shape() != first.y.shape()) {
        throw FormatError("pair " + e.pair_id + ": shapes " + shape_string(p.x.shape()) + " / " +
                          shape_string(p.y.shape()) + " differ from pair " + first.pair_id);
      }
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

NormStats manifest_norm_stats(const CorpusManifest& m, const std::vector<PairedExample>& pairs) {
  const auto mean = m.trailer.find("norm.mean");
  const auto sd = m.trailer.find("norm.std");
  if (mean == m.trailer.end() || sd == m.trailer.end()) return compute_norm_stats(pairs);
  NormStats s{split_doubles(mean->second, "norm.mean"), split_doubles(sd->second, "norm.std")};
  if (s.mean.size() != s.std.size() || (!pairs.empty() && s.mean.size() != pairs.front().x.dim(0))) {
    throw FormatError("manifest normalization stats do not match the feature dimension");
  }
  return s;
}

}  // namespace facevc
