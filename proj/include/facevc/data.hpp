// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

// Synthetic paired corpus: acoustic-feature sequences and face images drawn
// from four attribute groups (gender x age), paired within groups.
//
// Features [D,N]: per-dimension attribute offsets (gender on dims 0-11, age on
// dims 12-23, negative for male / young) plus a smooth content trajectory
// that is shared by all dimensions through a fixed mixing matrix. Images
// [1,I,J]: a radial gradient scaled by a gender brightness, horizontal
// stripes with an age frequency, and pixel noise.
//
// Manifest layout (CSV, paths relative to the manifest's directory):
//   pair_id,gender,age,feature_path,image_path
//   ...
//   # key=value            generator parameters, seed, normalization stats

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "facevc/rng.hpp"
#include "facevc/tensor.hpp"

namespace facevc {

enum class Gender : std::uint8_t { male = 0, female = 1 };
enum class Age : std::uint8_t { young = 0, aged = 1 };

struct AttributeLabel {
  Gender gender = Gender::male;
  Age age = Age::young;

  // 0..3 as 2 * gender + age.
  int group() const { return 2 * static_cast<int>(gender) + static_cast<int>(age); }
  static AttributeLabel from_group(int group);
  std::string name() const;  // e.g. "female_aged"
  friend bool operator==(const AttributeLabel&, const AttributeLabel&) = default;
};

inline constexpr int kGroupCount = 4;

std::string to_string(Gender g);
std::string to_string(Age a);
Gender parse_gender(const std::string& s);
Age parse_age(const std::string& s);

struct GenParams {
  std::uint64_t world_seed = 1;  // fixes the content mixing matrix
  std::size_t feature_dim = 36;
  std::size_t min_frames = 48;
  std::size_t max_frames = 96;
  double attribute_offset = 0.8;
  std::size_t content_rank = 4;
  double period_min = 24;
  double period_max = 96;
  double content_std = 1.0;
  std::size_t image_size = 32;
  double brightness_male = 0.45;
  double brightness_female = 0.85;
  double stripe_freq_young = 2;
  double stripe_freq_aged = 5;
  double stripe_amplitude = 0.12;
  double center_jitter = 2;
  double image_noise = 0.05;

  void validate() const;
  std::map<std::string, std::string> to_map() const;  // keys "gen.*"
  static GenParams from_map(const std::map<std::string, std::string>& kv);
  friend bool operator==(const GenParams&, const GenParams&) = default;
};

struct FeatureItem {
  std::string id;
  AttributeLabel attrs;
  Tensor<double> features;  // [D,N]
};

struct ImageItem {
  std::string id;
  AttributeLabel attrs;
  Tensor<double> image;  // [1,I,J]
};

struct PairedExample {
  std::string pair_id;
  AttributeLabel attrs;
  Tensor<double> x;  // [D,N]
  Tensor<double> y;  // [1,I,J]
};

// Single samples; values are rounded to what the file formats store (f32
// features, 8-bit pixels) so that a written corpus reloads exactly.
Tensor<double> synth_features(const GenParams& p, AttributeLabel attrs, Rng& rng);
Tensor<double> synth_image(const GenParams& p, AttributeLabel attrs, Rng& rng);
// Row-normalized [D,K] content mixing matrix of the world.
Tensor<double> content_mixing(const GenParams& p);

// Uniform random matching within each group; the smaller side of a group is
// sampled with replacement so every item of the larger side appears once.
// Throws DegenerateError naming the group when either side is empty.
std::vector<PairedExample> pair_by_attribute(const std::vector<FeatureItem>& features,
                                             const std::vector<ImageItem>& images,
                                             std::uint64_t seed);

struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;  // floored at 1e-8

  bool empty() const { return mean.empty(); }
  Tensor<double> normalize(const Tensor<double>& features) const;
  Tensor<double> denormalize(const Tensor<double>& features) const;
  friend bool operator==(const NormStats&, const NormStats&) = default;
};

// Per-dimension statistics over every frame of every example.
NormStats compute_norm_stats(const std::vector<PairedExample>& pairs);

struct ManifestEntry {
  std::string pair_id;
  AttributeLabel attrs;
  std::string feature_path;  // relative to the manifest directory unless absolute
  std::string image_path;
};

struct CorpusManifest {
  std::vector<ManifestEntry> entries;
  std::map<std::string, std::string> trailer;  // generator block, seed, norm stats
  std::string directory;                       // directory the manifest was read from

  std::size_t count(int group) const;
};

// Generates per_group pairs for each group (sample-indexed seeds, so the
// result does not depend on generation order).
std::vector<PairedExample> generate_pairs(std::uint64_t seed, std::size_t per_group,
                                          const GenParams& params);

// Generates, writes features/, images/ and manifest.csv under `dir` and
// returns the manifest.
CorpusManifest generate_corpus(const std::string& dir, std::uint64_t seed, std::size_t per_group,
                               const GenParams& params);

void write_manifest(const std::string& path, const CorpusManifest& manifest);
CorpusManifest read_manifest(const std::string& path);
std::vector<PairedExample> load_pairs(const CorpusManifest& manifest);

// Stats from the trailer when present, else computed from the pairs.
NormStats manifest_norm_stats(const CorpusManifest& manifest, const std::vector<PairedExample>& pairs);

std::string join_doubles(const std::vector<double>& v);
std::vector<double> split_doubles(const std::string& s, const std::string& what);

}  // namespace facevc
