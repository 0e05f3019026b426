// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <fstream>

#include "facevc/data.hpp"
#include "facevc/io.hpp"
#include "facevc/kv.hpp"
#include "fixtures.hpp"

namespace facevc {
namespace {

using testing_fixtures::TempDir;

double group_mean(const std::vector<PairedExample>& pairs, bool (*select)(AttributeLabel), std::size_t d0,
                  std::size_t d1) {
  double acc = 0;
  std::size_t n = 0;
  for (const auto& p : pairs) {
    if (!select(p.attrs)) continue;
    for (std::size_t d = d0; d < d1; ++d)
      for (std::size_t t = 0; t < p.x.dim(1); ++t, ++n) acc += p.x.at(d, t);
  }
  return acc / static_cast<double>(n);
}

double p_value(const std::vector<std::size_t>& counts) {
  double total = 0;
  for (auto c : counts) total += static_cast<double>(c);
  const double expected = total / static_cast<double>(counts.size());
  double stat = 0;
  for (auto c : counts) stat += (static_cast<double>(c) - expected) * (static_cast<double>(c) - expected) / expected;
  boost::math::chi_squared_distribution<double> dist(static_cast<double>(counts.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

TEST(Attributes, GroupsAndNames) {
  for (int g = 0; g < kGroupCount; ++g) EXPECT_EQ(AttributeLabel::from_group(g).group(), g);
  EXPECT_EQ(AttributeLabel::from_group(3).name(), "female_aged");
  EXPECT_EQ(AttributeLabel::from_group(0).name(), "male_young");
  EXPECT_EQ(parse_gender("female"), Gender::female);
  EXPECT_EQ(parse_age("aged"), Age::aged);
  EXPECT_THROW(parse_gender("other"), FormatError);
  EXPECT_THROW(AttributeLabel::from_group(4), Error);
}

TEST(Synth, GenerationIsDeterministicAndSeedDependent) {
  GenParams p;
  const auto a = generate_pairs(4, 3, p);
  const auto b = generate_pairs(4, 3, p);
  const auto c = generate_pairs(5, 3, p);
  ASSERT_EQ(a.size(), 12u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].pair_id, b[i].pair_id);
    EXPECT_EQ(a[i].x, b[i].x);
    EXPECT_EQ(a[i].y, b[i].y);
  }
  EXPECT_NE(a[0].x, c[0].x);
  // Samples are indexed by seed, so a larger corpus extends a smaller one.
  const auto big = generate_pairs(4, 5, p);
  std::vector<Tensor<double>> small_x, big_x;
  for (const auto& q : a) small_x.push_back(q.x);
  for (const auto& q : big) big_x.push_back(q.x);
  for (const auto& x : small_x) EXPECT_NE(std::find(big_x.begin(), big_x.end(), x), big_x.end());
}

TEST(Synth, ShapesAndRanges) {
  GenParams p;
  for (const auto& q : generate_pairs(1, 4, p)) {
    EXPECT_EQ(q.x.dim(0), 36u);
    EXPECT_GE(q.x.dim(1), p.min_frames);
    EXPECT_LE(q.x.dim(1), p.max_frames);
    EXPECT_EQ(q.y.shape(), (Shape{1, 32, 32}));
    for (double v : q.y.values()) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
      ASSERT_EQ(v, quantize_pixel(v));
    }
    for (double v : q.x.values()) ASSERT_EQ(v, static_cast<double>(static_cast<float>(v)));
  }
}

TEST(Synth, AttributeOffsetsSeparateTheGroups) {
  const auto pairs = generate_pairs(2, 60, GenParams{});
  auto female = [](AttributeLabel a) { return a.gender == Gender::female; };
  auto male = [](AttributeLabel a) { return a.gender == Gender::male; };
  auto aged = [](AttributeLabel a) { return a.age == Age::aged; };
  auto young = [](AttributeLabel a) { return a.age == Age::young; };
  // Offsets +-0.8 give a difference of 1.6 on the attribute dims.
  EXPECT_NEAR(group_mean(pairs, female, 0, 12) - group_mean(pairs, male, 0, 12), 1.6, 0.1);
  EXPECT_NEAR(group_mean(pairs, aged, 12, 24) - group_mean(pairs, young, 12, 24), 1.6, 0.1);
  EXPECT_NEAR(group_mean(pairs, female, 12, 24) - group_mean(pairs, male, 12, 24), 0.0, 0.1);
  EXPECT_NEAR(group_mean(pairs, female, 24, 36) - group_mean(pairs, male, 24, 36), 0.0, 0.1);
}

TEST(Synth, ImagesEncodeGenderByBrightness) {
  const auto pairs = generate_pairs(3, 30, GenParams{});
  double f = 0, m = 0;
  for (const auto& p : pairs) {
    double s = 0;
    for (double v : p.y.values()) s += v;
    (p.attrs.gender == Gender::female ? f : m) += s / static_cast<double>(p.y.size());
  }
  EXPECT_GT(f, m * 1.3);
}

TEST(Synth, ContentMixingRowsHaveUnitNorm) {
  const auto a = content_mixing(GenParams{});
  EXPECT_EQ(a.shape(), (Shape{36, 4}));
  for (std::size_t d = 0; d < 36; ++d) {
    double s = 0;
    for (std::size_t k = 0; k < 4; ++k) s += a.at(d, k) * a.at(d, k);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Synth, RejectsInvalidParameters) {
  GenParams p;
  p.feature_dim = 20;
  EXPECT_THROW(p.validate(), ConfigError);
  EXPECT_THROW(generate_pairs(1, 0, GenParams{}), ConfigError);
  EXPECT_EQ(GenParams::from_map(GenParams{}.to_map()), GenParams{});
  EXPECT_THROW(GenParams::from_map({{"gen.colour", "1"}}), ConfigError);
}

std::vector<FeatureItem> feature_items(int group, std::size_t n) {
  std::vector<FeatureItem> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({"f" + std::to_string(i), AttributeLabel::from_group(group),
                   Tensor<double>({1, 1}, static_cast<double>(i))});
  }
  return out;
}

std::vector<ImageItem> image_items(int group, std::size_t n) {
  std::vector<ImageItem> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({"i" + std::to_string(i), AttributeLabel::from_group(group),
                   Tensor<double>({1, 1, 1}, static_cast<double>(i))});
  }
  return out;
}

TEST(Pairing, PairsOnlyWithinAGroup) {
  std::vector<FeatureItem> f;
  std::vector<ImageItem> im;
  for (int g = 0; g < kGroupCount; ++g) {
    for (auto& x : feature_items(g, 3)) f.push_back(x);
    for (auto& x : image_items(g, 3)) im.push_back(x);
  }
  const auto pairs = pair_by_attribute(f, im, 1);
  EXPECT_EQ(pairs.size(), 12u);
  for (const auto& p : pairs) EXPECT_EQ(p.attrs, AttributeLabel::from_group(p.attrs.group()));
}

TEST(Pairing, SingletonGroupPairsWithEveryItem) {
  const auto pairs = pair_by_attribute(feature_items(2, 5), image_items(2, 1), 3);
  ASSERT_EQ(pairs.size(), 5u);
  for (const auto& p : pairs) EXPECT_EQ(p.y[0], 0.0);
  std::vector<double> xs;
  for (const auto& p : pairs) xs.push_back(p.x[0]);
  std::sort(xs.begin(), xs.end());
  EXPECT_EQ(xs, (std::vector<double>{0, 1, 2, 3, 4}));
}

TEST(Pairing, EmptySideIsDegenerate) {
  try {
    // Group 1 has features but no images.
    auto features = feature_items(0, 2);
    const auto extra = feature_items(1, 2);
    features.insert(features.end(), extra.begin(), extra.end());
    pair_by_attribute(features, image_items(0, 2), 1);
    FAIL() << "expected DegenerateError";
  } catch (const DegenerateError& e) {
    EXPECT_NE(std::string(e.what()).find("male_aged"), std::string::npos) << e.what();
  }
}

TEST(Pairing, MatchingIsUniform) {
  // Equal-size group: the image paired with feature 0 is uniform over 4 images.
  std::vector<std::size_t> counts(4, 0);
  const auto f = feature_items(0, 4);
  const auto im = image_items(0, 4);
  for (std::uint64_t seed = 0; seed < 4000; ++seed) {
    for (const auto& p : pair_by_attribute(f, im, seed)) {
      if (p.x[0] == 0.0) ++counts[static_cast<std::size_t>(p.y[0])];
    }
  }
  EXPECT_GT(p_value(counts), 0.01);

  // With replacement: 3 images drawn for 6 features.
  std::vector<std::size_t> drawn(3, 0);
  const auto f6 = feature_items(1, 6);
  const auto im3 = image_items(1, 3);
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    for (const auto& p : pair_by_attribute(f6, im3, seed)) ++drawn[static_cast<std::size_t>(p.y[0])];
  }
  EXPECT_GT(p_value(drawn), 0.01);
}

TEST(Normalization, StatsAndInverse) {
  const auto pairs = generate_pairs(6, 4, GenParams{});
  const NormStats s = compute_norm_stats(pairs);
  ASSERT_EQ(s.mean.size(), 36u);
  double mean0 = 0, sq0 = 0, n = 0;
  for (const auto& p : pairs) {
    const auto z = s.normalize(p.x);
    for (std::size_t t = 0; t < z.dim(1); ++t, ++n) {
      mean0 += z.at(0, t);
      sq0 += z.at(0, t) * z.at(0, t);
    }
    EXPECT_LE(max_abs_diff(s.denormalize(z), p.x), 1e-12);
  }
  EXPECT_NEAR(mean0 / n, 0.0, 1e-9);
  EXPECT_NEAR(sq0 / n, 1.0, 1e-9);
  EXPECT_THROW(s.normalize(Tensor<double>({35, 4})), DimensionError);
}

TEST(Formats, TensorRoundTripIsExact) {
  TempDir dir("cvt");
  Rng rng(1);
  const auto t64 = rng.normal_tensor<double>({3, 4, 5});
  save_tensor(dir.file("a.cvt"), t64);
  EXPECT_EQ(load_tensor(dir.file("a.cvt")), t64);
  const auto t32 = rng.normal_tensor<float>({7});
  save_tensor(dir.file("b.cvt"), t32);
  EXPECT_EQ(load_tensor(dir.file("b.cvt")), t32.cast<double>());

  const auto pairs = generate_pairs(1, 1, GenParams{});
  save_features(dir.file("f.cvt"), pairs[0].x);
  EXPECT_EQ(load_features(dir.file("f.cvt")), pairs[0].x);
  const std::string bytes = read_file(dir.file("f.cvt"));
  EXPECT_EQ(bytes.substr(0, 4), "CVT1");
  EXPECT_EQ(bytes.size(), 4 + 1 + 1 + 8 + 4 * pairs[0].x.size());
}

TEST(Formats, MalformedTensorsAreRejected) {
  const std::string good = encode_tensor(Tensor<double>({2, 3}, 1.5), DType::f32);
  EXPECT_EQ(decode_tensor(good, "good"), Tensor<double>({2, 3}, 1.5));
  for (std::size_t cut = 0; cut < good.size(); cut += 3) {
    EXPECT_THROW(decode_tensor(std::string_view(good).substr(0, cut), "cut"), FormatError) << cut;
  }
  std::string bad = good;
  bad[4] = 7;
  EXPECT_THROW(decode_tensor(bad, "dtype"), FormatError);
  EXPECT_THROW(decode_tensor(good + "x", "long"), FormatError);
  bad = good;
  bad[6] = 0;  // first extent low byte -> zero extent
  EXPECT_THROW(decode_tensor(bad, "extent"), FormatError);
  EXPECT_THROW(load_tensor("/nonexistent/file.cvt"), FormatError);
}

TEST(Formats, ImagesRoundTripWithinQuantization) {
  TempDir dir("pgm");
  Rng rng(2);
  Tensor<double> img({1, 5, 7});
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = rng.uniform();
  save_image(dir.file("a.pgm"), img);
  const auto back = load_image(dir.file("a.pgm"));
  EXPECT_EQ(back.shape(), img.shape());
  EXPECT_LE(max_abs_diff(back, img), 0.5 / 255 + 1e-15);
  save_image(dir.file("b.pgm"), back);
  EXPECT_EQ(load_image(dir.file("b.pgm")), back);
  EXPECT_EQ(quantize_pixel(-0.2), 0.0);
  EXPECT_EQ(quantize_pixel(1.7), 1.0);

  const std::string bytes = read_file(dir.file("a.pgm"));
  {
    std::ofstream out(dir.file("short.pgm"), std::ios::binary);
    out << bytes.substr(0, bytes.size() - 3);
  }
  EXPECT_THROW(load_image(dir.file("short.pgm")), FormatError);
  {
    std::ofstream out(dir.file("p2.pgm"), std::ios::binary);
    out << "P2\n1 1\n255\n7\n";
  }
  EXPECT_THROW(load_image(dir.file("p2.pgm")), FormatError);
}

TEST(Manifest, CorpusRoundTrips) {
  TempDir dir("corpus");
  GenParams gen = testing_fixtures::small_gen();
  const auto m = generate_corpus(dir.path().string(), 9, 3, gen);
  const auto back = read_manifest(dir.file("manifest.csv"));
  ASSERT_EQ(back.entries.size(), 12u);
  for (int g = 0; g < kGroupCount; ++g) EXPECT_EQ(back.count(g), 3u);
  EXPECT_EQ(back.trailer, m.trailer);
  EXPECT_EQ(GenParams::from_map(with_prefix(back.trailer, "gen.")), gen);

  const auto loaded = load_pairs(back);
  const auto fresh = generate_pairs(9, 3, gen);
  ASSERT_EQ(loaded.size(), fresh.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    EXPECT_EQ(loaded[i].pair_id, fresh[i].pair_id);
    EXPECT_EQ(loaded[i].attrs, fresh[i].attrs);
    EXPECT_EQ(loaded[i].x, fresh[i].x);
    EXPECT_EQ(loaded[i].y, fresh[i].y);
  }
  EXPECT_EQ(manifest_norm_stats(back, loaded), compute_norm_stats(fresh));

  // Rewriting the manifest reproduces the file byte for byte.
  write_manifest(dir.file("copy.csv"), back);
  EXPECT_EQ(read_file(dir.file("copy.csv")), read_file(dir.file("manifest.csv")));
}

TEST(Manifest, MalformedManifestsAreRejected) {
  TempDir dir("badmanifest");
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream(dir.file(name)) << text;
    return dir.file(name);
  };
  EXPECT_THROW(read_manifest(write("a.csv", "id,gender\n")), FormatError);
  EXPECT_THROW(read_manifest(write("b.csv", "pair_id,gender,age,feature_path,image_path\n")), FormatError);
  EXPECT_THROW(read_manifest(write("c.csv", "pair_id,gender,age,feature_path,image_path\np,male,old,f,i\n")),
               FormatError);
  EXPECT_THROW(read_manifest(write("d.csv", "pair_id,gender,age,feature_path,image_path\np,male,aged,f\n")),
               FormatError);
  const auto m = read_manifest(write("e.csv", "pair_id,gender,age,feature_path,image_path\np,male,aged,f,i\n"));
  EXPECT_THROW(load_pairs(m), FormatError);  // files are missing
  EXPECT_THROW(read_manifest(dir.file("none.csv")), FormatError);
}

}  // namespace
}  // namespace facevc
