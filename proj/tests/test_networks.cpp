// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <set>

#include "facevc/networks.hpp"
#include "facevc/objectives.hpp"
#include "facevc/rng.hpp"

namespace facevc {
namespace {

class DefaultModel : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { model_ = new ModelParams<float>(init_params<float>(ArchConfig{}, 7)); }
  static void TearDownTestSuite() {
    delete model_;
    model_ = nullptr;
  }
  static ModelParams<float>& model() { return *model_; }

  static Tensor<float> features(std::size_t frames, std::uint64_t seed = 1) {
    Rng rng(seed);
    return rng.normal_tensor<float>({36, frames});
  }
  static Tensor<float> image(std::uint64_t seed = 2) {
    Rng rng(seed);
    Tensor<float> y({1, 32, 32});
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<float>(rng.uniform());
    return y;
  }

 private:
  static ModelParams<float>* model_;
};

ModelParams<float>* DefaultModel::model_ = nullptr;

TEST_F(DefaultModel, ArchitectureDerivedExtents) {
  const ArchConfig a;
  EXPECT_NO_THROW(a.validate());
  EXPECT_EQ(a.time_downsample(), 4u);
  EXPECT_EQ(a.voice_time_downsample(), 8u);
  EXPECT_EQ(a.min_frames(), 8u);
  EXPECT_EQ(a.utterance_feature_extent(), 9u);
  EXPECT_EQ(a.face_grid(), 4u);
}

TEST_F(DefaultModel, ShapesOfEveryNetwork) {
  const auto x = features(64);
  const auto q_z = utterance_encode(model(), x);
  EXPECT_EQ(q_z.mean.shape(), (Shape{8, 16}));
  EXPECT_EQ(q_z.var.shape(), (Shape{8, 16}));

  const auto q_c = face_encode(model(), image());
  EXPECT_EQ(q_c.mean.shape(), (Shape{16}));

  const auto p_x = utterance_decode(model(), q_z.mean, q_c.mean);
  EXPECT_EQ(p_x.mean.shape(), (Shape{36, 64}));

  const auto p_y = face_decode(model(), q_c.mean);
  EXPECT_EQ(p_y.mean.shape(), (Shape{1, 32, 32}));

  const auto r = voice_encode(model(), x);
  EXPECT_EQ(r.mean.shape(), (Shape{16, 8}));
  EXPECT_EQ(voice_encode(model(), features(128)).mean.shape(), (Shape{16, 16}));

  for (const auto* t : {&q_z.var, &q_c.var, &p_x.var, &p_y.var, &r.var}) {
    for (float v : t->values()) ASSERT_GT(v, 0.0f);
  }
}

TEST_F(DefaultModel, FullyConvolutionalInTime) {
  for (std::size_t n : {16, 48, 64, 96, 160}) {
    EXPECT_EQ(utterance_encode(model(), features(n)).mean.dim(1), n / 4) << n;
  }
  // Arbitrary lengths above the minimum round-trip through padding and cropping.
  for (std::size_t n : {17, 50, 93}) {
    EXPECT_EQ(convert_voice(model(), features(n), image()).shape(), (Shape{36, n})) << n;
  }
}

TEST_F(DefaultModel, FaceMeanLiesInTheUnitInterval) {
  Rng rng(3);
  for (int i = 0; i < 5; ++i) {
    Tensor<float> c = rng.normal_tensor<float>({16});
    for (std::size_t k = 0; k < c.size(); ++k) c[k] *= 10.0f;
    const auto face = face_decode(model(), c);
    for (float v : face.mean.values()) {
      ASSERT_GE(v, 0.0f);
      ASSERT_LE(v, 1.0f);
    }
  }
  const Tensor<float> generated = generate_face(model(), features(64));
  for (float v : generated.values()) {
    ASSERT_GE(v, 0.0f);
    ASSERT_LE(v, 1.0f);
  }
}

TEST_F(DefaultModel, CodeChangesTheDecodedUtterance) {
  const auto z = utterance_encode(model(), features(64)).mean;
  Tensor<float> c1({16}, 0.0f), c2({16}, 0.0f);
  c2[3] = 2.0f;
  const auto a = utterance_decode(model(), z, c1).mean;
  const auto b = utterance_decode(model(), z, c2).mean;
  EXPECT_GT(max_abs_diff(a, b), 1e-4f);
  // And the face picks the code for conversion.
  EXPECT_NE(convert_voice(model(), features(64), image(2)), convert_voice(model(), features(64), image(9)));
}

TEST_F(DefaultModel, InferenceIsDeterministic) {
  const auto x = features(64);
  EXPECT_EQ(convert_voice(model(), x, image()), convert_voice(model(), x, image()));
  EXPECT_EQ(generate_face(model(), x), generate_face(model(), x));
}

TEST_F(DefaultModel, RejectsTooShortOrMisshapenInput) {
  EXPECT_THROW(convert_voice(model(), features(7), image()), LengthError);
  EXPECT_THROW(generate_face(model(), features(5)), LengthError);
  EXPECT_THROW(utterance_encode(model(), features(30)), LengthError);  // not a multiple of 4
  Rng rng(1);
  EXPECT_THROW(convert_voice(model(), rng.normal_tensor<float>({20, 64}), image()), DimensionError);
  EXPECT_THROW(face_encode(model(), Tensor<float>({1, 16, 16}, 0.5f)), DimensionError);
}

TEST(Networks, InitializationIsSeedDetermined) {
  const ArchConfig arch = ArchConfig::tiny();
  auto a = init_params<double>(arch, 11);
  auto b = init_params<double>(arch, 11);
  auto c = init_params<double>(arch, 12);
  const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  bool any_differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i]->name, pb[i]->name);
    EXPECT_EQ(pa[i]->value, pb[i]->value) << pa[i]->name;
    any_differs = any_differs || pa[i]->value != pc[i]->value;
  }
  EXPECT_TRUE(any_differs);
  EXPECT_EQ(a.parameter_count(), c.parameter_count());
}

TEST(Networks, ParameterNamesAreUnique) {
  auto p = init_params<float>(ArchConfig{}, 1);
  std::set<std::string> names;
  for (auto* q : p.parameters()) EXPECT_TRUE(names.insert(q->name).second) << q->name;
}

TEST(Networks, GradientReachesTheCode) {
  auto params = init_params<double>(ArchConfig::tiny(), 3);
  Rng rng(4);
  Graph<double> g;
  auto z = g.constant(rng.normal_tensor<double>({2, 2, 1, 4}));
  auto c = g.input(rng.normal_tensor<double>({2, 3}));
  auto p = params.utterance_decoder.forward(g, z, c, Mode::train);
  g.backward(sum(square(p.mean())));
  const Tensor<double> grad = g.grad(c);
  double norm = 0;
  for (double v : grad.values()) norm += v * v;
  EXPECT_GT(norm, 0.0);
}

TEST(Networks, ObjectiveGradientReachesAlmostEveryParameter) {
  auto params = init_params<float>(ArchConfig{}, 5);
  Rng rng(6);
  Batch<float> batch;
  batch.features = rng.normal_tensor<float>({4, 1, 36, 64});
  batch.images = Tensor<float>({4, 1, 32, 32});
  for (std::size_t i = 0; i < batch.images.size(); ++i) batch.images[i] = static_cast<float>(rng.uniform());
  Graph<float> g;
  auto terms = build_objective(g, params, batch, rng, {}, true);
  params.zero_grad();
  g.backward(scale(terms.objective, -1.0f));
  std::size_t nonzero = 0, total = 0;
  for (auto* p : params.parameters()) {
    ++total;
    for (float v : p->grad.values()) {
      if (v != 0.0f) {
        ++nonzero;
        break;
      }
    }
  }
  EXPECT_GE(static_cast<double>(nonzero), 0.99 * static_cast<double>(total));
}

TEST(Networks, PadFramesRepeatsTheLastFrame) {
  Tensor<double> x({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  const auto p = pad_frames(x, 4);
  EXPECT_EQ(p, Tensor<double>({2, 4}, std::vector<double>{1, 2, 3, 3, 4, 5, 6, 6}));
  EXPECT_EQ(pad_frames(p, 4), p);
  EXPECT_THROW(pad_frames(Tensor<double>({3}), 2), DimensionError);
}

TEST(Networks, ArchConfigRoundTripsAndValidates) {
  const ArchConfig a = ArchConfig::tiny();
  EXPECT_EQ(ArchConfig::from_map(a.to_map()), a);
  EXPECT_EQ(ArchConfig::from_map(ArchConfig{}.to_map()), ArchConfig{});

  ArchConfig bad;
  bad.feature_dim = 35;  // frequency strides multiply to 4
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = ArchConfig{};
  bad.voice_kernels.pop_back();
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = ArchConfig{};
  bad.image_size = 20;
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_THROW(ArchConfig::from_map({{"arch.nope", "1"}}), ConfigError);
  EXPECT_THROW(ArchConfig::from_map({{"arch.code_dim", "x"}}), ConfigError);
}

TEST(Networks, FixedDecoderVarianceIsOne) {
  ArchConfig arch = ArchConfig::tiny();
  arch.fixed_decoder_variance = true;
  auto params = init_params<double>(arch, 2);
  Rng rng(1);
  const auto p = utterance_decode(params, rng.normal_tensor<double>({2, 4}), rng.normal_tensor<double>({3}));
  for (double v : p.var.values()) EXPECT_EQ(v, 1.0);
  EXPECT_LT(params.parameter_count(), init_params<double>(ArchConfig::tiny(), 2).parameter_count());
}

}  // namespace
}  // namespace facevc
