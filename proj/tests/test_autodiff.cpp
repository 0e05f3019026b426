// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "facevc/autodiff.hpp"
#include "facevc/gradcheck.hpp"
#include "facevc/rng.hpp"
#include "oracles.hpp"

namespace facevc {
namespace {

using testing_oracles::conv_reference;
using testing_oracles::deconv_reference;
using testing_oracles::random_case;
using testing_oracles::RandomCase;

TEST(Convolution, MatchesNestedLoopsOverRandomShapes) {
  std::mt19937_64 gen(20260101);
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const RandomCase c = random_case(gen);
    const auto x = rng.normal_tensor<double>(c.x);
    const auto k = rng.normal_tensor<double>(c.k);
    const auto y = conv2d(x, k, c.g);
    const auto y_ref = conv_reference(x, k, c.g);
    ASSERT_EQ(y.shape(), y_ref.shape()) << "trial " << trial;
    EXPECT_LE(max_abs_diff(y, y_ref), 1e-10) << "trial " << trial;

    const auto a = rng.normal_tensor<double>(y.shape());
    const auto d = deconv2d(a, k, c.g);
    const auto d_ref = deconv_reference(a, k, c.g);
    ASSERT_EQ(d.shape(), d_ref.shape());
    EXPECT_LE(max_abs_diff(d, d_ref), 1e-10) << "trial " << trial;
  }
}

TEST(Convolution, DeconvIsTheAdjointOfConv) {
  std::mt19937_64 gen(77);
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const RandomCase c = random_case(gen);
    const auto x = rng.normal_tensor<double>(c.x);
    const auto k = rng.normal_tensor<double>(c.k);
    const auto y = conv2d(x, k, c.g);
    const auto a = rng.normal_tensor<double>(y.shape());
    const auto d = deconv2d(a, k, c.g);
    ASSERT_EQ(d.shape(), x.shape());
    const double lhs = dot(a, y), rhs = dot(d, x);
    EXPECT_LE(std::abs(lhs - rhs), 1e-10 * std::max(1.0, std::abs(lhs))) << "trial " << trial;
  }
}

TEST(Convolution, ShapeLaws) {
  // 36 x 64 feature map, kernel 3 x 8, stride (1,2), matched padding.
  Tensor<double> x({1, 1, 36, 64}, 1.0);
  Tensor<double> k({2, 1, 3, 8}, 0.5);
  EXPECT_EQ(conv2d(x, k, {1, 2, 1, 3}).shape(), (Shape{1, 2, 36, 32}));

  Tensor<double> z({1, 2, 36, 8}, 1.0);
  Tensor<double> kd({2, 1, 3, 4}, 0.5);
  EXPECT_EQ(deconv2d(z, kd, {1, 2, 1, 1}).shape(), (Shape{1, 1, 36, 16}));

  EXPECT_EQ(conv_output_extent(64, 8, 2, 3), 32u);
  EXPECT_EQ(deconv_output_extent(32, 8, 2, 3), 64u);
}

TEST(Convolution, SingleExampleShapesAreAccepted) {
  Rng rng(3);
  const auto x = rng.normal_tensor<double>({2, 5, 5});
  const auto k = rng.normal_tensor<double>({3, 2, 3, 3});
  const auto y = conv2d(x, k, {1, 1, 1, 1});
  EXPECT_EQ(y.shape(), (Shape{3, 5, 5}));
  const auto y4 = conv2d(x.reshaped({1, 2, 5, 5}), k, {1, 1, 1, 1});
  EXPECT_EQ(y.storage(), y4.storage());
}

TEST(Convolution, RejectsBadGeometry) {
  Tensor<double> x({1, 2, 8, 8});
  EXPECT_THROW(conv2d(x, Tensor<double>({1, 3, 3, 3}), {}), DimensionError);    // channel mismatch
  EXPECT_THROW(conv2d(x, Tensor<double>({1, 2, 3, 3}), {0, 1, 0, 0}), DimensionError);  // zero stride
  EXPECT_THROW(conv2d(x, Tensor<double>({1, 2, 9, 3}), {}), DimensionError);    // kernel too tall
  // Padding consumes the whole transposed output.
  EXPECT_THROW(deconv2d(Tensor<double>({1, 1, 1, 1}), Tensor<double>({1, 1, 1, 1}), {1, 1, 1, 0}),
               DimensionError);
}

TEST(Autodiff, ChainRuleOnSmallExpression) {
  Graph<double> g;
  auto x = g.input(Tensor<double>({3}, std::vector<double>{1.0, -2.0, 0.5}));
  auto y = sum(mul(exp(x), x));  // d/dx = e^x (1 + x)
  g.backward(y);
  const auto dx = g.grad(x);
  for (std::size_t i = 0; i < 3; ++i) {
    const double v = x.value()[i];
    EXPECT_NEAR(dx[i], std::exp(v) * (1 + v), 1e-14);
  }
}

TEST(Autodiff, ParameterGradientsAccumulateUntilZeroed) {
  Parameter<double> p("w", Tensor<double>({2}, std::vector<double>{1.0, 3.0}));
  for (int pass = 0; pass < 2; ++pass) {
    Graph<double> g;
    g.backward(sum(square(g.parameter(p))));
  }
  EXPECT_DOUBLE_EQ(p.grad[0], 4.0);
  EXPECT_DOUBLE_EQ(p.grad[1], 12.0);
  p.zero_grad();
  EXPECT_DOUBLE_EQ(p.grad[1], 0.0);
}

TEST(Autodiff, InferenceGraphTreatsParametersAsConstants) {
  Parameter<double> p("w", Tensor<double>({2}, 1.0));
  Graph<double> g(false);
  auto v = g.parameter(p);
  EXPECT_FALSE(v.requires_grad());
  g.backward(sum(v));
  EXPECT_EQ(p.grad[0], 0.0);
}

TEST(Autodiff, UnreachedNodeHasZeroGradient) {
  Graph<double> g;
  auto a = g.input(Tensor<double>({2}, 1.0));
  auto b = g.input(Tensor<double>({2}, 2.0));
  g.backward(sum(a));
  EXPECT_EQ(g.grad(b), Tensor<double>({2}, 0.0));
}

TEST(Autodiff, RejectsMixedGraphsAndShapeMismatch) {
  Graph<double> g1, g2;
  auto a = g1.input(Tensor<double>({2}, 1.0));
  auto b = g2.input(Tensor<double>({2}, 1.0));
  EXPECT_THROW(add(a, b), Error);
  auto c = g1.input(Tensor<double>({3}, 1.0));
  EXPECT_THROW(add(a, c), DimensionError);
  EXPECT_THROW(reshape(a, {3}), DimensionError);
}

TEST(Autodiff, BatchNormTrainingUpdatesRunningStats) {
  Graph<double> g;
  Tensor<double> x({4, 1, 1, 1}, std::vector<double>{1, 2, 3, 4});
  auto gamma = g.constant(Tensor<double>({1}, 1.0));
  auto beta = g.constant(Tensor<double>({1}, 0.0));
  auto stats = RunningStats<double>::fresh(1);
  auto y = batch_norm(g.constant(x), gamma, beta, stats, Mode::train);
  double mean = 0;
  for (double v : y.value().values()) mean += v;
  EXPECT_NEAR(mean, 0.0, 1e-12);
  EXPECT_NEAR(stats.mean[0], kBatchNormMomentum * 2.5, 1e-12);
  EXPECT_THROW(batch_norm(g.constant(Tensor<double>({1, 1, 1, 1}, 1.0)), gamma, beta, stats, Mode::train),
               DegenerateError);
}

TEST(GradCheck, EveryOpPassesOverThreeSeeds) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto report = grad_check_ops(seed);
    EXPECT_GE(report.entries.size(), 27u);
    for (const auto& e : report.entries) EXPECT_TRUE(e.passed()) << e.name << " error " << e.error;
  }
}

TEST(GradCheck, DetectsAWrongGradient) {
  // Identity whose backward pass drops the gradient.
  const ScalarFn broken = [](Graph<double>& g, const std::vector<Var<double>>& in) {
    auto v = in[0];
    auto out = g.record(v.value(), {v}, [](Graph<double>&, std::size_t) {});
    return sum(out);
  };
  const auto report = check_function("broken", {Tensor<double>({3}, 0.5)}, broken);
  EXPECT_FALSE(report.passed());
}

}  // namespace
}  // namespace facevc
