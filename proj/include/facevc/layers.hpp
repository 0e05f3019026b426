// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>

#include "facevc/autodiff.hpp"
#include "facevc/rng.hpp"

namespace facevc {

struct ConvSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  ConvGeometry geom;
  bool transposed = false;

  Shape kernel_shape() const {
    return transposed ? Shape{in_channels, out_channels, kernel_h, kernel_w}
                      : Shape{out_channels, in_channels, kernel_h, kernel_w};
  }
  double fan_in() const {
    const double taps = static_cast<double>(in_channels * kernel_h * kernel_w);
    return transposed ? taps / static_cast<double>(geom.stride_h * geom.stride_w) : taps;
  }
};

// Padding that maps an extent divisible by `stride` to extent/stride (conv) and
// back (deconv). Requires kernel - stride to be even and non-negative.
inline std::size_t matched_padding(std::size_t kernel, std::size_t stride) {
  if (kernel < stride || (kernel - stride) % 2 != 0) {
    throw ConfigError("kernel " + std::to_string(kernel) + " with stride " + std::to_string(stride) +
                      " has no symmetric padding that divides the extent exactly");
  }
  return (kernel - stride) / 2;
}

// Uniform in +-sqrt(1/fan_in).
template <typename T>
Tensor<T> uniform_init(const Shape& shape, double fan_in, Rng& rng) {
  const double bound = std::sqrt(1.0 / fan_in);
  Tensor<T> t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

template <typename T>
struct ConvLayer {
  ConvSpec spec;
  Parameter<T> weight;
  Parameter<T> bias;  // empty unless with_bias
  bool with_bias = false;

  ConvLayer() = default;
  ConvLayer(const std::string& name, const ConvSpec& s, bool bias_term, Rng& rng)
      : spec(s),
        weight(name + ".weight", uniform_init<T>(s.kernel_shape(), s.fan_in(), rng)),
        with_bias(bias_term) {
    if (with_bias) bias = Parameter<T>(name + ".bias", uniform_init<T>({s.out_channels}, s.fan_in(), rng));
  }

  Var<T> forward(Graph<T>& g, Var<T> x) {
    Var<T> w = g.parameter(weight);
    Var<T> y = spec.transposed ? deconv2d(x, w, spec.geom) : conv2d(x, w, spec.geom);
    return with_bias ? add_channel_bias(y, g.parameter(bias)) : y;
  }

  template <typename F>
  void visit(F&& f) {
    f(weight);
    if (with_bias) f(bias);
  }
};

template <typename T>
struct BatchNormLayer {
  Parameter<T> gamma;
  Parameter<T> beta;
  RunningStats<T> stats;
  std::string name;

  BatchNormLayer() = default;
  BatchNormLayer(const std::string& n, std::size_t channels)
      : gamma(n + ".gamma", Tensor<T>({channels}, T(1))),
        beta(n + ".beta", Tensor<T>({channels}, T(0))),
        stats(RunningStats<T>::fresh(channels)),
        name(n) {}

  Var<T> forward(Graph<T>& g, Var<T> x, Mode mode) {
    return batch_norm(x, g.parameter(gamma), g.parameter(beta), stats, mode);
  }

  template <typename F>
  void visit(F&& f) {
    f(gamma);
    f(beta);
  }
  template <typename F>
  void visit_stats(F&& f) {
    f(name, stats);
  }
};

template <typename T>
struct LinearLayer {
  Parameter<T> weight;
  Parameter<T> bias;
  bool with_bias = true;

  LinearLayer() = default;
  // Leave the bias out when a batch norm follows: it would have no effect.
  LinearLayer(const std::string& name, std::size_t in, std::size_t out, Rng& rng, bool bias_term = true)
      : weight(name + ".weight", uniform_init<T>({out, in}, static_cast<double>(in), rng)), with_bias(bias_term) {
    if (with_bias) bias = Parameter<T>(name + ".bias", uniform_init<T>({out}, static_cast<double>(in), rng));
  }

  Var<T> forward(Graph<T>& g, Var<T> x) {
    const Var<T> b = with_bias ? g.parameter(bias) : g.constant(Tensor<T>({weight.value.dim(0)}, T(0)));
    return linear(x, g.parameter(weight), b);
  }

  template <typename F>
  void visit(F&& f) {
    f(weight);
    if (with_bias) f(bias);
  }
};

// GLU(X) = B1(L1(X)) * sigmoid(B2(L2(X))) with two parallel convolutions of
// identical output geometry (not a channel split).
template <typename T>
struct GluBlock {
  ConvLayer<T> linear_conv;
  ConvLayer<T> gate_conv;
  BatchNormLayer<T> linear_norm;
  BatchNormLayer<T> gate_norm;

  GluBlock() = default;
  GluBlock(const std::string& name, const ConvSpec& linear_spec, const ConvSpec& gate_spec, Rng& rng);
  GluBlock(const std::string& name, const ConvSpec& spec, Rng& rng) : GluBlock(name, spec, spec, rng) {}

  Var<T> forward(Graph<T>& g, Var<T> x, Mode mode) {
    Var<T> a = linear_norm.forward(g, linear_conv.forward(g, x), mode);
    Var<T> b = gate_norm.forward(g, gate_conv.forward(g, x), mode);
    return mul(a, sigmoid(b));
  }

  template <typename F>
  void visit(F&& f) {
    linear_conv.visit(f);
    gate_conv.visit(f);
    linear_norm.visit(f);
    gate_norm.visit(f);
  }
  template <typename F>
  void visit_stats(F&& f) {
    linear_norm.visit_stats(f);
    gate_norm.visit_stats(f);
  }
};

template <typename T>
GluBlock<T>::GluBlock(const std::string& name, const ConvSpec& ls, const ConvSpec& gs, Rng& rng) {
  auto reach = [](std::size_t k, std::size_t p) { return static_cast<long>(k) - 2 * static_cast<long>(p); };
  const bool same = ls.in_channels == gs.in_channels && ls.out_channels == gs.out_channels &&
                    ls.transposed == gs.transposed && ls.geom.stride_h == gs.geom.stride_h &&
                    ls.geom.stride_w == gs.geom.stride_w &&
                    reach(ls.kernel_h, ls.geom.pad_h) == reach(gs.kernel_h, gs.geom.pad_h) &&
                    reach(ls.kernel_w, ls.geom.pad_w) == reach(gs.kernel_w, gs.geom.pad_w);
  if (!same) {
    throw ConfigError("GLU block " + name + ": linear and gate convolutions produce different output shapes");
  }
  linear_conv = ConvLayer<T>(name + ".linear", ls, false, rng);
  gate_conv = ConvLayer<T>(name + ".gate", gs, false, rng);
  linear_norm = BatchNormLayer<T>(name + ".linear_norm", ls.out_channels);
  gate_norm = BatchNormLayer<T>(name + ".gate_norm", gs.out_channels);
}

}  // namespace facevc
