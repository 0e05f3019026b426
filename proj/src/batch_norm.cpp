// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <memory>

#include "facevc/autodiff.hpp"

namespace facevc {

template <typename T>
Var<T> batch_norm(Var<T> x, Var<T> gamma, Var<T> beta, RunningStats<T>& stats, Mode mode) {
  const Shape& s = x.shape();
  if (s.size() < 2) throw DimensionError("batch_norm expects [B,C,...], got " + shape_string(s));
  const std::size_t batch = s[0], channels = s[1], inner = x.size() / (batch * channels);
  if (gamma.shape() != Shape{channels} || beta.shape() != Shape{channels}) {
    throw DimensionError("batch_norm: gamma/beta " + shape_string(gamma.shape()) + "/" +
                         shape_string(beta.shape()) + " for input " + shape_string(s));
  }
  if (!stats.populated() || stats.mean.shape() != Shape{channels}) {
    throw ConfigError("batch_norm: running statistics missing or sized for a different layer");
  }
  if (mode == Mode::train && batch < 2) {
    throw DegenerateError("batch_norm in training mode needs a batch of at least 2, got 1");
  }

  const T eps = static_cast<T>(kBatchNormEpsilon);
  const T momentum = static_cast<T>(kBatchNormMomentum);
  const std::size_t count = batch * inner;
  auto xhat = std::make_shared<Tensor<T>>(s);
  auto inv_std = std::make_shared<std::vector<T>>(channels);
  const Tensor<T>& xv = x.value();

  for (std::size_t c = 0; c < channels; ++c) {
    T mean, var;
    if (mode == Mode::train) {
      T acc = 0;
      for (std::size_t n = 0; n < batch; ++n) {
        const T* row = xv.data() + (n * channels + c) * inner;
        for (std::size_t k = 0; k < inner; ++k) acc += row[k];
      }
      mean = acc / static_cast<T>(count);
      T sq = 0;
      for (std::size_t n = 0; n < batch; ++n) {
        const T* row = xv.data() + (n * channels + c) * inner;
        for (std::size_t k = 0; k < inner; ++k) sq += (row[k] - mean) * (row[k] - mean);
      }
      var = sq / static_cast<T>(count);
      const T unbiased = sq / static_cast<T>(count - 1);
      stats.mean[c] = (T(1) - momentum) * stats.mean[c] + momentum * mean;
      stats.var[c] = (T(1) - momentum) * stats.var[c] + momentum * unbiased;
    } else {
      mean = stats.mean[c];
      var = stats.var[c];
    }
    const T is = T(1) / std::sqrt(var + eps);
    (*inv_std)[c] = is;
    for (std::size_t n = 0; n < batch; ++n) {
      const std::size_t off = (n * channels + c) * inner;
      for (std::size_t k = 0; k < inner; ++k) (*xhat)[off + k] = (xv[off + k] - mean) * is;
    }
  }

  Tensor<T> y(s);
  const Tensor<T>& gv = gamma.value();
  const Tensor<T>& bv = beta.value();
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t off = (n * channels + c) * inner;
      for (std::size_t k = 0; k < inner; ++k) y[off + k] = gv[c] * (*xhat)[off + k] + bv[c];
    }

  const std::size_t ix = x.id(), ig = gamma.id(), ib = beta.id();
  return x.graph().record(
      std::move(y), {x, gamma, beta},
      [=](Graph<T>& g, std::size_t self) {
        const Tensor<T>& gy = g.upstream(self);
        const Tensor<T>& gv = g.value(ig);
        std::vector<T> sum_dy(channels, T(0)), sum_dy_xhat(channels, T(0));
        for (std::size_t n = 0; n < batch; ++n)
          for (std::size_t c = 0; c < channels; ++c) {
            const std::size_t off = (n * channels + c) * inner;
            for (std::size_t k = 0; k < inner; ++k) {
              sum_dy[c] += gy[off + k];
              sum_dy_xhat[c] += gy[off + k] * (*xhat)[off + k];
            }
          }
        if (g.requires_grad(ig)) {
          Tensor<T>& acc = g.accumulator(ig);
          for (std::size_t c = 0; c < channels; ++c) acc[c] += sum_dy_xhat[c];
        }
        if (g.requires_grad(ib)) {
          Tensor<T>& acc = g.accumulator(ib);
          for (std::size_t c = 0; c < channels; ++c) acc[c] += sum_dy[c];
        }
        if (!g.requires_grad(ix)) return;
        Tensor<T>& gx = g.accumulator(ix);
        const T inv_count = T(1) / static_cast<T>(count);
        for (std::size_t n = 0; n < batch; ++n)
          for (std::size_t c = 0; c < channels; ++c) {
            const std::size_t off = (n * channels + c) * inner;
            const T k_scale = gv[c] * (*inv_std)[c];
            for (std::size_t k = 0; k < inner; ++k) {
              if (mode == Mode::train) {
                gx[off + k] += k_scale * (gy[off + k] - inv_count * sum_dy[c] -
                                          (*xhat)[off + k] * inv_count * sum_dy_xhat[c]);
              } else {
                gx[off + k] += k_scale * gy[off + k];
              }
            }
          }
      });
}

template Var<float> batch_norm(Var<float>, Var<float>, Var<float>, RunningStats<float>&, Mode);
template Var<double> batch_norm(Var<double>, Var<double>, Var<double>, RunningStats<double>&, Mode);

}  // namespace facevc
