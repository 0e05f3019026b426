// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

#include "facevc/gaussian.hpp"

#include <cmath>
#include <numbers>

namespace facevc {

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;  // ln(2 pi) / 2
}

template <typename T>
DiagGaussian<T>::DiagGaussian(Var<T> mean, Var<T> var) : mean_(mean), var_(var) {
  if (mean.shape() != var.shape()) {
    throw DimensionError("DiagGaussian: mean " + shape_string(mean.shape()) + " vs variance " +
                         shape_string(var.shape()));
  }
  for (T v : var.value().values()) {
    if (v <= T(0)) throw Error("DiagGaussian: variance must be strictly positive");
  }
}

template <typename T>
Var<T> kl_to_standard_normal(const DiagGaussian<T>& q) {
  const Tensor<T>& mu = q.mean().value();
  const Tensor<T>& s2 = q.var().value();
  T acc = 0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    acc += mu[i] * mu[i] + s2[i] - std::log(s2[i]) - T(1);
  }
  const std::size_t im = q.mean().id(), iv = q.var().id();
  return q.mean().graph().record(
      Tensor<T>({1}, T(0.5) * acc), {q.mean(), q.var()}, [im, iv](Graph<T>& g, std::size_t self) {
        const T gy = g.upstream(self)[0];
        if (g.requires_grad(im)) {
          const Tensor<T>& mu = g.value(im);
          Tensor<T>& acc = g.accumulator(im);
          for (std::size_t i = 0; i < mu.size(); ++i) acc[i] += gy * mu[i];
        }
        if (g.requires_grad(iv)) {
          const Tensor<T>& s2 = g.value(iv);
          Tensor<T>& acc = g.accumulator(iv);
          for (std::size_t i = 0; i < s2.size(); ++i) acc[i] += gy * T(0.5) * (T(1) - T(1) / s2[i]);
        }
      });
}

template <typename T>
Var<T> log_density(const DiagGaussian<T>& q, Var<T> x) {
  if (x.shape() != q.shape()) {
    throw DimensionError("log_density: point " + shape_string(x.shape()) + " vs distribution " +
                         shape_string(q.shape()));
  }
  const Tensor<T>& mu = q.mean().value();
  const Tensor<T>& s2 = q.var().value();
  const Tensor<T>& xv = x.value();
  T acc = 0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const T d = xv[i] - mu[i];
    acc += -T(kHalfLog2Pi) - T(0.5) * std::log(s2[i]) - d * d / (T(2) * s2[i]);
  }
  const std::size_t im = q.mean().id(), iv = q.var().id(), ix = x.id();
  return x.graph().record(
      Tensor<T>({1}, acc), {q.mean(), q.var(), x}, [im, iv, ix](Graph<T>& g, std::size_t self) {
        const T gy = g.upstream(self)[0];
        const Tensor<T>& mu = g.value(im);
        const Tensor<T>& s2 = g.value(iv);
        const Tensor<T>& xv = g.value(ix);
        const std::size_t n = mu.size();
        if (g.requires_grad(im)) {
          Tensor<T>& acc = g.accumulator(im);
          for (std::size_t i = 0; i < n; ++i) acc[i] += gy * (xv[i] - mu[i]) / s2[i];
        }
        if (g.requires_grad(ix)) {
          Tensor<T>& acc = g.accumulator(ix);
          for (std::size_t i = 0; i < n; ++i) acc[i] -= gy * (xv[i] - mu[i]) / s2[i];
        }
        if (g.requires_grad(iv)) {
          Tensor<T>& acc = g.accumulator(iv);
          for (std::size_t i = 0; i < n; ++i) {
            const T d = xv[i] - mu[i];
            acc[i] += gy * T(0.5) * (d * d / (s2[i] * s2[i]) - T(1) / s2[i]);
          }
        }
      });
}

template <typename T>
Var<T> sample_reparameterized(const DiagGaussian<T>& q, const Tensor<T>& epsilon) {
  if (epsilon.shape() != q.shape()) {
    throw DimensionError("sample_reparameterized: noise " + shape_string(epsilon.shape()) +
                         " vs distribution " + shape_string(q.shape()));
  }
  const Tensor<T>& mu = q.mean().value();
  const Tensor<T>& s2 = q.var().value();
  Tensor<T> y(mu.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = mu[i] + std::sqrt(s2[i]) * epsilon[i];
  const std::size_t im = q.mean().id(), iv = q.var().id();
  return q.mean().graph().record(
      std::move(y), {q.mean(), q.var()}, [im, iv, epsilon](Graph<T>& g, std::size_t self) {
        const Tensor<T>& gy = g.upstream(self);
        if (g.requires_grad(im)) {
          Tensor<T>& acc = g.accumulator(im);
          for (std::size_t i = 0; i < gy.size(); ++i) acc[i] += gy[i];
        }
        if (g.requires_grad(iv)) {
          const Tensor<T>& s2 = g.value(iv);
          Tensor<T>& acc = g.accumulator(iv);
          for (std::size_t i = 0; i < gy.size(); ++i) {
            acc[i] += gy[i] * epsilon[i] / (T(2) * std::sqrt(s2[i]));
          }
        }
      });
}

double kl_to_standard_normal(std::span<const double> mean, std::span<const double> var) {
  if (mean.size() != var.size()) throw DimensionError("kl_to_standard_normal: size mismatch");
  double acc = 0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    if (!(var[i] > 0)) throw Error("kl_to_standard_normal: variance must be strictly positive");
    acc += mean[i] * mean[i] + var[i] - std::log(var[i]) - 1.0;
  }
  return 0.5 * acc;
}

double log_density(std::span<const double> mean, std::span<const double> var,
                   std::span<const double> x) {
  if (mean.size() != var.size() || mean.size() != x.size()) {
    throw DimensionError("log_density: size mismatch");
  }
  double acc = 0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    if (!(var[i] > 0)) throw Error("log_density: variance must be strictly positive");
    const double d = x[i] - mean[i];
    acc += -kHalfLog2Pi - 0.5 * std::log(var[i]) - d * d / (2.0 * var[i]);
  }
  return acc;
}

#define FACEVC_INSTANTIATE_GAUSSIAN(T)                                    \
  template class DiagGaussian<T>;                                         \
  template Var<T> kl_to_standard_normal(const DiagGaussian<T>&);          \
  template Var<T> log_density(const DiagGaussian<T>&, Var<T>);            \
  template Var<T> sample_reparameterized(const DiagGaussian<T>&, const Tensor<T>&);

FACEVC_INSTANTIATE_GAUSSIAN(float)
FACEVC_INSTANTIATE_GAUSSIAN(double)

}  // namespace facevc
