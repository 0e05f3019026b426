// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

// Diagonal Gaussian primitives: closed-form KL to N(0, I), log-density and
// reparameterised sampling. All reductions are plain sums over every element.

#pragma once

#include "facevc/autodiff.hpp"

namespace facevc {

template <typename T>
class DiagGaussian {
 public:
  // Throws DimensionError on shape mismatch and Error when any variance <= 0
  // (NaN passes through so the objective reports it).
  DiagGaussian(Var<T> mean, Var<T> var);

  Var<T> mean() const { return mean_; }
  Var<T> var() const { return var_; }
  const Shape& shape() const { return mean_.shape(); }

 private:
  Var<T> mean_;
  Var<T> var_;
};

// Shape-only marker for N(0, I).
struct StandardNormalPrior {
  Shape shape;
};

// 1/2 * sum(mu^2 + s2 - ln s2 - 1)
template <typename T>
Var<T> kl_to_standard_normal(const DiagGaussian<T>& q);

// sum(-1/2 ln 2pi - 1/2 ln s2 - (x - mu)^2 / (2 s2))
template <typename T>
Var<T> log_density(const DiagGaussian<T>& q, Var<T> x);

// mu + sqrt(s2) * eps; eps is treated as a constant.
template <typename T>
Var<T> sample_reparameterized(const DiagGaussian<T>& q, const Tensor<T>& epsilon);

// Plain-value versions for scalar checks and tools.
double kl_to_standard_normal(std::span<const double> mean, std::span<const double> var);
double log_density(std::span<const double> mean, std::span<const double> var,
                   std::span<const double> x);

}  // namespace facevc
