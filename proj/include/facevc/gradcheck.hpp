// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

// Central finite-difference checks of reverse-mode gradients in double
// precision. The error of one tensor is
//
//   max_i |analytic_i - numeric_i| / max(max_i |analytic_i|, max_i |numeric_i|, floor)
//
// so tensors with tiny gradients are judged against the floor rather than
// their own round-off.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "facevc/objectives.hpp"

namespace facevc {

inline constexpr double kGradCheckTolerance = 1e-4;
inline constexpr double kGradCheckStep = 1e-5;
inline constexpr double kGradCheckFloor = 1e-6;

struct GradCheckEntry {
  std::string name;
  double error = 0;
  std::size_t elements = 0;
  bool passed() const { return error < kGradCheckTolerance; }
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool passed() const;
  double max_error() const;
  void append(const GradCheckReport& other);
};

double relative_error(const Tensor<double>& analytic, const Tensor<double>& numeric,
                      double floor = kGradCheckFloor);

// Builds a scalar from the input variables; must be deterministic.
using ScalarFn = std::function<Var<double>(Graph<double>&, const std::vector<Var<double>>&)>;

// One entry per input tensor, named "<name>/<index>".
GradCheckReport check_function(const std::string& name, const std::vector<Tensor<double>>& inputs,
                               const ScalarFn& fn, double step = kGradCheckStep);

// Every differentiable op, each reduced to a scalar by a random weighting.
GradCheckReport grad_check_ops(std::uint64_t seed);

// The full J + lambda R objective on a small architecture, w.r.t. every
// parameter element, with the model noise re-seeded for each evaluation.
GradCheckReport grad_check_objective(std::uint64_t seed, const ObjectiveOptions& options = {},
                                     const ArchConfig& arch = ArchConfig::tiny());

GradCheckReport grad_check(std::uint64_t seed);

}  // namespace facevc
