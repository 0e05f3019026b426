// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "facevc/tensor.hpp"

namespace facevc {

// Seeded generator whose whole state is the underlying engine, so it can be
// checkpointed as text and resumed exactly. Normal draws use Box-Muller without
// caching the second variate.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  double normal();

  template <typename T>
  Tensor<T> normal_tensor(const Shape& shape) {
    Tensor<T> t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(normal());
    return t;
  }

  std::string state() const;
  void set_state(const std::string& text);

  friend bool operator==(const Rng& a, const Rng& b) { return a.engine_ == b.engine_; }

 private:
  std::mt19937_64 engine_;
};

// splitmix64 finaliser; used to derive independent per-item seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace facevc
