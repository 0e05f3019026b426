// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace facevc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor extents that do not fit an operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Inconsistent architecture / training / run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed, truncated or mismatched file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Sequence too short for the encoder downsampling.
class LengthError : public Error {
 public:
  using Error::Error;
};

// Batch norm in training mode with a single example, probe with a single class, ...
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or activations during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace facevc
