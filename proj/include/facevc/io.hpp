// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

// File formats.
//
// CVT1 tensor file, little-endian:
//   "CVT1" | u8 dtype (0 = f32, 1 = f64) | u8 rank | rank x u32 extents | values
//
// Images are 8-bit binary PGM (P5, maxval 255) holding one [1,I,J] channel in
// [0,1]; pixels are rounded to the nearest multiple of 1/255 on save.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "facevc/tensor.hpp"

namespace facevc {

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

// Writes with the dtype of T.
template <typename T>
void save_tensor(const std::string& path, const Tensor<T>& t);
// Either dtype; f32 values widen exactly.
Tensor<double> load_tensor(const std::string& path);

std::string encode_tensor(const Tensor<double>& t, DType dtype);
Tensor<double> decode_tensor(std::string_view bytes, const std::string& what);

// Features [D,N] are stored as f32.
void save_features(const std::string& path, const Tensor<double>& features);
Tensor<double> load_features(const std::string& path);

void save_image(const std::string& path, const Tensor<double>& image);
Tensor<double> load_image(const std::string& path);
// Nearest 8-bit level, clamped to [0,1].
double quantize_pixel(double v);

std::string read_file(const std::string& path);
// Writes to a sibling temporary and renames it over `path`.
void write_file_atomic(const std::string& path, std::string_view bytes);

}  // namespace facevc
