// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

#include "facevc/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace facevc {
namespace {

constexpr char kTensorMagic[4] = {'C', 'V', 'T', '1'};

static_assert(std::endian::native == std::endian::little, "only little-endian hosts are supported");

template <typename U>
void put(std::string& out, U v) {
  char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.append(buf, sizeof(U));
}

class Reader {
 public:
  Reader(std::string_view bytes, const std::string& what) : bytes_(bytes), what_(what) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    U v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }
  std::string_view take(std::size_t n) {
    need(n);
    std::string_view s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(what_ + ": truncated at byte " + std::to_string(pos_));
    }
  }
  std::string_view bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, std::string_view bytes) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw Error("cannot rename " + tmp.string() + " to " + path + ": " + ec.message());
}

std::string encode_tensor(const Tensor<double>& t, DType dtype) {
  if (t.rank() > 255) throw DimensionError("tensor rank exceeds 255");
  std::string out(kTensorMagic, 4);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
  for (std::size_t e : t.shape()) {
    if (e > 0xffffffffu) throw DimensionError("tensor extent exceeds u32");
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e));
  }
  out.reserve(out.size() + t.size() * (dtype == DType::f32 ? 4 : 8));
  for (double v : t.values()) {
    if (dtype == DType::f32) {
      put<float>(out, static_cast<float>(v));
    } else {
      put<double>(out, v);
    }
  }
  return out;
}

Tensor<double> decode_tensor(std::string_view bytes, const std::string& what) {
  Reader r(bytes, what);
  if (r.take(4) != std::string_view(kTensorMagic, 4)) throw FormatError(what + ": bad magic, expected CVT1");
  const auto dtype = r.get<std::uint8_t>();
  if (dtype > 1) throw FormatError(what + ": unknown dtype code " + std::to_string(dtype));
  const auto rank = r.get<std::uint8_t>();
  if (rank == 0) throw FormatError(what + ": rank 0");
  Shape shape(rank);
  for (auto& e : shape) {
    e = r.get<std::uint32_t>();
    if (e == 0) throw FormatError(what + ": zero extent");
  }
  const std::size_t n = shape_size(shape);
  const std::size_t width = dtype == 0 ? 4 : 8;
  if (r.remaining() != n * width) {
    throw FormatError(what + ": expected " + std::to_string(n * width) + " value bytes for shape " +
                      shape_string(shape) + ", found " + std::to_string(r.remaining()));
  }
  std::vector<double> values(n);
  for (auto& v : values) v = dtype == 0 ? static_cast<double>(r.get<float>()) : r.get<double>();
  return Tensor<double>(std::move(shape), std::move(values));
}

template <typename T>
void save_tensor(const std::string& path, const Tensor<T>& t) {
  const DType dtype = std::is_same_v<T, float> ? DType::f32 : DType::f64;
  write_file_atomic(path, encode_tensor(t.template cast<double>(), dtype));
}

Tensor<double> load_tensor(const std::string& path) { return decode_tensor(read_file(path), path); }

void save_features(const std::string& path, const Tensor<double>& features) {
  if (features.rank() != 2) throw DimensionError("features must be [D,N], got " + shape_string(features.shape()));
  write_file_atomic(path, encode_tensor(features, DType::f32));
}

Tensor<double> load_features(const std::string& path) {
  Tensor<double> t = load_tensor(path);
  if (t.rank() != 2) throw FormatError(path + ": features must be rank 2, got " + shape_string(t.shape()));
  return t;
}

double quantize_pixel(double v) {
  return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
}

void save_image(const std::string& path, const Tensor<double>& image) {
  if (!(image.rank() == 3 && image.dim(0) == 1) && image.rank() != 2) {
    throw DimensionError("image must be [1,I,J] or [I,J], got " + shape_string(image.shape()));
  }
  const std::size_t rows = image.dim(image.rank() - 2);
  const std::size_t cols = image.dim(image.rank() - 1);
  std::string out = "P5\n" + std::to_string(cols) + " " + std::to_string(rows) + "\n255\n";
  for (double v : image.values()) {
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(quantize_pixel(v) * 255.0))));
  }
  write_file_atomic(path, out);
}

Tensor<double> load_image(const std::string& path) {
  const std::string bytes = read_file(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw FormatError(path + ": truncated PGM header");
    return bytes.substr(start, pos - start);
  };
  if (token() != "P5") throw FormatError(path + ": not a binary PGM (P5)");
  std::size_t cols = 0, rows = 0, maxval = 0;
  try {
    cols = std::stoul(token());
    rows = std::stoul(token());
    maxval = std::stoul(token());
  } catch (const std::logic_error&) {
    throw FormatError(path + ": malformed PGM header");
  }
  if (cols == 0 || rows == 0 || maxval != 255) {
    throw FormatError(path + ": unsupported PGM geometry or maxval (need 8-bit)");
  }
  ++pos;  // single whitespace before the raster
  if (bytes.size() < pos || bytes.size() - pos != rows * cols) {
    throw FormatError(path + ": expected " + std::to_string(rows * cols) + " pixels");
  }
  Tensor<double> img({1, rows, cols});
  for (std::size_t i = 0; i < rows * cols; ++i) {
    img[i] = static_cast<unsigned char>(bytes[pos + i]) / 255.0;
  }
  return img;
}

template void save_tensor(const std::string&, const Tensor<float>&);
template void save_tensor(const std::string&, const Tensor<double>&);

}  // namespace facevc
