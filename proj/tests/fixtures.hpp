// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

// Small corpora, architectures and scratch directories for the tests.

#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "facevc/data.hpp"
#include "facevc/networks.hpp"

namespace facevc::testing_fixtures {

// Removed with its contents on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("facevc_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

// Generator settings matching small_arch(): 8 x 8 images, short sequences.
inline GenParams small_gen() {
  GenParams p;
  p.image_size = 8;
  p.min_frames = 16;
  p.max_frames = 32;
  p.period_min = 8;
  p.period_max = 24;
  p.center_jitter = 1;
  return p;
}

// 36-dimensional features and 8 x 8 images with a few channels per block.
inline ArchConfig small_arch() {
  ArchConfig a;
  a.latent_channels = 2;
  a.code_dim = 3;
  a.image_size = 8;
  a.utterance_channels = {4, 4};
  a.utterance_kernels = {{3, 3}, {4, 4}};
  a.utterance_strides = {{1, 1}, {2, 2}};
  a.voice_channels = {4, 4};
  a.voice_kernels = {{3, 3}, {4, 8}};
  a.voice_strides = {{1, 1}, {2, 4}};
  a.face_channels = {4, 8};
  return a;
}

inline std::vector<PairedExample> normalized(std::vector<PairedExample> pairs, const NormStats& norm) {
  for (auto& p : pairs) p.x = norm.normalize(p.x);
  return pairs;
}

}  // namespace facevc::testing_fixtures
