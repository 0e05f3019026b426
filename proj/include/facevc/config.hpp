// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

// Flat key=value run configuration shared by the command-line tools.
//
//   # comment
//   train.steps = 5000
//   arch.code_dim = 16
//   path.data = corpus/manifest.csv
//
// Keys are train.*, arch.*, gen.* and path.*; unknown or repeated keys are
// rejected with the line number.

#pragma once

#include <string>
#include <vector>

#include "facevc/data.hpp"
#include "facevc/kv.hpp"
#include "facevc/trainer.hpp"

namespace facevc {

struct RunConfig {
  TrainConfig train;
  ArchConfig arch;
  GenParams gen;
  std::string data_path;  // path.data
  std::string out_dir;    // path.out

  KeyValues to_map() const;
  static RunConfig from_map(const KeyValues& kv);

  // Sorted key = value lines.
  std::string serialize() const;
  static RunConfig parse(const std::string& text, const std::string& source = "<config>");
  static RunConfig load(const std::string& path);

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

struct KeyDoc {
  std::string key;
  std::string doc;
};

// One entry per accepted key.
const std::vector<KeyDoc>& config_key_docs();

// Default configuration with every key preceded by its documentation.
std::string documented_defaults();

// Parses key=value text without interpreting keys.
KeyValues parse_key_values(const std::string& text, const std::string& source);

}  // namespace facevc
