// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

// Value parsing for flat key=value configuration. Every parse error is a
// ConfigError naming the key.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace facevc {

using KeyValues = std::map<std::string, std::string>;

std::size_t parse_size(const std::string& key, const std::string& text);
std::uint64_t parse_u64(const std::string& key, const std::string& text);
double parse_double(const std::string& key, const std::string& text);
// Accepts 1/0, true/false, yes/no, on/off.
bool parse_bool(const std::string& key, const std::string& text);
std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& text);

// Shortest text that parses back to the same double.
std::string format_double(double v);
std::string join_sizes(const std::vector<std::size_t>& v);
std::vector<std::string> split(const std::string& text, char sep);
std::string trim(const std::string& s);

// Keys of `kv` that start with `prefix`.
KeyValues with_prefix(const KeyValues& kv, const std::string& prefix);

}  // namespace facevc
