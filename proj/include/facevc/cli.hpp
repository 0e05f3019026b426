// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>

namespace facevc {

// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,      // bad flags, missing options, bad configuration
  kExitData = 2,       // unreadable or malformed input files
  kExitNumerical = 3,  // training divergence or a failed gradient check
};

// Runs `facevc <subcommand> ...`; never reads standard input.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace facevc
