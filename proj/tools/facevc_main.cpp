// Copyright 2026 The facevc Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "facevc/cli.hpp"

int main(int argc, char** argv) { return facevc::run_cli(argc, argv, std::cout, std::cerr); }
