// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#include <string>
#include <vector>

#include "semc/cli/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return semc::cli::run(args);
}
