// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace semc::cli {

/// Parse and execute one command line (arguments without the program name).
/// Returns the process exit code: 0 on success, 1 on runtime failure, 2 on a
/// usage or configuration error.
int run(const std::vector<std::string>& args);

}  // namespace semc::cli
