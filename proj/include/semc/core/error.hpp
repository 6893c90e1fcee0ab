// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace semc {

class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Mismatched tensor or feature-map dimensions.
class ShapeError : public Error {
  using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericalError : public Error {
  using Error::Error;
};

/// Invalid or inconsistent configuration values.
class ConfigError : public Error {
  using Error::Error;
};

/// Malformed datasets, labels, or predictions.
class DataError : public Error {
  using Error::Error;
};

/// An object was used in a state that violates its contract.
class StateError : public Error {
  using Error::Error;
};

/// Filesystem-level failures.
class IoError : public Error {
  using Error::Error;
};

/// Incompatible or corrupt checkpoint containers.
class CheckpointError : public Error {
  using Error::Error;
};

}  // namespace semc
