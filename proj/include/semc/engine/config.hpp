// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "semc/core/error.hpp"
#include "semc/core/tensor.hpp"

namespace semc::engine {

/// Flat dotted-key configuration store. The default key set is the universe:
/// config files and command-line overrides may only assign keys that already
/// exist, which turns typos into errors instead of silently ignored settings.
class Config {
 public:
  static Config defaults();

  /// Merge `key = value` lines from a text file. `#` starts a comment.
  void load_file(const std::string& path);

  /// Apply one `key=value` command-line override.
  void apply_override(const std::string& spec);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<Index> get_index_list(const std::string& key) const;

  void set(const std::string& key, const std::string& value);

  /// FNV-1a over the resolved snapshot; identifies a run's settings.
  std::uint64_t hash() const;

  /// Canonical sorted `key = value` text, suitable for `config.resolved`.
  std::string resolved_text() const;

 private:
  std::map<std::string, std::string> values_;

  void assign_known(const std::string& key, const std::string& value,
                    const std::string& origin);
};

}  // namespace semc::engine
