// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#include "semc/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

namespace semc::data {

namespace fs = std::filesystem;

namespace {

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::vector<std::string> read_class_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> names;
  std::unordered_set<std::string> seen;
  std::string line;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    if (!seen.insert(line).second) {
      throw DataError("classes.txt: duplicate class name '" + line + "'");
    }
    names.push_back(line);
  }
  if (names.size() < 2) {
    throw DataError("classes.txt: need at least two classes, found " +
                    std::to_string(names.size()));
  }
  return names;
}

}  // namespace

std::string DatasetManifest::image_path(Index i) const {
  return (fs::path(root) / entries[std::size_t(i)].path).string();
}

std::vector<Index> DatasetManifest::class_counts() const {
  std::vector<Index> counts(std::size_t(num_classes()), 0);
  for (const auto& e : entries) ++counts[std::size_t(e.label)];
  return counts;
}

DatasetManifest load_manifest(const std::string& manifest_csv) {
  const fs::path csv_path(manifest_csv);
  if (!fs::exists(csv_path)) throw IoError("manifest not found: " + manifest_csv);
  const fs::path root = csv_path.parent_path();

  DatasetManifest m;
  m.root = root.string();
  m.class_names = read_class_file(root / "classes.txt");

  std::unordered_map<std::string, Index> class_ids;
  for (std::size_t i = 0; i < m.class_names.size(); ++i) {
    class_ids.emplace(m.class_names[i], Index(i));
  }

  std::ifstream in(csv_path);
  if (!in) throw IoError("cannot open " + manifest_csv);
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != "path,label") {
    throw DataError("manifest: first line must be the header 'path,label'");
  }

  std::unordered_set<std::string> seen_paths;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos || comma == 0 || comma + 1 == line.size()) {
      throw DataError("manifest line " + std::to_string(line_no) + ": expected 'path,label'");
    }
    std::string path = line.substr(0, comma);
    const std::string label = line.substr(comma + 1);
    const auto it = class_ids.find(label);
    if (it == class_ids.end()) {
      throw DataError("manifest line " + std::to_string(line_no) + ": unknown label '" +
                      label + "'");
    }
    if (!seen_paths.insert(path).second) {
      throw DataError("manifest: duplicate path '" + path + "'");
    }
    if (!fs::exists(root / path)) {
      throw IoError("manifest references a missing image: " + (root / path).string());
    }
    m.entries.push_back({std::move(path), it->second});
  }

  const auto counts = m.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) {
      throw DataError("manifest: class '" + m.class_names[c] + "' has no samples");
    }
  }
  return m;
}

SplitIndices stratified_split(const DatasetManifest& manifest, double train_frac,
                              double val_frac, std::uint64_t seed) {
  if (train_frac <= 0.0 || val_frac < 0.0 || train_frac + val_frac > 1.0) {
    throw ConfigError("split: fractions must satisfy 0 < train, 0 <= val, train+val <= 1");
  }

  std::vector<std::vector<Index>> by_class(std::size_t(manifest.num_classes()));
  for (Index i = 0; i < manifest.size(); ++i) {
    by_class[std::size_t(manifest.entries[std::size_t(i)].label)].push_back(i);
  }

  Rng root(seed);
  SplitIndices out;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    Rng rng = root.fork(std::uint64_t(c));
    for (Index i = Index(idx.size()) - 1; i > 0; --i) {
      std::swap(idx[std::size_t(i)], idx[std::size_t(rng.uniform_int(i + 1))]);
    }
    const auto n = Index(idx.size());
    const Index n_train = Index(std::lround(train_frac * double(n)));
    const Index n_val = std::min(Index(std::lround(val_frac * double(n))), n - n_train);
    for (Index i = 0; i < n; ++i) {
      if (i < n_train) {
        out.train.push_back(idx[std::size_t(i)]);
      } else if (i < n_train + n_val) {
        out.val.push_back(idx[std::size_t(i)]);
      } else {
        out.test.push_back(idx[std::size_t(i)]);
      }
    }
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

}  // namespace semc::data
