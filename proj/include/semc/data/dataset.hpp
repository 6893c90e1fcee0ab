// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "semc/core/rng.hpp"
#include "semc/core/tensor.hpp"

namespace semc::data {

struct ManifestEntry {
  std::string path;  // relative to the manifest's directory
  Index label = 0;
};

/// A validated dataset listing: ordered class names from `classes.txt` and
/// one entry per image row of `manifest.csv`.
struct DatasetManifest {
  std::string root;
  std::vector<std::string> class_names;
  std::vector<ManifestEntry> entries;

  Index num_classes() const { return Index(class_names.size()); }
  Index size() const { return Index(entries.size()); }
  std::string image_path(Index i) const;
  std::vector<Index> class_counts() const;
};

/// Load `manifest_csv` (header `path,label`; labels are class-name strings)
/// with its sibling `classes.txt`. Every referenced image must exist, paths
/// must be unique, every class must be represented, and at least two classes
/// are required.
DatasetManifest load_manifest(const std::string& manifest_csv);

struct SplitIndices {
  std::vector<Index> train, val, test;
};

/// Deterministic stratified split. Within each class the index order is
/// shuffled by a seed-derived stream and cut to the requested fractions, so
/// per-class proportions hold within one sample.
SplitIndices stratified_split(const DatasetManifest& manifest, double train_frac,
                              double val_frac, std::uint64_t seed);

}  // namespace semc::data
