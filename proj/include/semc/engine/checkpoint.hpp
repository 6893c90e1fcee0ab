// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "semc/engine/optimizer.hpp"
#include "semc/model/semc_model.hpp"

namespace semc::engine {

/// Bookkeeping stored alongside the tensors: which settings produced the run,
/// how many epochs completed, and the trainer's stream states.
struct CheckpointMeta {
  std::uint64_t config_hash = 0;
  std::uint64_t epochs_completed = 0;
  std::vector<std::array<std::uint64_t, 4>> rng_states;
};

/// Single-file versioned container (native byte order): parameters, running
/// statistics, optimizer velocities, and the contrastive queue, all keyed by
/// name so a round-trip restores them bitwise.
void save_checkpoint(const std::string& path, SemcModel<float>& model,
                     const SgdMomentum<float>* optimizer, const CheckpointMeta& meta);

/// Restore into an already constructed model. The stored config hash must
/// equal `expected_config_hash`, and every stored tensor must match a model
/// tensor of the same name and shape; any mismatch raises CheckpointError.
/// Pass a null optimizer to skip velocity restoration.
CheckpointMeta load_checkpoint(const std::string& path, SemcModel<float>& model,
                               SgdMomentum<float>* optimizer,
                               std::uint64_t expected_config_hash);

}  // namespace semc::engine
