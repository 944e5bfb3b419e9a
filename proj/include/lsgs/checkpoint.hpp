// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "lsgs/prior.hpp"
#include "lsgs/vqvae.hpp"

namespace lsgs {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Versioned binary container: kind, model config, free-form metadata, named
/// float32 arrays and named uint64 counter arrays, all in insertion order.
struct Checkpoint {
    std::string kind;
    KeyValues config;
    KeyValues meta;
    std::vector<std::pair<std::string, nn::Matrix>> arrays;
    std::vector<std::pair<std::string, std::vector<std::uint64_t>>> counters;

    /// Empty string when absent.
    std::string meta_value(const std::string& key) const;
    void set_meta(const std::string& key, const std::string& value);
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
/// Throws DataError on a missing, truncated or foreign file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

KeyValues vqvae_config_entries(const VqvaeConfig& config);
KeyValues prior_config_entries(const PriorConfig& config);

/// Model <-> container. Loading throws ConfigError when the stored config key
/// set differs from the expected one or a value does not parse, and DataError
/// when an array is missing or misshapen. The codebook may hold any number of
/// rows of the configured width.
Checkpoint to_checkpoint(VqvaeModel& model);
VqvaeModel vqvae_from_checkpoint(const Checkpoint& checkpoint);
Checkpoint to_checkpoint(PriorModel& model);
PriorModel prior_from_checkpoint(const Checkpoint& checkpoint);

} // namespace lsgs
