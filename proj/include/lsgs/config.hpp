// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lsgs/datasets.hpp"
#include "lsgs/prior.hpp"
#include "lsgs/scoring.hpp"
#include "lsgs/vqvae.hpp"

namespace lsgs {

struct AggregationConfig {
    int k = 0;                                 // 0: twice the effective count
    int k_cap = 256;
    std::uint64_t subsample_cap = 1ull << 20;
    int kmeans_iters = 100;
    double kmeans_tol = 1e-6;
    int kmeans_restarts = 3;
    int finetune_steps = -1;                   // -1: a tenth of vqvae.train_steps
};

struct SynthConfig {
    int n_train = 128;
    int n_test = 32;
    int cell_size = 16;
    std::set<AnomalyKind> anomaly_kinds{AnomalyKind::texture_patch, AnomalyKind::structure_swap};
};

/// Every stage parameter of a run. Stage seeds derive from `seed`.
struct RunConfig {
    std::string profile = "desk";
    std::uint64_t seed = 1;
    Resolution resolution{64, 64};
    VqvaeConfig vqvae;
    int vqvae_log_every = 50;
    AggregationConfig aggregation;
    PriorConfig prior;          // n_codes and seq_len are filled from the vqvae checkpoint
    int prior_log_every = 100;
    ScoringConfig scoring;
    int sweep_size = 101;
    bool ablation_causal = true; // add the causal-attention comparator
    SynthConfig synth;

    /// Throws ConfigError naming the first offending key.
    void validate() const;

    std::uint64_t vqvae_seed() const { return seed; }
    std::uint64_t kmeans_seed() const { return seed + 1; }
    std::uint64_t subsample_seed() const { return seed + 2; }
    std::uint64_t finetune_seed() const { return seed + 3; }
    std::uint64_t prior_seed() const { return seed + 4; }
    std::uint64_t scoring_seed() const { return seed + 5; }
    std::uint64_t synth_seed() const { return seed; }

    int finetune_steps() const;
};

/// Named profile: "desk" (small, CPU-friendly) or "paper" (published
/// architecture constants). Throws ConfigError on an unknown name.
RunConfig profile_config(const std::string& name);

/// Ordered canonical `key = value` pairs.
std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& config);

/// Canonical text form; parse_config(format_config(c)) == c.
std::string format_config(const RunConfig& config);

/// Strict parser: `version = 1` required, unknown or duplicate keys rejected,
/// values validated. Keys not present keep the defaults of the document's
/// `profile` (desk when absent).
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// SHA-256 of the canonical text form, hex encoded.
std::string config_hash(const RunConfig& config);

} // namespace lsgs
