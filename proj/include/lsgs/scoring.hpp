// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lsgs/image.hpp"
#include "lsgs/prior.hpp"
#include "lsgs/vqvae.hpp"

namespace lsgs {

struct ScoringConfig {
    int restorations = 8;
    double k = 1.0;
    double temperature = 1.0;
    double epsilon = 1e-6;
    double fg_threshold = 0.02;
    bool use_foreground_mask = true;
    bool fuse_before_smooth = true;
    std::uint64_t seed = 0;
};

/// Reference reconstruction of the original code sequence plus n decodes of
/// prior-resampled sequences.
struct RestorationSet {
    Image x_hat;
    std::vector<Image> restorations;
    std::vector<std::uint64_t> seeds;
};

/// Y_i decodes resample_sequence(seed + i) for i = 1..n.
RestorationSet build_restorations(const VqvaeModel& vqvae, const PriorModel& prior, const Image& image, int n,
                                  double temperature, std::uint64_t seed);

struct WeightedScore {
    std::vector<double> weights; // softmax_i(k / (||x_hat - Y_i||_1 + eps))
    ScorePlane scores;           // sum_i w_i |x_hat - Y_i| (channel mean)
};

/// Throws ContractError on an empty restoration set; ConfigError when k or
/// eps is not positive.
WeightedScore anomaly_score(const RestorationSet& set, double k, double epsilon);

/// Threshold the per-pixel channel max at `threshold`, then a 3x3 closing.
Mask foreground_mask(const Image& image, double threshold = 0.02);

/// Stride-1, same-size pooling with edge-replicate padding.
ScorePlane min_pool(const ScorePlane& in, int kernel);
ScorePlane average_pool(const ScorePlane& in, int kernel);

/// 3x3 min-pool followed by 7x7 average-pool.
ScorePlane smooth(const ScorePlane& in);

ScorePlane apply_mask(const ScorePlane& scores, const Mask& mask);

struct ScoreProvenance {
    std::string input_id;
    std::string vqvae_hash;
    std::string prior_hash;
    int restorations = 0;
    double k = 0.0;
    double temperature = 0.0;
    std::uint64_t seed = 0;
};

struct AnomalyScoreMap {
    ScorePlane scores;
    ScoreProvenance provenance;
};

/// Full restoration scoring: smooth(anomaly_score(...) * foreground_mask).
ScorePlane score_image(const VqvaeModel& vqvae, const PriorModel& prior, const Image& image,
                       const ScoringConfig& config);

/// Reconstruction-only variant: |x - x_hat| with the same mask fusion and
/// smoothing.
ScorePlane reconstruction_score(const VqvaeModel& vqvae, const Image& image, const ScoringConfig& config);

/// Mask fusion and smoothing in the configured order.
ScorePlane postprocess(const ScorePlane& raw, const Image& image, const ScoringConfig& config);

/// `<base>.score` (magic, height, width, float32 LE grid), `<base>.png`
/// (min-max normalised 8-bit preview) and `<base>.meta` (key = value).
void write_score_map(const AnomalyScoreMap& map, const std::filesystem::path& base);
ScorePlane read_score_grid(const std::filesystem::path& score_file);

} // namespace lsgs
