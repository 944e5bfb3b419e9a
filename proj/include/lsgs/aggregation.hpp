// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lsgs/datasets.hpp"
#include "lsgs/vqvae.hpp"

namespace lsgs {

struct EncodingSource {
    std::string sample_id;
    int row = 0;
    int col = 0;
    friend bool operator==(const EncodingSource&, const EncodingSource&) = default;
};

/// Continuous encoder outputs gathered over a training split.
struct EncodingCorpus {
    nn::Matrix vectors; // (M, d)
    std::vector<EncodingSource> sources;

    std::size_t size() const { return sources.size(); }
};

/// One pass over `manifest` in order. When more than `cap` vectors are
/// produced, a seeded reservoir sample of exactly `cap` is kept (in stream
/// order). Throws ConfigError on an empty manifest or cap < 1.
EncodingCorpus extract_encodings(const VqvaeModel& model, const DatasetManifest& manifest, std::size_t cap,
                                 std::uint64_t seed);

/// Flat little-endian float32 array `<base>.bin` plus a provenance index
/// `<base>.txt` (one `id row col` line per vector).
void save_corpus(const EncodingCorpus& corpus, const std::filesystem::path& base);
EncodingCorpus load_corpus(const std::filesystem::path& base);

struct KMeansOptions {
    int k = 1;
    std::uint64_t seed = 0;
    int max_iters = 100;
    double tol = 1e-6; // stop when every center moves less than this
};

struct KMeansResult {
    Eigen::MatrixXd centers;     // (k, d)
    std::vector<int> assignment; // per point
    double inertia = 0.0;        // within-cluster sum of squares
    int iterations = 0;
};

/// k-means++ seeding then Lloyd iterations. Empty clusters are re-seeded with
/// the point of the largest cluster farthest from its center. Deterministic
/// given the seed. Throws ConfigError when k < 1 or there are fewer points
/// than clusters.
KMeansResult kmeans(const Eigen::MatrixXd& points, const KMeansOptions& options);

/// Runs `restarts` seeds (options.seed, options.seed + 1, ...) and keeps the
/// lowest inertia, earliest seed on ties.
KMeansResult kmeans_best_of(const Eigen::MatrixXd& points, const KMeansOptions& options, int restarts);

/// Replaces every codebook row with `centers` (row count may differ from the
/// old codebook); resets usage counters. Encoder and decoder are untouched.
void aggregate_codebook(VqvaeModel& model, const nn::Matrix& centers);

struct FinetuneResult {
    double reconstruction = 0.0; // mean L_rec over the split after fine-tuning
};

/// Continues the joint reconstruction + VQ objective for `steps` steps.
FinetuneResult finetune(VqvaeModel& model, const DatasetManifest& manifest, int steps, int batch_size,
                        float learning_rate, std::uint64_t seed, const TrainLogFn& log = {});

/// Cluster count: an explicit k when > 0, otherwise twice the effective count,
/// in both cases capped at `cap`.
int choose_cluster_count(int explicit_k, int effective_count, int cap);

} // namespace lsgs
