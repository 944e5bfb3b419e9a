// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "lsgs/nn/adam.hpp"
#include "lsgs/nn/attention.hpp"
#include "lsgs/vqvae.hpp"

namespace lsgs {

/// Row-major flattening of a CodeGrid.
struct CodeSequence {
    int height = 0;
    int width = 0;
    std::vector<int> tokens;

    int length() const { return static_cast<int>(tokens.size()); }
    static CodeSequence from_grid(const CodeGrid& grid) { return {grid.height, grid.width, grid.indices}; }
    CodeGrid to_grid() const { return {height, width, tokens}; }
    friend bool operator==(const CodeSequence&, const CodeSequence&) = default;
};

/// Positions replaced by `tamper`, strictly increasing.
struct TamperRecord {
    std::vector<int> positions;
    std::vector<int> original_tokens;
    std::vector<int> replacement_tokens;

    bool empty() const { return positions.empty(); }
};

/// round-half-up(rate * length), at least 1 when rate > 0.
int tamper_count(int length, double rate);

/// Replaces tamper_count(L, rate) uniformly chosen positions with tokens drawn
/// uniformly from [0, n_codes); a replacement may equal the original.
std::pair<CodeSequence, TamperRecord> tamper(const CodeSequence& sequence, double rate, int n_codes,
                                             std::uint64_t seed);

struct PriorConfig {
    int n_codes = 128;
    int seq_len = 64;
    int layers = 4;
    int model_dim = 128;
    int heads = 4;
    int ff_dim = 512;
    bool causal = false; // comparator only; the restoration prior is bidirectional
    float learning_rate = 5e-4f;
    int batch_size = 32;
    int train_steps = 1500;
    double tamper_rate = 0.1;
    double beta = 0.01;
    bool mean_normalized_loss = false;
    int resample_iterations = 1;
    std::uint64_t seed = 1;
};

/// Bidirectional transformer over code sequences producing per-position
/// logits over the codebook.
class PriorModel {
public:
    PriorModel() = default;
    explicit PriorModel(const PriorConfig& config);

    const PriorConfig& config() const { return config_; }

    /// (L, n_codes) unnormalised log-probabilities. Throws DataError on an
    /// out-of-range token and ShapeError on a length mismatch.
    nn::Matrix conditional_logits(const CodeSequence& sequence) const;

    /// Forward + backward with a caller-supplied dL/dlogits function.
    /// Returns the loss it reports.
    double accumulate_gradients(const CodeSequence& input,
                                const std::function<double(const nn::Matrix& logits, nn::Matrix& dlogits)>& loss_fn);

    std::vector<nn::NamedParameter> parameters();

private:
    struct Cache;
    nn::Matrix forward(const CodeSequence& input, Cache* cache) const;
    void check_tokens(const CodeSequence& input) const;

    PriorConfig config_;
    nn::Parameter token_embedding_;    // (n_codes, D)
    nn::Parameter position_embedding_; // (L, D)
    std::vector<nn::TransformerBlock> blocks_;
    nn::LayerNorm final_norm_;
    nn::Linear head_;
};

/// Per-position cross-entropy of softmax(logits row) against target tokens.
std::vector<double> token_cross_entropy(const nn::Matrix& logits, const CodeSequence& target);

struct FocalLoss {
    double value = 0.0;
    nn::Matrix grad; // dL/dlogits
};

/// (1 - beta) * sum_{i in T} H(i) + beta * sum_{i not in T} H(i); each sum is
/// replaced by its mean when `mean_normalized`. Throws ConfigError when beta
/// is outside [0, 1].
FocalLoss focal_loss(const nn::Matrix& logits, const CodeSequence& target, const TamperRecord& record, double beta,
                     bool mean_normalized = false);

struct PriorTrainStats {
    double loss = 0.0;
};

using PriorLogFn = std::function<void(long step, const PriorTrainStats&)>;

/// Tamper-and-restore training on precomputed normal sequences. Each sequence
/// in a batch is tampered independently. Throws TrainingError on a
/// non-finite loss.
PriorTrainStats train_prior(PriorModel& model, std::span<const CodeSequence> sequences, const PriorLogFn& log = {},
                            int log_every = 100);

/// One forward pass per iteration; each position sampled independently from
/// softmax(logits / temperature), argmax when temperature == 0.
CodeSequence resample_sequence(const PriorModel& model, const CodeSequence& sequence, double temperature,
                               std::uint64_t seed);

/// Fraction of tampered positions whose argmax prediction equals the original.
double restoration_accuracy(const PriorModel& model, std::span<const CodeSequence> sequences, double rate,
                            std::uint64_t seed);

} // namespace lsgs
