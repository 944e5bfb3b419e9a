// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lsgs/image.hpp"
#include "lsgs/nn/adam.hpp"
#include "lsgs/nn/conv.hpp"

namespace lsgs {

struct VqvaeConfig {
    int image_channels = 1;
    int downsampling = 8;       // power of two; one stride-2 block per factor of 2
    int embedding_dim = 64;     // d
    int n_codes = 128;
    int hidden_channels = 64;
    int residual_hidden = 32;
    float commitment_weight = 1.0f;
    float learning_rate = 2e-4f;
    int batch_size = 32;
    int train_steps = 1000;
    std::uint64_t seed = 1;
};

/// Ordered embedding vectors plus per-row quantisation counts.
struct Codebook {
    nn::Parameter embeddings; // (n_codes, d)
    std::vector<std::uint64_t> usage_counts;

    int size() const { return static_cast<int>(embeddings.value.rows()); }
    int dim() const { return static_cast<int>(embeddings.value.cols()); }
    void reset_usage() { std::fill(usage_counts.begin(), usage_counts.end(), 0); }
    std::span<const float> row(int i) const {
        return {embeddings.value.row(i).data(), static_cast<std::size_t>(dim())};
    }

    /// Replaces every row; counters are reset.
    void assign(const nn::Matrix& rows);
};

/// Continuous encoder output: one d-vector per spatial cell, rows in
/// row-major cell order.
struct LatentFeatureMap {
    int height = 0;
    int width = 0;
    nn::Matrix values; // (height*width, d)

    int cells() const { return height * width; }
    int dim() const { return static_cast<int>(values.cols()); }
};

struct CodeGrid {
    int height = 0;
    int width = 0;
    std::vector<int> indices; // row-major

    int& at(int y, int x) { return indices[static_cast<std::size_t>(y) * width + x]; }
    int at(int y, int x) const { return indices[static_cast<std::size_t>(y) * width + x]; }
    friend bool operator==(const CodeGrid&, const CodeGrid&) = default;
};

struct QuantizeResult {
    int index = 0;
    std::vector<float> embedding;
};

/// Index of the nearest row under Euclidean distance, ties to the smallest
/// index. Does not touch usage counters.
int nearest_code(const Codebook& codebook, std::span<const float> z_e);

/// Minimum-distance quantisation; increments usage_counts[index].
QuantizeResult quantize(Codebook& codebook, std::span<const float> z_e);

/// Per-cell quantisation. The counting overload updates usage counters; the
/// const overload is the read-only inference path.
CodeGrid quantize_map(Codebook& codebook, const LatentFeatureMap& z_map);
CodeGrid quantize_map(const Codebook& codebook, const LatentFeatureMap& z_map);

/// Rows of the codebook selected by `grid`, same layout as LatentFeatureMap.
LatentFeatureMap lookup(const Codebook& codebook, const CodeGrid& grid);

struct VqLosses {
    double reconstruction = 0.0; // mean |x - x_hat|
    double codebook_term = 0.0;  // mean over cells of ||sg[z_e] - e||^2
    double commitment_term = 0.0;// mean over cells of ||sg[e] - z_e||^2 (unweighted)
    double vq = 0.0;             // codebook_term + commitment_term
};

/// Loss values. `quantized_rows` holds the selected embedding per cell.
VqLosses vq_losses(const Image& x, const Image& x_hat, const LatentFeatureMap& z_map,
                   const LatentFeatureMap& quantized_rows);

/// Gradients produced by one image, exposed for inspection.
struct VqGradients {
    nn::Matrix reconstruction_at_zq; // dL_rec/dz_q, (cells, d)
    nn::Matrix reconstruction_at_ze; // straight-through copy delivered to the encoder
    nn::Matrix commitment_at_ze;     // d(weight * commitment_term)/dz_e
    nn::Matrix codebook_at_rows;     // d(codebook_term)/de per cell, (cells, d)
};

struct VqStepResult {
    VqLosses losses;
    VqGradients grads;
};

class VqvaeModel {
public:
    VqvaeModel() = default;
    explicit VqvaeModel(const VqvaeConfig& config);

    const VqvaeConfig& config() const { return config_; }
    Codebook& codebook() { return codebook_; }
    const Codebook& codebook() const { return codebook_; }

    /// Throws ShapeError if H or W is not divisible by the downsampling rate.
    LatentFeatureMap encode(const Image& image) const;
    /// Throws DataError on an out-of-range index.
    Image decode(const CodeGrid& grid) const;
    Image decode_latent(const LatentFeatureMap& z_q) const;
    /// encode -> quantize (read-only) -> decode.
    Image reconstruct(const Image& image) const;
    CodeGrid encode_to_grid(const Image& image) const;

    /// Forward + backward for one image. Gradients are scaled by `grad_scale`
    /// and accumulated into the parameters; usage counters are updated.
    VqStepResult accumulate_gradients(const Image& image, float grad_scale);

    std::vector<nn::NamedParameter> parameters();
    /// Encoder and decoder parameters only (no codebook).
    std::vector<nn::NamedParameter> network_parameters();

private:
    struct EncoderCache;
    void check_input(const Image& image) const;
    struct DecoderCache;
    nn::Tensor3 run_encoder(const Image& x, EncoderCache* cache) const;
    Image run_decoder(const nn::Tensor3& z, DecoderCache* cache) const;
    nn::Tensor3 backward_decoder(const DecoderCache& cache, const Image& dy);
    void backward_encoder(const EncoderCache& cache, const nn::Tensor3& dz);

    VqvaeConfig config_;
    std::vector<nn::Conv2d> down_;
    std::vector<nn::ResidualBlock> enc_res_;
    nn::Conv2d pre_quant_;
    nn::Conv2d post_quant_;
    std::vector<nn::ResidualBlock> dec_res_;
    std::vector<nn::ConvTranspose2d> up_;
    Codebook codebook_;
};

struct VqTrainStats {
    double reconstruction = 0.0;
    double vq = 0.0;
};

/// Single-writer trainer: owns the optimizer state for one model.
class VqvaeTrainer {
public:
    VqvaeTrainer(VqvaeModel& model, float learning_rate);

    /// One optimizer step on the mean loss over `batch`: L_rec + L_VQ.
    /// Throws TrainingError on a non-finite loss.
    VqTrainStats train_step(std::span<const Image* const> batch);

    long step_index() const { return step_; }

private:
    VqvaeModel& model_;
    nn::Adam optimizer_;
    long step_ = 0;
};

using TrainLogFn = std::function<void(long step, const VqTrainStats&)>;

/// Runs `steps` optimizer steps over `images`, sampling batches by seeded
/// epoch shuffles. Returns the stats of the last step.
VqTrainStats train_vqvae(VqvaeModel& model, std::span<const Image> images, int steps, int batch_size,
                         float learning_rate, std::uint64_t seed, const TrainLogFn& log = {}, int log_every = 50);

/// Mean L_rec over `images` in inference mode.
double mean_reconstruction_loss(const VqvaeModel& model, std::span<const Image> images);

struct CodebookUsage {
    std::vector<std::uint64_t> histogram;
    int effective_count = 0;
};

/// Resets counters, quantises every image once, returns the histogram and
/// the number of rows used at least once.
CodebookUsage codebook_usage(VqvaeModel& model, std::span<const Image> images);

} // namespace lsgs
