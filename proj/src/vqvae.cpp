// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#include "lsgs/vqvae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "lsgs/error.hpp"

namespace lsgs {

namespace {

int log2_exact(int r) {
    int k = 0;
    while ((1 << k) < r) ++k;
    if ((1 << k) != r || r < 2) throw ConfigError("downsampling rate must be a power of two >= 2, got " + std::to_string(r));
    return k;
}

LatentFeatureMap to_feature_map(const nn::Tensor3& z) {
    LatentFeatureMap map;
    map.height = z.height;
    map.width = z.width;
    map.values = z.as_matrix().transpose();
    return map;
}

nn::Tensor3 to_tensor(const LatentFeatureMap& map) {
    nn::Tensor3 z(map.dim(), map.height, map.width);
    z.as_matrix() = map.values.transpose();
    return z;
}

} // namespace

// ----------------------------------------------------------------- Codebook

void Codebook::assign(const nn::Matrix& rows) {
    embeddings.value = rows;
    embeddings.grad = nn::Matrix::Zero(rows.rows(), rows.cols());
    usage_counts.assign(static_cast<std::size_t>(rows.rows()), 0);
}

int nearest_code(const Codebook& codebook, std::span<const float> z_e) {
    const int n = codebook.size();
    const int d = codebook.dim();
    int best = 0;
    float best_dist = std::numeric_limits<float>::infinity();
    for (int i = 0; i < n; ++i) {
        const float* row = codebook.embeddings.value.row(i).data();
        float dist = 0.0f;
        for (int j = 0; j < d; ++j) {
            const float diff = z_e[static_cast<std::size_t>(j)] - row[j];
            dist += diff * diff;
        }
        if (dist < best_dist) {
            best_dist = dist;
            best = i;
        }
    }
    return best;
}

QuantizeResult quantize(Codebook& codebook, std::span<const float> z_e) {
    const int index = nearest_code(codebook, z_e);
    ++codebook.usage_counts[static_cast<std::size_t>(index)];
    const auto row = codebook.row(index);
    return {index, std::vector<float>(row.begin(), row.end())};
}

CodeGrid quantize_map(const Codebook& codebook, const LatentFeatureMap& z_map) {
    if (z_map.dim() != codebook.dim())
        throw ShapeError("latent dim " + std::to_string(z_map.dim()) + " != codebook dim " + std::to_string(codebook.dim()));
    CodeGrid grid{z_map.height, z_map.width, std::vector<int>(static_cast<std::size_t>(z_map.cells()))};
    for (int c = 0; c < z_map.cells(); ++c)
        grid.indices[static_cast<std::size_t>(c)] =
            nearest_code(codebook, {z_map.values.row(c).data(), static_cast<std::size_t>(z_map.dim())});
    return grid;
}

CodeGrid quantize_map(Codebook& codebook, const LatentFeatureMap& z_map) {
    CodeGrid grid = quantize_map(static_cast<const Codebook&>(codebook), z_map);
    for (int idx : grid.indices) ++codebook.usage_counts[static_cast<std::size_t>(idx)];
    return grid;
}

LatentFeatureMap lookup(const Codebook& codebook, const CodeGrid& grid) {
    LatentFeatureMap map;
    map.height = grid.height;
    map.width = grid.width;
    map.values.resize(static_cast<Eigen::Index>(grid.indices.size()), codebook.dim());
    for (std::size_t c = 0; c < grid.indices.size(); ++c) {
        const int idx = grid.indices[c];
        if (idx < 0 || idx >= codebook.size())
            throw DataError("code index " + std::to_string(idx) + " outside [0, " + std::to_string(codebook.size()) + ")");
        map.values.row(static_cast<Eigen::Index>(c)) = codebook.embeddings.value.row(idx);
    }
    return map;
}

VqLosses vq_losses(const Image& x, const Image& x_hat, const LatentFeatureMap& z_map,
                   const LatentFeatureMap& quantized_rows) {
    if (!x.same_shape(x_hat)) throw ShapeError("reconstruction shape differs from input");
    if (z_map.values.rows() != quantized_rows.values.rows() || z_map.values.cols() != quantized_rows.values.cols())
        throw ShapeError("latent map and quantized rows differ in shape");
    VqLosses out;
    double abs_sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) abs_sum += std::abs(static_cast<double>(x.data[i]) - x_hat.data[i]);
    out.reconstruction = abs_sum / static_cast<double>(x.size());
    const double sq = (z_map.values - quantized_rows.values).cast<double>().squaredNorm() / static_cast<double>(z_map.values.rows());
    // Same value, different gradient routing (stop-gradient on opposite sides).
    out.codebook_term = sq;
    out.commitment_term = sq;
    out.vq = out.codebook_term + out.commitment_term;
    return out;
}

// --------------------------------------------------------------- VqvaeModel

struct VqvaeModel::EncoderCache {
    std::vector<nn::Conv2d::Cache> down;
    std::vector<nn::Tensor3> down_out; // pre-activation outputs of each down conv
    std::vector<nn::ResidualBlock::Cache> res;
    nn::Tensor3 res_out;
    nn::Conv2d::Cache pre_quant;
};

struct VqvaeModel::DecoderCache {
    nn::Conv2d::Cache post_quant;
    std::vector<nn::ResidualBlock::Cache> res;
    nn::Tensor3 res_out;
    std::vector<nn::ConvTranspose2d::Cache> up;
    std::vector<nn::Tensor3> up_out;
};

VqvaeModel::VqvaeModel(const VqvaeConfig& config) : config_(config) {
    const int levels = log2_exact(config.downsampling);
    if (config.embedding_dim < 1 || config.n_codes < 1 || config.hidden_channels < 2 || config.image_channels < 1)
        throw ConfigError("vqvae dimensions must be positive");
    const int h = config.hidden_channels;
    const int half = std::max(1, h / 2);

    int in = config.image_channels;
    for (int i = 0; i < levels; ++i) {
        const int out = (i == 0 && levels > 1) ? half : h;
        down_.emplace_back(in, out, 4, 2, 1);
        in = out;
    }
    for (int i = 0; i < 2; ++i) enc_res_.emplace_back(h, config.residual_hidden);
    pre_quant_ = nn::Conv2d(h, config.embedding_dim, 1, 1, 0);

    post_quant_ = nn::Conv2d(config.embedding_dim, h, 3, 1, 1);
    for (int i = 0; i < 2; ++i) dec_res_.emplace_back(h, config.residual_hidden);
    in = h;
    for (int i = 0; i < levels; ++i) {
        const int out = (i == levels - 1) ? config.image_channels : (i == levels - 2 ? half : h);
        up_.emplace_back(in, out, 4, 2, 1);
        in = out;
    }

    std::mt19937_64 rng(config.seed);
    for (auto& c : down_) c.init(rng);
    for (auto& r : enc_res_) r.init(rng);
    pre_quant_.init(rng);
    post_quant_.init(rng);
    for (auto& r : dec_res_) r.init(rng);
    for (auto& c : up_) c.init(rng);

    nn::Matrix rows(config.n_codes, config.embedding_dim);
    const float bound = 1.0f / static_cast<float>(config.n_codes);
    std::uniform_real_distribution<float> dist(-bound, bound);
    for (Eigen::Index i = 0; i < rows.size(); ++i) rows.data()[i] = dist(rng);
    codebook_.assign(rows);
}

nn::Tensor3 VqvaeModel::run_encoder(const Image& x, EncoderCache* cache) const {
    nn::Tensor3 h = x;
    for (std::size_t i = 0; i < down_.size(); ++i) {
        nn::Conv2d::Cache* cc = nullptr;
        if (cache) cc = &cache->down.emplace_back();
        nn::Tensor3 out = down_[i].forward(h, cc);
        const bool last = i + 1 == down_.size();
        h = last ? out : nn::relu(out);
        if (cache) cache->down_out.push_back(std::move(out));
    }
    for (const auto& block : enc_res_) {
        nn::ResidualBlock::Cache* rc = nullptr;
        if (cache) rc = &cache->res.emplace_back();
        h = block.forward(h, rc);
    }
    if (cache) cache->res_out = h;
    return pre_quant_.forward(nn::relu(h), cache ? &cache->pre_quant : nullptr);
}

void VqvaeModel::backward_encoder(const EncoderCache& cache, const nn::Tensor3& dz) {
    nn::Tensor3 dh = nn::relu_backward(cache.res_out, pre_quant_.backward(cache.pre_quant, dz));
    for (std::size_t i = enc_res_.size(); i-- > 0;) dh = enc_res_[i].backward(cache.res[i], dh);
    for (std::size_t i = down_.size(); i-- > 0;) {
        if (i + 1 != down_.size()) dh = nn::relu_backward(cache.down_out[i], dh);
        dh = down_[i].backward(cache.down[i], dh);
    }
}

Image VqvaeModel::run_decoder(const nn::Tensor3& z, DecoderCache* cache) const {
    nn::Tensor3 h = post_quant_.forward(z, cache ? &cache->post_quant : nullptr);
    for (const auto& block : dec_res_) {
        nn::ResidualBlock::Cache* rc = nullptr;
        if (cache) rc = &cache->res.emplace_back();
        h = block.forward(h, rc);
    }
    if (cache) cache->res_out = h;
    h = nn::relu(h);
    for (std::size_t i = 0; i < up_.size(); ++i) {
        nn::ConvTranspose2d::Cache* uc = nullptr;
        if (cache) uc = &cache->up.emplace_back();
        nn::Tensor3 out = up_[i].forward(h, uc);
        const bool last = i + 1 == up_.size();
        h = last ? out : nn::relu(out);
        if (cache) cache->up_out.push_back(std::move(out));
    }
    return h;
}

nn::Tensor3 VqvaeModel::backward_decoder(const DecoderCache& cache, const Image& dy) {
    nn::Tensor3 dh = dy;
    for (std::size_t i = up_.size(); i-- > 0;) {
        if (i + 1 != up_.size()) dh = nn::relu_backward(cache.up_out[i], dh);
        dh = up_[i].backward(cache.up[i], dh);
    }
    dh = nn::relu_backward(cache.res_out, dh);
    for (std::size_t i = dec_res_.size(); i-- > 0;) dh = dec_res_[i].backward(cache.res[i], dh);
    return post_quant_.backward(cache.post_quant, dh);
}

void VqvaeModel::check_input(const Image& image) const {
    const int r = config_.downsampling;
    if (image.height % r != 0 || image.width % r != 0 || image.height == 0 || image.width == 0) {
        std::ostringstream os;
        os << "image " << image.height << "x" << image.width << " not divisible by downsampling rate " << r;
        throw ShapeError(os.str());
    }
    if (image.channels != config_.image_channels)
        throw ShapeError("image has " + std::to_string(image.channels) + " channels, model expects " +
                         std::to_string(config_.image_channels));
}

LatentFeatureMap VqvaeModel::encode(const Image& image) const {
    check_input(image);
    return to_feature_map(run_encoder(image, nullptr));
}

Image VqvaeModel::decode_latent(const LatentFeatureMap& z_q) const { return run_decoder(to_tensor(z_q), nullptr); }

Image VqvaeModel::decode(const CodeGrid& grid) const { return decode_latent(lookup(codebook_, grid)); }

CodeGrid VqvaeModel::encode_to_grid(const Image& image) const { return quantize_map(codebook_, encode(image)); }

Image VqvaeModel::reconstruct(const Image& image) const { return decode(encode_to_grid(image)); }

VqStepResult VqvaeModel::accumulate_gradients(const Image& image, float grad_scale) {
    check_input(image);
    EncoderCache enc;
    const nn::Tensor3 z = run_encoder(image, &enc);
    const LatentFeatureMap z_map = to_feature_map(z);
    const CodeGrid grid = quantize_map(codebook_, z_map);
    const LatentFeatureMap z_q = lookup(codebook_, grid);
    DecoderCache dec;
    const Image x_hat = run_decoder(to_tensor(z_q), &dec);

    VqStepResult result;
    result.losses = vq_losses(image, x_hat, z_map, z_q);

    // d mean|x_hat - x| / d x_hat
    Image dx_hat(x_hat.channels, x_hat.height, x_hat.width);
    const float inv_n = grad_scale / static_cast<float>(x_hat.size());
    for (std::size_t i = 0; i < x_hat.size(); ++i) {
        const float diff = x_hat.data[i] - image.data[i];
        dx_hat.data[i] = diff > 0.0f ? inv_n : (diff < 0.0f ? -inv_n : 0.0f);
    }
    const nn::Tensor3 dz_q = backward_decoder(dec, dx_hat);

    auto& grads = result.grads;
    grads.reconstruction_at_zq = dz_q.as_matrix().transpose();
    // Straight-through: quantisation treated as identity in the backward pass.
    grads.reconstruction_at_ze = grads.reconstruction_at_zq;

    const float cell_scale = 2.0f * grad_scale / static_cast<float>(z_map.cells());
    const nn::Matrix diff = z_map.values - z_q.values; // z_e - e
    grads.commitment_at_ze = diff * (cell_scale * config_.commitment_weight);
    grads.codebook_at_rows = -diff * cell_scale;
    for (int c = 0; c < z_map.cells(); ++c)
        codebook_.embeddings.grad.row(grid.indices[static_cast<std::size_t>(c)]) += grads.codebook_at_rows.row(c);

    LatentFeatureMap dz_e{z_map.height, z_map.width, grads.reconstruction_at_ze + grads.commitment_at_ze};
    backward_encoder(enc, to_tensor(dz_e));
    return result;
}

std::vector<nn::NamedParameter> VqvaeModel::network_parameters() {
    std::vector<nn::NamedParameter> out;
    for (std::size_t i = 0; i < down_.size(); ++i) down_[i].parameters("encoder.down" + std::to_string(i), out);
    for (std::size_t i = 0; i < enc_res_.size(); ++i) enc_res_[i].parameters("encoder.res" + std::to_string(i), out);
    pre_quant_.parameters("encoder.pre_quant", out);
    post_quant_.parameters("decoder.post_quant", out);
    for (std::size_t i = 0; i < dec_res_.size(); ++i) dec_res_[i].parameters("decoder.res" + std::to_string(i), out);
    for (std::size_t i = 0; i < up_.size(); ++i) up_[i].parameters("decoder.up" + std::to_string(i), out);
    return out;
}

std::vector<nn::NamedParameter> VqvaeModel::parameters() {
    auto out = network_parameters();
    out.push_back({"codebook.embeddings", &codebook_.embeddings});
    return out;
}

// ------------------------------------------------------------------ training

VqvaeTrainer::VqvaeTrainer(VqvaeModel& model, float learning_rate)
    : model_(model), optimizer_(model.parameters(), nn::AdamOptions{.lr = learning_rate}) {}

VqTrainStats VqvaeTrainer::train_step(std::span<const Image* const> batch) {
    if (batch.empty()) throw ContractError("empty training batch");
    optimizer_.zero_grad();
    const float scale = 1.0f / static_cast<float>(batch.size());
    VqTrainStats stats;
    for (const Image* img : batch) {
        const auto r = model_.accumulate_gradients(*img, scale);
        stats.reconstruction += r.losses.reconstruction;
        stats.vq += r.losses.codebook_term + model_.config().commitment_weight * r.losses.commitment_term;
    }
    stats.reconstruction /= static_cast<double>(batch.size());
    stats.vq /= static_cast<double>(batch.size());
    if (!std::isfinite(stats.reconstruction) || !std::isfinite(stats.vq))
        throw TrainingError("non-finite vqvae loss at step " + std::to_string(step_));
    optimizer_.step();
    ++step_;
    return stats;
}

VqTrainStats train_vqvae(VqvaeModel& model, std::span<const Image> images, int steps, int batch_size,
                         float learning_rate, std::uint64_t seed, const TrainLogFn& log, int log_every) {
    if (images.empty()) throw ConfigError("no training images");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    VqvaeTrainer trainer(model, learning_rate);
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order(images.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size();
    std::vector<const Image*> batch;
    VqTrainStats last;
    for (int s = 0; s < steps; ++s) {
        batch.clear();
        for (int b = 0; b < batch_size; ++b) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            batch.push_back(&images[order[cursor++]]);
        }
        last = trainer.train_step(batch);
        if (log && (s % log_every == 0 || s + 1 == steps)) log(s, last);
    }
    return last;
}

double mean_reconstruction_loss(const VqvaeModel& model, std::span<const Image> images) {
    if (images.empty()) return 0.0;
    double total = 0.0;
    for (const Image& img : images) {
        const Image x_hat = model.reconstruct(img);
        double s = 0.0;
        for (std::size_t i = 0; i < img.size(); ++i) s += std::abs(static_cast<double>(img.data[i]) - x_hat.data[i]);
        total += s / static_cast<double>(img.size());
    }
    return total / static_cast<double>(images.size());
}

CodebookUsage codebook_usage(VqvaeModel& model, std::span<const Image> images) {
    Codebook& cb = model.codebook();
    cb.reset_usage();
    for (const Image& img : images) quantize_map(cb, model.encode(img));
    CodebookUsage usage;
    usage.histogram = cb.usage_counts;
    usage.effective_count =
        static_cast<int>(std::count_if(usage.histogram.begin(), usage.histogram.end(), [](auto c) { return c > 0; }));
    return usage;
}

} // namespace lsgs
