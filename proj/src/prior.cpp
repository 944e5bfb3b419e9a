// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#include "lsgs/prior.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lsgs/error.hpp"

namespace lsgs {

int tamper_count(int length, double rate) {
    if (rate <= 0.0 || length <= 0) return 0;
    const int n = static_cast<int>(std::floor(rate * length + 0.5));
    return std::clamp(n, 1, length);
}

std::pair<CodeSequence, TamperRecord> tamper(const CodeSequence& sequence, double rate, int n_codes,
                                             std::uint64_t seed) {
    if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("tamper rate must lie in [0, 1]");
    if (n_codes < 1) throw ConfigError("n_codes must be >= 1");
    const int len = sequence.length();
    const int count = tamper_count(len, rate);
    std::mt19937_64 rng(seed);
    std::vector<int> idx(static_cast<std::size_t>(len));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < count; ++i) {
        std::uniform_int_distribution<int> pick(i, len - 1);
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
    }
    std::vector<int> positions(idx.begin(), idx.begin() + count);
    std::sort(positions.begin(), positions.end());

    CodeSequence out = sequence;
    TamperRecord rec;
    std::uniform_int_distribution<int> code(0, n_codes - 1);
    for (int p : positions) {
        const int replacement = code(rng);
        rec.positions.push_back(p);
        rec.original_tokens.push_back(sequence.tokens[static_cast<std::size_t>(p)]);
        rec.replacement_tokens.push_back(replacement);
        out.tokens[static_cast<std::size_t>(p)] = replacement;
    }
    return {std::move(out), std::move(rec)};
}

// --------------------------------------------------------------- PriorModel

struct PriorModel::Cache {
    std::vector<nn::TransformerBlock::Cache> blocks;
    nn::LayerNorm::Cache final_norm;
    nn::Matrix normed;
};

PriorModel::PriorModel(const PriorConfig& config) : config_(config) {
    if (config.n_codes < 1 || config.seq_len < 1 || config.layers < 0 || config.model_dim < 1 || config.heads < 1 ||
        config.model_dim % config.heads != 0 || config.ff_dim < 1)
        throw ConfigError("invalid prior dimensions (model_dim must be divisible by heads)");
    token_embedding_.resize(config.n_codes, config.model_dim);
    position_embedding_.resize(config.seq_len, config.model_dim);
    for (int i = 0; i < config.layers; ++i)
        blocks_.emplace_back(config.model_dim, config.heads, config.ff_dim, config.causal);
    final_norm_ = nn::LayerNorm(config.model_dim);
    head_ = nn::Linear(config.model_dim, config.n_codes);

    std::mt19937_64 rng(config.seed);
    std::normal_distribution<float> emb(0.0f, 0.02f);
    for (Eigen::Index i = 0; i < token_embedding_.value.size(); ++i) token_embedding_.value.data()[i] = emb(rng);
    for (Eigen::Index i = 0; i < position_embedding_.value.size(); ++i) position_embedding_.value.data()[i] = emb(rng);
    for (auto& b : blocks_) b.init(rng);
    head_.init(rng);
}

void PriorModel::check_tokens(const CodeSequence& input) const {
    if (input.length() != config_.seq_len)
        throw ShapeError("sequence length " + std::to_string(input.length()) + " != model length " +
                         std::to_string(config_.seq_len));
    for (int t : input.tokens)
        if (t < 0 || t >= config_.n_codes)
            throw DataError("token " + std::to_string(t) + " outside [0, " + std::to_string(config_.n_codes) + ")");
}

nn::Matrix PriorModel::forward(const CodeSequence& input, Cache* cache) const {
    nn::Matrix x(config_.seq_len, config_.model_dim);
    for (int i = 0; i < config_.seq_len; ++i)
        x.row(i) = token_embedding_.value.row(input.tokens[static_cast<std::size_t>(i)]) + position_embedding_.value.row(i);
    for (const auto& block : blocks_) {
        nn::TransformerBlock::Cache* bc = nullptr;
        if (cache) bc = &cache->blocks.emplace_back();
        x = block.forward(x, bc);
    }
    nn::Matrix normed = final_norm_.forward(x, cache ? &cache->final_norm : nullptr);
    nn::Matrix logits = head_.forward(normed);
    if (cache) cache->normed = std::move(normed);
    return logits;
}

nn::Matrix PriorModel::conditional_logits(const CodeSequence& sequence) const {
    check_tokens(sequence);
    return forward(sequence, nullptr);
}

double PriorModel::accumulate_gradients(
    const CodeSequence& input, const std::function<double(const nn::Matrix&, nn::Matrix&)>& loss_fn) {
    check_tokens(input);
    Cache cache;
    const nn::Matrix logits = forward(input, &cache);
    nn::Matrix dlogits = nn::Matrix::Zero(logits.rows(), logits.cols());
    const double loss = loss_fn(logits, dlogits);
    nn::Matrix dx = final_norm_.backward(cache.final_norm, head_.backward(cache.normed, dlogits));
    for (std::size_t i = blocks_.size(); i-- > 0;) dx = blocks_[i].backward(cache.blocks[i], dx);
    for (int i = 0; i < config_.seq_len; ++i)
        token_embedding_.grad.row(input.tokens[static_cast<std::size_t>(i)]) += dx.row(i);
    position_embedding_.grad += dx;
    return loss;
}

std::vector<nn::NamedParameter> PriorModel::parameters() {
    std::vector<nn::NamedParameter> out;
    out.push_back({"prior.token_embedding", &token_embedding_});
    out.push_back({"prior.position_embedding", &position_embedding_});
    for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].parameters("prior.block" + std::to_string(i), out);
    final_norm_.parameters("prior.final_norm", out);
    head_.parameters("prior.head", out);
    return out;
}

// ------------------------------------------------------------------- losses

std::vector<double> token_cross_entropy(const nn::Matrix& logits, const CodeSequence& target) {
    if (logits.rows() != target.length()) throw ShapeError("logits rows != target length");
    std::vector<double> h(static_cast<std::size_t>(target.length()));
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        double s = 0.0;
        for (Eigen::Index j = 0; j < logits.cols(); ++j) s += std::exp(static_cast<double>(logits(i, j)) - m);
        h[static_cast<std::size_t>(i)] = m + std::log(s) - logits(i, target.tokens[static_cast<std::size_t>(i)]);
    }
    return h;
}

FocalLoss focal_loss(const nn::Matrix& logits, const CodeSequence& target, const TamperRecord& record, double beta,
                     bool mean_normalized) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0, 1]");
    const int len = target.length();
    std::vector<char> tampered(static_cast<std::size_t>(len), 0);
    for (int p : record.positions) tampered[static_cast<std::size_t>(p)] = 1;
    const int n_tampered = static_cast<int>(record.positions.size());
    const int n_clean = len - n_tampered;

    double w_t = 1.0 - beta;
    double w_c = beta;
    if (mean_normalized) {
        w_t = n_tampered > 0 ? w_t / n_tampered : 0.0;
        w_c = n_clean > 0 ? w_c / n_clean : 0.0;
    }

    const std::vector<double> h = token_cross_entropy(logits, target);
    FocalLoss out;
    out.grad = nn::Matrix(logits.rows(), logits.cols());
    const nn::Matrix probs = nn::softmax_rows(logits);
    for (int i = 0; i < len; ++i) {
        const double w = tampered[static_cast<std::size_t>(i)] ? w_t : w_c;
        out.value += w * h[static_cast<std::size_t>(i)];
        out.grad.row(i) = probs.row(i) * static_cast<float>(w);
        out.grad(i, target.tokens[static_cast<std::size_t>(i)]) -= static_cast<float>(w);
    }
    return out;
}

// ----------------------------------------------------------------- training

PriorTrainStats train_prior(PriorModel& model, std::span<const CodeSequence> sequences, const PriorLogFn& log,
                            int log_every) {
    const PriorConfig& cfg = model.config();
    if (sequences.empty()) throw ConfigError("no training sequences for the prior");
    if (cfg.batch_size < 1) throw ConfigError("prior batch size must be >= 1");
    nn::Adam optimizer(model.parameters(), nn::AdamOptions{.lr = cfg.learning_rate});
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(sequences.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size();
    const float scale = 1.0f / static_cast<float>(cfg.batch_size);
    PriorTrainStats last;
    for (int step = 0; step < cfg.train_steps; ++step) {
        optimizer.zero_grad();
        double total = 0.0;
        for (int b = 0; b < cfg.batch_size; ++b) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            const CodeSequence& original = sequences[order[cursor++]];
            const auto [tampered, record] = tamper(original, cfg.tamper_rate, cfg.n_codes, rng());
            total += model.accumulate_gradients(tampered, [&](const nn::Matrix& logits, nn::Matrix& dlogits) {
                FocalLoss fl = focal_loss(logits, original, record, cfg.beta, cfg.mean_normalized_loss);
                dlogits = fl.grad * scale;
                return fl.value;
            });
        }
        last.loss = total / cfg.batch_size;
        if (!std::isfinite(last.loss)) throw TrainingError("non-finite prior loss at step " + std::to_string(step));
        optimizer.step();
        if (log && (step % log_every == 0 || step + 1 == cfg.train_steps)) log(step, last);
    }
    return last;
}

namespace {

int argmax_row(const nn::Matrix& logits, Eigen::Index row) {
    int best = 0;
    for (Eigen::Index j = 1; j < logits.cols(); ++j)
        if (logits(row, j) > logits(row, best)) best = static_cast<int>(j);
    return best;
}

} // namespace

CodeSequence resample_sequence(const PriorModel& model, const CodeSequence& sequence, double temperature,
                               std::uint64_t seed) {
    if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    CodeSequence current = sequence;
    for (int it = 0; it < std::max(1, model.config().resample_iterations); ++it) {
        const nn::Matrix logits = model.conditional_logits(current);
        CodeSequence next = current;
        for (Eigen::Index i = 0; i < logits.rows(); ++i) {
            if (temperature == 0.0) {
                next.tokens[static_cast<std::size_t>(i)] = argmax_row(logits, i);
                continue;
            }
            const double m = logits.row(i).maxCoeff();
            std::vector<double> p(static_cast<std::size_t>(logits.cols()));
            double z = 0.0;
            for (Eigen::Index j = 0; j < logits.cols(); ++j) {
                p[static_cast<std::size_t>(j)] = std::exp((logits(i, j) - m) / temperature);
                z += p[static_cast<std::size_t>(j)];
            }
            const double u = unit(rng) * z;
            double acc = 0.0;
            int pick = static_cast<int>(logits.cols()) - 1;
            for (Eigen::Index j = 0; j < logits.cols(); ++j) {
                acc += p[static_cast<std::size_t>(j)];
                if (u < acc) {
                    pick = static_cast<int>(j);
                    break;
                }
            }
            next.tokens[static_cast<std::size_t>(i)] = pick;
        }
        current = std::move(next);
    }
    return current;
}

double restoration_accuracy(const PriorModel& model, std::span<const CodeSequence> sequences, double rate,
                            std::uint64_t seed) {
    std::size_t hits = 0, total = 0;
    for (std::size_t s = 0; s < sequences.size(); ++s) {
        const auto [tampered, record] = tamper(sequences[s], rate, model.config().n_codes, seed + s);
        const nn::Matrix logits = model.conditional_logits(tampered);
        for (std::size_t k = 0; k < record.positions.size(); ++k) {
            hits += argmax_row(logits, record.positions[k]) == record.original_tokens[k];
            ++total;
        }
    }
    return total == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(total);
}

} // namespace lsgs
