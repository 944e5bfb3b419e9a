// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#include "lsgs/nn/attention.hpp"

#include <cmath>
#include <limits>

namespace lsgs::nn {

// ---------------------------------------------------------------- Linear

void Linear::init(std::mt19937_64& rng) {
    init_uniform_fan_in(weight, in_, rng);
    init_uniform_fan_in(bias, in_, rng);
}

Matrix Linear::forward(const Matrix& x) const {
    Matrix y(x.rows(), weight.value.cols());
    y.noalias() = x * weight.value;
    y.rowwise() += bias.value.row(0);
    return y;
}

Matrix Linear::backward(const Matrix& x, const Matrix& dy) {
    weight.grad.noalias() += x.transpose() * dy;
    bias.grad.row(0) += dy.colwise().sum();
    Matrix dx(dy.rows(), weight.value.rows());
    dx.noalias() = dy * weight.value.transpose();
    return dx;
}

void Linear::parameters(const std::string& prefix, std::vector<NamedParameter>& out) {
    out.push_back({prefix + ".weight", &weight});
    out.push_back({prefix + ".bias", &bias});
}

// ------------------------------------------------------------- LayerNorm

namespace {
constexpr float kLayerNormEps = 1e-5f;
}

LayerNorm::LayerNorm(int dim) : gamma(1, dim), beta(1, dim) { gamma.value.setOnes(); }

Matrix LayerNorm::forward(const Matrix& x, Cache* cache) const {
    const auto d = static_cast<float>(x.cols());
    Matrix xhat(x.rows(), x.cols());
    Eigen::VectorXf inv_std(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const float mean = x.row(r).sum() / d;
        const float var = (x.row(r).array() - mean).square().sum() / d;
        inv_std(r) = 1.0f / std::sqrt(var + kLayerNormEps);
        xhat.row(r) = (x.row(r).array() - mean) * inv_std(r);
    }
    Matrix y = (xhat.array().rowwise() * gamma.value.row(0).array()).rowwise() + beta.value.row(0).array();
    if (cache) {
        cache->normalized = std::move(xhat);
        cache->inv_std = std::move(inv_std);
    }
    return y;
}

Matrix LayerNorm::backward(const Cache& cache, const Matrix& dy) {
    const Matrix& xhat = cache.normalized;
    gamma.grad.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
    beta.grad.row(0) += dy.colwise().sum();
    Matrix dxhat = dy.array().rowwise() * gamma.value.row(0).array();
    const auto d = static_cast<float>(dy.cols());
    Matrix dx(dy.rows(), dy.cols());
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
        const float mean_d = dxhat.row(r).sum() / d;
        const float mean_dx = dxhat.row(r).dot(xhat.row(r)) / d;
        dx.row(r) = (dxhat.row(r).array() - mean_d - xhat.row(r).array() * mean_dx) * cache.inv_std(r);
    }
    return dx;
}

void LayerNorm::parameters(const std::string& prefix, std::vector<NamedParameter>& out) {
    out.push_back({prefix + ".gamma", &gamma});
    out.push_back({prefix + ".beta", &beta});
}

// ------------------------------------------------------------ activations

namespace {
constexpr float kSqrt2OverPi = 0.7978845608028654f;
constexpr float kGeluCubic = 0.044715f;
} // namespace

Matrix gelu(const Matrix& x) {
    return x.unaryExpr([](float v) {
        return 0.5f * v * (1.0f + std::tanh(kSqrt2OverPi * (v + kGeluCubic * v * v * v)));
    });
}

Matrix gelu_backward(const Matrix& x, const Matrix& dy) {
    Matrix dx(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const float v = x.data()[i];
        const float t = std::tanh(kSqrt2OverPi * (v + kGeluCubic * v * v * v));
        const float dt = (1.0f - t * t) * kSqrt2OverPi * (1.0f + 3.0f * kGeluCubic * v * v);
        dx.data()[i] = dy.data()[i] * (0.5f * (1.0f + t) + 0.5f * v * dt);
    }
    return dx;
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix p(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const float m = logits.row(r).maxCoeff();
        p.row(r) = (logits.row(r).array() - m).exp();
        p.row(r) /= p.row(r).sum();
    }
    return p;
}

// ---------------------------------------------------- MultiHeadAttention

MultiHeadAttention::MultiHeadAttention(int dim, int heads, bool causal)
    : dim_(dim), heads_(heads), causal_(causal), qkv_(dim, 3 * dim), proj_(dim, dim) {}

void MultiHeadAttention::init(std::mt19937_64& rng) {
    qkv_.init(rng);
    proj_.init(rng);
}

Matrix MultiHeadAttention::forward(const Matrix& x, Cache* cache) const {
    const Eigen::Index len = x.rows();
    const int head_dim = dim_ / heads_;
    const float scale = 1.0f / std::sqrt(static_cast<float>(head_dim));
    Matrix qkv = qkv_.forward(x);
    Matrix heads(len, dim_);
    std::vector<Matrix> probs;
    probs.reserve(static_cast<std::size_t>(heads_));
    for (int h = 0; h < heads_; ++h) {
        const auto q = qkv.middleCols(h * head_dim, head_dim);
        const auto k = qkv.middleCols(dim_ + h * head_dim, head_dim);
        const auto v = qkv.middleCols(2 * dim_ + h * head_dim, head_dim);
        Matrix scores = (q * k.transpose()) * scale;
        if (causal_) {
            for (Eigen::Index i = 0; i < len; ++i)
                for (Eigen::Index j = i + 1; j < len; ++j) scores(i, j) = -std::numeric_limits<float>::infinity();
        }
        Matrix p = softmax_rows(scores);
        heads.middleCols(h * head_dim, head_dim).noalias() = p * v;
        probs.push_back(std::move(p));
    }
    Matrix y = proj_.forward(heads);
    if (cache) {
        cache->input = x;
        cache->qkv = std::move(qkv);
        cache->probs = std::move(probs);
        cache->heads = std::move(heads);
    }
    return y;
}

Matrix MultiHeadAttention::backward(const Cache& cache, const Matrix& dy) {
    const int head_dim = dim_ / heads_;
    const float scale = 1.0f / std::sqrt(static_cast<float>(head_dim));
    Matrix dheads = proj_.backward(cache.heads, dy);
    Matrix dqkv(cache.qkv.rows(), cache.qkv.cols());
    for (int h = 0; h < heads_; ++h) {
        const auto q = cache.qkv.middleCols(h * head_dim, head_dim);
        const auto k = cache.qkv.middleCols(dim_ + h * head_dim, head_dim);
        const auto v = cache.qkv.middleCols(2 * dim_ + h * head_dim, head_dim);
        const Matrix& p = cache.probs[static_cast<std::size_t>(h)];
        const auto dout = dheads.middleCols(h * head_dim, head_dim);
        Matrix dp = dout * v.transpose();
        dqkv.middleCols(2 * dim_ + h * head_dim, head_dim).noalias() = p.transpose() * dout;
        Eigen::VectorXf row_dot = (dp.array() * p.array()).rowwise().sum();
        Matrix ds = p.array() * (dp.array().colwise() - row_dot.array());
        ds *= scale;
        dqkv.middleCols(h * head_dim, head_dim).noalias() = ds * k;
        dqkv.middleCols(dim_ + h * head_dim, head_dim).noalias() = ds.transpose() * q;
    }
    return qkv_.backward(cache.input, dqkv);
}

void MultiHeadAttention::parameters(const std::string& prefix, std::vector<NamedParameter>& out) {
    qkv_.parameters(prefix + ".qkv", out);
    proj_.parameters(prefix + ".proj", out);
}

// ------------------------------------------------------ TransformerBlock

TransformerBlock::TransformerBlock(int dim, int heads, int ff_dim, bool causal)
    : ln1_(dim), attn_(dim, heads, causal), ln2_(dim), fc1_(dim, ff_dim), fc2_(ff_dim, dim) {}

void TransformerBlock::init(std::mt19937_64& rng) {
    attn_.init(rng);
    fc1_.init(rng);
    fc2_.init(rng);
}

Matrix TransformerBlock::forward(const Matrix& x, Cache* cache) const {
    LayerNorm::Cache ln1, ln2;
    Matrix mid = x + attn_.forward(ln1_.forward(x, &ln1), cache ? &cache->attn : nullptr);
    Matrix ln2_out = ln2_.forward(mid, &ln2);
    Matrix fc1_out = fc1_.forward(ln2_out);
    Matrix act = gelu(fc1_out);
    Matrix y = mid + fc2_.forward(act);
    if (cache) {
        cache->ln1 = std::move(ln1);
        cache->mid = std::move(mid);
        cache->ln2 = std::move(ln2);
        cache->ln2_out = std::move(ln2_out);
        cache->fc1_out = std::move(fc1_out);
        cache->act = std::move(act);
    }
    return y;
}

Matrix TransformerBlock::backward(const Cache& cache, const Matrix& dy) {
    Matrix dact = fc2_.backward(cache.act, dy);
    Matrix dfc1 = gelu_backward(cache.fc1_out, dact);
    Matrix dln2 = fc1_.backward(cache.ln2_out, dfc1);
    Matrix dmid = dy + ln2_.backward(cache.ln2, dln2);
    Matrix dln1 = attn_.backward(cache.attn, dmid);
    return dmid + ln1_.backward(cache.ln1, dln1);
}

void TransformerBlock::parameters(const std::string& prefix, std::vector<NamedParameter>& out) {
    ln1_.parameters(prefix + ".ln1", out);
    attn_.parameters(prefix + ".attn", out);
    ln2_.parameters(prefix + ".ln2", out);
    fc1_.parameters(prefix + ".fc1", out);
    fc2_.parameters(prefix + ".fc2", out);
}

} // namespace lsgs::nn
