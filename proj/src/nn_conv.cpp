// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#include "lsgs/nn/conv.hpp"

#include <cmath>

namespace lsgs::nn {

Matrix im2col(const Tensor3& x, int kernel, int stride, int pad, int out_h, int out_w) {
    Matrix cols(static_cast<Eigen::Index>(x.channels) * kernel * kernel, out_h * out_w);
    for (int c = 0; c < x.channels; ++c) {
        const float* src = x.data.data() + static_cast<std::size_t>(c) * x.plane();
        for (int ky = 0; ky < kernel; ++ky) {
            for (int kx = 0; kx < kernel; ++kx) {
                float* row = cols.row((c * kernel + ky) * kernel + kx).data();
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    float* dst = row + oy * out_w;
                    if (iy < 0 || iy >= x.height) {
                        std::fill(dst, dst + out_w, 0.0f);
                        continue;
                    }
                    const float* srow = src + iy * x.width;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        dst[ox] = (ix >= 0 && ix < x.width) ? srow[ix] : 0.0f;
                    }
                }
            }
        }
    }
    return cols;
}

Tensor3 col2im(const Matrix& cols, int channels, int height, int width, int kernel, int stride, int pad) {
    Tensor3 out(channels, height, width);
    const int out_h = (height + 2 * pad - kernel) / stride + 1;
    const int out_w = (width + 2 * pad - kernel) / stride + 1;
    for (int c = 0; c < channels; ++c) {
        float* dst = out.data.data() + static_cast<std::size_t>(c) * out.plane();
        for (int ky = 0; ky < kernel; ++ky) {
            for (int kx = 0; kx < kernel; ++kx) {
                const float* row = cols.row((c * kernel + ky) * kernel + kx).data();
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= height) continue;
                    float* drow = dst + iy * width;
                    const float* srow = row + oy * out_w;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < width) drow[ix] += srow[ox];
                    }
                }
            }
        }
    }
    return out;
}

void init_uniform_fan_in(Parameter& p, int fan_in, std::mt19937_64& rng) {
    const float bound = 1.0f / std::sqrt(static_cast<float>(fan_in));
    std::uniform_real_distribution<float> dist(-bound, bound);
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = dist(rng);
    p.grad.setZero();
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad)
    : weight(out_channels, in_channels * kernel * kernel), bias(1, out_channels), in_(in_channels),
      out_(out_channels), kernel_(kernel), stride_(stride), pad_(pad) {}

void Conv2d::init(std::mt19937_64& rng) {
    const int fan_in = in_ * kernel_ * kernel_;
    init_uniform_fan_in(weight, fan_in, rng);
    init_uniform_fan_in(bias, fan_in, rng);
}

Tensor3 Conv2d::forward(const Tensor3& x, Cache* cache) const {
    assert(x.channels == in_);
    const int oh = output_size(x.height);
    const int ow = output_size(x.width);
    Matrix cols = im2col(x, kernel_, stride_, pad_, oh, ow);
    Tensor3 y(out_, oh, ow);
    auto ym = y.as_matrix();
    ym.noalias() = weight.value * cols;
    ym.colwise() += bias.value.row(0).transpose();
    if (cache) {
        cache->cols = std::move(cols);
        cache->in_h = x.height;
        cache->in_w = x.width;
    }
    return y;
}

Tensor3 Conv2d::backward(const Cache& cache, const Tensor3& dy) {
    auto dym = dy.as_matrix();
    weight.grad.noalias() += dym * cache.cols.transpose();
    bias.grad.row(0) += dym.rowwise().sum().transpose();
    Matrix dcols = weight.value.transpose() * dym;
    return col2im(dcols, in_, cache.in_h, cache.in_w, kernel_, stride_, pad_);
}

void Conv2d::parameters(const std::string& prefix, std::vector<NamedParameter>& out) {
    out.push_back({prefix + ".weight", &weight});
    out.push_back({prefix + ".bias", &bias});
}

// ------------------------------------------------------- ConvTranspose2d

ConvTranspose2d::ConvTranspose2d(int in_channels, int out_channels, int kernel, int stride, int pad)
    : weight(in_channels, out_channels * kernel * kernel), bias(1, out_channels), in_(in_channels),
      out_(out_channels), kernel_(kernel), stride_(stride), pad_(pad) {}

void ConvTranspose2d::init(std::mt19937_64& rng) {
    // Each output pixel receives roughly in*(k/s)^2 contributions.
    const int taps = std::max(1, kernel_ / stride_);
    const int fan_in = in_ * taps * taps;
    init_uniform_fan_in(weight, fan_in, rng);
    init_uniform_fan_in(bias, fan_in, rng);
}

Tensor3 ConvTranspose2d::forward(const Tensor3& x, Cache* cache) const {
    assert(x.channels == in_);
    const int oh = output_size(x.height);
    const int ow = output_size(x.width);
    Matrix cols = weight.value.transpose() * x.as_matrix();
    Tensor3 y = col2im(cols, out_, oh, ow, kernel_, stride_, pad_);
    y.as_matrix().colwise() += bias.value.row(0).transpose();
    if (cache) cache->input = x;
    return y;
}

Tensor3 ConvTranspose2d::backward(const Cache& cache, const Tensor3& dy) {
    const Tensor3& x = cache.input;
    Matrix dcols = im2col(dy, kernel_, stride_, pad_, x.height, x.width);
    auto xm = x.as_matrix();
    weight.grad.noalias() += xm * dcols.transpose();
    bias.grad.row(0) += dy.as_matrix().rowwise().sum().transpose();
    Tensor3 dx(in_, x.height, x.width);
    dx.as_matrix().noalias() = weight.value * dcols;
    return dx;
}

void ConvTranspose2d::parameters(const std::string& prefix, std::vector<NamedParameter>& out) {
    out.push_back({prefix + ".weight", &weight});
    out.push_back({prefix + ".bias", &bias});
}

// ------------------------------------------------------------ activations

Tensor3 relu(const Tensor3& x) {
    Tensor3 y = x;
    for (float& v : y.data) v = v > 0.0f ? v : 0.0f;
    return y;
}

Tensor3 relu_backward(const Tensor3& x, const Tensor3& dy) {
    Tensor3 dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i)
        if (x.data[i] <= 0.0f) dx.data[i] = 0.0f;
    return dx;
}

// ---------------------------------------------------------- ResidualBlock

ResidualBlock::ResidualBlock(int channels, int hidden)
    : conv3_(channels, hidden, 3, 1, 1), conv1_(hidden, channels, 1, 1, 0) {}

void ResidualBlock::init(std::mt19937_64& rng) {
    conv3_.init(rng);
    conv1_.init(rng);
}

Tensor3 ResidualBlock::forward(const Tensor3& x, Cache* cache) const {
    Tensor3 h = conv3_.forward(relu(x), cache ? &cache->c1 : nullptr);
    Tensor3 y = conv1_.forward(relu(h), cache ? &cache->c2 : nullptr);
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += x.data[i];
    if (cache) {
        cache->input = x;
        cache->hidden_pre = std::move(h);
    }
    return y;
}

Tensor3 ResidualBlock::backward(const Cache& cache, const Tensor3& dy) {
    Tensor3 dh = relu_backward(cache.hidden_pre, conv1_.backward(cache.c2, dy));
    Tensor3 dx = relu_backward(cache.input, conv3_.backward(cache.c1, dh));
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += dy.data[i];
    return dx;
}

void ResidualBlock::parameters(const std::string& prefix, std::vector<NamedParameter>& out) {
    conv3_.parameters(prefix + ".conv3", out);
    conv1_.parameters(prefix + ".conv1", out);
}

} // namespace lsgs::nn
