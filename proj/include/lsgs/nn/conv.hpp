// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <string>
#include <vector>

#include "lsgs/nn/tensor.hpp"

namespace lsgs::nn {

struct NamedParameter {
    std::string name;
    Parameter* param;
};

/// Unfolds sliding windows of `x` into a (C*k*k, out_h*out_w) matrix.
Matrix im2col(const Tensor3& x, int kernel, int stride, int pad, int out_h, int out_w);

/// Adjoint of im2col: scatters-adds columns back into a (C, H, W) tensor.
Tensor3 col2im(const Matrix& cols, int channels, int height, int width, int kernel, int stride, int pad);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation.
void init_uniform_fan_in(Parameter& p, int fan_in, std::mt19937_64& rng);

class Conv2d {
public:
    struct Cache {
        Matrix cols;
        int in_h = 0;
        int in_w = 0;
    };

    Conv2d() = default;
    Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad);

    void init(std::mt19937_64& rng);
    int output_size(int input) const { return (input + 2 * pad_ - kernel_) / stride_ + 1; }

    Tensor3 forward(const Tensor3& x, Cache* cache) const;
    Tensor3 backward(const Cache& cache, const Tensor3& dy);

    void parameters(const std::string& prefix, std::vector<NamedParameter>& out);

    Parameter weight; // (out, in*k*k)
    Parameter bias;   // (1, out)

private:
    int in_ = 0, out_ = 0, kernel_ = 1, stride_ = 1, pad_ = 0;
};

/// Transposed convolution; the adjoint geometry of Conv2d with the same
/// kernel/stride/pad, so ConvTranspose2d(k=4,s=2,p=1) doubles H and W.
class ConvTranspose2d {
public:
    struct Cache {
        Tensor3 input;
    };

    ConvTranspose2d() = default;
    ConvTranspose2d(int in_channels, int out_channels, int kernel, int stride, int pad);

    void init(std::mt19937_64& rng);
    int output_size(int input) const { return (input - 1) * stride_ - 2 * pad_ + kernel_; }

    Tensor3 forward(const Tensor3& x, Cache* cache) const;
    Tensor3 backward(const Cache& cache, const Tensor3& dy);

    void parameters(const std::string& prefix, std::vector<NamedParameter>& out);

    Parameter weight; // (in, out*k*k)
    Parameter bias;   // (1, out)

private:
    int in_ = 0, out_ = 0, kernel_ = 1, stride_ = 1, pad_ = 0;
};

Tensor3 relu(const Tensor3& x);
/// Gradient of relu given its *input* x.
Tensor3 relu_backward(const Tensor3& x, const Tensor3& dy);

/// x + conv1x1(relu(conv3x3(relu(x))))
class ResidualBlock {
public:
    struct Cache {
        Tensor3 input;
        Conv2d::Cache c1;
        Tensor3 hidden_pre;
        Conv2d::Cache c2;
    };

    ResidualBlock() = default;
    ResidualBlock(int channels, int hidden);

    void init(std::mt19937_64& rng);
    Tensor3 forward(const Tensor3& x, Cache* cache) const;
    Tensor3 backward(const Cache& cache, const Tensor3& dy);
    void parameters(const std::string& prefix, std::vector<NamedParameter>& out);

private:
    Conv2d conv3_;
    Conv2d conv1_;
};

} // namespace lsgs::nn
