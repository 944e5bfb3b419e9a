// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <vector>

#include "lsgs/nn/conv.hpp"

namespace lsgs::nn {

struct AdamOptions {
    float lr = 2e-4f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

/// Adam over a fixed parameter list. The list must not be resized between
/// steps; rebuild the optimizer after swapping a parameter's shape.
class Adam {
public:
    Adam() = default;
    Adam(std::vector<NamedParameter> params, AdamOptions options) : params_(std::move(params)), opt_(options) {
        for (const auto& p : params_) {
            m_.push_back(Matrix::Zero(p.param->value.rows(), p.param->value.cols()));
            v_.push_back(Matrix::Zero(p.param->value.rows(), p.param->value.cols()));
        }
    }

    /// Applies one update using the accumulated gradients scaled by `grad_scale`,
    /// then zeroes them.
    void step(float grad_scale = 1.0f) {
        ++t_;
        const float bc1 = 1.0f - std::pow(opt_.beta1, static_cast<float>(t_));
        const float bc2 = 1.0f - std::pow(opt_.beta2, static_cast<float>(t_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            Parameter& p = *params_[i].param;
            const Matrix g = p.grad * grad_scale;
            m_[i] = opt_.beta1 * m_[i] + (1.0f - opt_.beta1) * g;
            v_[i] = opt_.beta2 * v_[i] + (1.0f - opt_.beta2) * g.cwiseProduct(g);
            p.value.array() -= opt_.lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + opt_.eps);
            p.zero_grad();
        }
    }

    void zero_grad() {
        for (auto& p : params_) p.param->zero_grad();
    }

    long steps() const { return t_; }

private:
    std::vector<NamedParameter> params_;
    AdamOptions opt_;
    std::vector<Matrix> m_, v_;
    long t_ = 0;
};

} // namespace lsgs::nn
