// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <string>
#include <vector>

#include "lsgs/nn/conv.hpp"
#include "lsgs/nn/tensor.hpp"

// Sequence layers. Activations are (L, D) row-major matrices, one row per token.
namespace lsgs::nn {

class Linear {
public:
    Linear() = default;
    Linear(int in, int out) : weight(in, out), bias(1, out), in_(in) {}

    void init(std::mt19937_64& rng);
    Matrix forward(const Matrix& x) const;
    /// Accumulates parameter gradients; `x` is the forward input.
    Matrix backward(const Matrix& x, const Matrix& dy);
    void parameters(const std::string& prefix, std::vector<NamedParameter>& out);

    Parameter weight; // (in, out)
    Parameter bias;   // (1, out)

private:
    int in_ = 0;
};

class LayerNorm {
public:
    struct Cache {
        Matrix normalized;
        Eigen::VectorXf inv_std;
    };

    LayerNorm() = default;
    explicit LayerNorm(int dim);

    Matrix forward(const Matrix& x, Cache* cache) const;
    Matrix backward(const Cache& cache, const Matrix& dy);
    void parameters(const std::string& prefix, std::vector<NamedParameter>& out);

    Parameter gamma;
    Parameter beta;
};

Matrix gelu(const Matrix& x);
Matrix gelu_backward(const Matrix& x, const Matrix& dy);

/// Row-wise numerically stable softmax.
Matrix softmax_rows(const Matrix& logits);

/// Multi-head self-attention. With `causal` false every position attends to
/// every other position; with `causal` true position i only sees j <= i.
class MultiHeadAttention {
public:
    struct Cache {
        Matrix input;
        Matrix qkv;
        std::vector<Matrix> probs; // per head (L, L)
        Matrix heads;              // concatenated head outputs (L, D)
    };

    MultiHeadAttention() = default;
    MultiHeadAttention(int dim, int heads, bool causal);

    void init(std::mt19937_64& rng);
    Matrix forward(const Matrix& x, Cache* cache) const;
    Matrix backward(const Cache& cache, const Matrix& dy);
    void parameters(const std::string& prefix, std::vector<NamedParameter>& out);

    bool causal() const { return causal_; }

private:
    int dim_ = 0, heads_ = 1;
    bool causal_ = false;
    Linear qkv_;
    Linear proj_;
};

/// Pre-norm block: h = x + attn(ln1(x)); y = h + mlp(ln2(h)).
class TransformerBlock {
public:
    struct Cache {
        LayerNorm::Cache ln1;
        MultiHeadAttention::Cache attn;
        Matrix mid;
        LayerNorm::Cache ln2;
        Matrix ln2_out;
        Matrix fc1_out;
        Matrix act;
    };

    TransformerBlock() = default;
    TransformerBlock(int dim, int heads, int ff_dim, bool causal);

    void init(std::mt19937_64& rng);
    Matrix forward(const Matrix& x, Cache* cache) const;
    Matrix backward(const Cache& cache, const Matrix& dy);
    void parameters(const std::string& prefix, std::vector<NamedParameter>& out);

private:
    LayerNorm ln1_;
    MultiHeadAttention attn_;
    LayerNorm ln2_;
    Linear fc1_;
    Linear fc2_;
};

} // namespace lsgs::nn
