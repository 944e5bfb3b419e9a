// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/StdVector>

namespace lsgs::nn {

using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::Matrix<float, 1, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

/// Float storage aligned for the widest vector unit Eigen targets, so
/// reductions over mapped buffers do not depend on the heap address.
using FloatBuffer = std::vector<float, Eigen::aligned_allocator<float>>;

/// Dense channel-major (C, H, W) activation of a single image.
struct Tensor3 {
    int channels = 0;
    int height = 0;
    int width = 0;
    FloatBuffer data;

    Tensor3() = default;
    Tensor3(int c, int h, int w, float fill = 0.0f)
        : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

    std::size_t size() const { return data.size(); }
    int plane() const { return height * width; }

    float& at(int c, int y, int x) {
        assert(c >= 0 && c < channels && y >= 0 && y < height && x >= 0 && x < width);
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    float at(int c, int y, int x) const {
        assert(c >= 0 && c < channels && y >= 0 && y < height && x >= 0 && x < width);
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }

    bool same_shape(const Tensor3& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }

    /// (C, H*W) view.
    MatrixMap as_matrix() { return {data.data(), channels, plane()}; }
    ConstMatrixMap as_matrix() const { return {data.data(), channels, plane()}; }

    friend bool operator==(const Tensor3&, const Tensor3&) = default;
};

/// Single-channel 2-D grid (masks, score maps).
template <class T>
struct Plane {
    int height = 0;
    int width = 0;
    std::vector<T> data;

    Plane() = default;
    Plane(int h, int w, T fill = T{}) : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

    T& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
    const T& at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
    std::size_t size() const { return data.size(); }

    friend bool operator==(const Plane&, const Plane&) = default;
};

/// Learnable array with its gradient accumulator.
struct Parameter {
    Matrix value;
    Matrix grad;

    Parameter() = default;
    Parameter(int rows, int cols) : value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}

    void zero_grad() { grad.setZero(); }
    void resize(int rows, int cols) {
        value = Matrix::Zero(rows, cols);
        grad = Matrix::Zero(rows, cols);
    }
};

} // namespace lsgs::nn
