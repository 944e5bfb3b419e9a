// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "lsgs/nn/tensor.hpp"

namespace lsgs {

/// Channel-major image with values in [0, 1].
using Image = nn::Tensor3;
/// Binary per-pixel mask, 1 = anomalous.
using Mask = nn::Plane<std::uint8_t>;
using ScorePlane = nn::Plane<float>;

struct ImageSample {
    std::string id;
    Image pixels;
    std::optional<Mask> mask;

    bool is_abnormal() const;
};

/// Bilinear resize (align-corners = false, half-pixel centres).
Image resize_bilinear(const Image& src, int height, int width);
/// Nearest-neighbour resize followed by re-binarisation (any nonzero -> 1).
Mask resize_nearest(const Mask& src, int height, int width);

/// Per-pixel mean over channels.
ScorePlane channel_mean(const Image& img);

} // namespace lsgs
