// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#include "lsgs/image.hpp"

#include <algorithm>
#include <cmath>

namespace lsgs {

bool ImageSample::is_abnormal() const {
    return mask && std::any_of(mask->data.begin(), mask->data.end(), [](std::uint8_t v) { return v != 0; });
}

Image resize_bilinear(const Image& src, int height, int width) {
    if (src.height == height && src.width == width) return src;
    Image out(src.channels, height, width);
    const float sy = static_cast<float>(src.height) / height;
    const float sx = static_cast<float>(src.width) / width;
    for (int y = 0; y < height; ++y) {
        const float fy = std::max(0.0f, (y + 0.5f) * sy - 0.5f);
        const int y0 = std::min(static_cast<int>(fy), src.height - 1);
        const int y1 = std::min(y0 + 1, src.height - 1);
        const float wy = fy - y0;
        for (int x = 0; x < width; ++x) {
            const float fx = std::max(0.0f, (x + 0.5f) * sx - 0.5f);
            const int x0 = std::min(static_cast<int>(fx), src.width - 1);
            const int x1 = std::min(x0 + 1, src.width - 1);
            const float wx = fx - x0;
            for (int c = 0; c < src.channels; ++c) {
                const float top = src.at(c, y0, x0) * (1 - wx) + src.at(c, y0, x1) * wx;
                const float bot = src.at(c, y1, x0) * (1 - wx) + src.at(c, y1, x1) * wx;
                out.at(c, y, x) = std::clamp(top * (1 - wy) + bot * wy, 0.0f, 1.0f);
            }
        }
    }
    return out;
}

Mask resize_nearest(const Mask& src, int height, int width) {
    Mask out(height, width);
    for (int y = 0; y < height; ++y) {
        const int sy = std::min(static_cast<int>((y + 0.5) * src.height / height), src.height - 1);
        for (int x = 0; x < width; ++x) {
            const int sx = std::min(static_cast<int>((x + 0.5) * src.width / width), src.width - 1);
            out.at(y, x) = src.at(sy, sx) != 0 ? 1 : 0;
        }
    }
    return out;
}

ScorePlane channel_mean(const Image& img) {
    ScorePlane out(img.height, img.width);
    for (int c = 0; c < img.channels; ++c)
        for (int i = 0; i < img.plane(); ++i) out.data[static_cast<std::size_t>(i)] += img.data[static_cast<std::size_t>(c) * img.plane() + i];
    for (float& v : out.data) v /= static_cast<float>(img.channels);
    return out;
}

} // namespace lsgs
