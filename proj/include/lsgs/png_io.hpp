// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace lsgs {

/// 8-bit interleaved raster as stored in a PNG file.
struct Raster8 {
    int height = 0;
    int width = 0;
    int channels = 0; // 1 (gray) or 3 (RGB)
    std::vector<std::uint8_t> data;
};

/// Decodes any 8/16-bit gray, gray+alpha, palette, RGB or RGBA PNG into gray
/// or RGB (alpha dropped). Throws DataError on failure.
Raster8 read_png(const std::filesystem::path& path);

/// Writes a gray or RGB 8-bit PNG. Throws DataError on failure.
void write_png(const std::filesystem::path& path, const Raster8& raster);

} // namespace lsgs
