// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lsgs/image.hpp"

namespace lsgs {

enum class Split { train, test };

std::string to_string(Split split);
Split parse_split(const std::string& text);

struct Resolution {
    int height = 64;
    int width = 64;
    friend bool operator==(const Resolution&, const Resolution&) = default;
};

/// Ordered samples of one split. Training splits never carry a nonzero mask.
struct DatasetManifest {
    Split split = Split::train;
    int channels = 1;
    Resolution resolution;
    std::vector<ImageSample> samples;

    /// Throws DataError when an invariant is violated.
    void validate() const;
    std::vector<Image> images() const;
    const ImageSample* find(const std::string& id) const;
};

/// Loads `<root>/train/normal/*` (train) or `<root>/test/images/*` with masks
/// from `<root>/test/masks/` (test). A mask is matched by file stem, either
/// `<stem>.png` or `<stem>_mask.png`; a test image without one is treated as
/// normal (all-zero mask). `channels` = 0 keeps the channel count of the
/// first image; 1 or 3 converts.
DatasetManifest load_dataset(const std::filesystem::path& root, Split split, Resolution resolution,
                             int channels = 0);

/// Writes the manifest's images (and masks) as PNGs in the loader layout and
/// a `<split>.manifest` index under `root`. Returns the index path.
std::filesystem::path save_dataset(const DatasetManifest& manifest, const std::filesystem::path& root);

/// Versioned plain-text index: header lines then one record per sample
/// `id<TAB>relative image path<TAB>relative mask path or ->`.
void write_manifest_index(const DatasetManifest& manifest, const std::filesystem::path& index_path);
DatasetManifest read_manifest_index(const std::filesystem::path& index_path);

enum class AnomalyKind { texture_patch, structure_swap };

std::string to_string(AnomalyKind kind);
AnomalyKind parse_anomaly_kind(const std::string& text);

struct SyntheticOptions {
    std::uint64_t seed = 0;
    int n_train = 128;
    int n_test = 32;
    std::set<AnomalyKind> anomaly_kinds{AnomalyKind::texture_patch, AnomalyKind::structure_swap};
    Resolution resolution{64, 64};
    int cell_size = 16;
};

struct SyntheticDataset {
    DatasetManifest train;
    DatasetManifest test;
    /// Anomaly-free render of each test sample, aligned with test.samples.
    std::vector<Image> test_normal_counterparts;
    /// Anomaly kind per test sample, empty string for normal samples.
    std::vector<std::string> test_kinds;
};

/// Grid of textured cells whose type depends only on the cell position, with
/// a per-image stripe phase and brightness offset. All values lie on the
/// 8-bit grid so a PNG round trip is exact. Every fourth test sample is
/// normal; the rest cycle through `anomaly_kinds`.
SyntheticDataset synthesize_dataset(const SyntheticOptions& options);

} // namespace lsgs
