// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "lsgs/datasets.hpp"
#include "lsgs/error.hpp"
#include "lsgs/image.hpp"
#include "lsgs/png_io.hpp"
#include "test_support.hpp"

namespace lsgs {
namespace {

namespace fs = std::filesystem;

Raster8 gray_raster(int h, int w, std::uint8_t seed) {
    Raster8 r{h, w, 1, std::vector<std::uint8_t>(static_cast<std::size_t>(h) * w)};
    for (std::size_t i = 0; i < r.data.size(); ++i) r.data[i] = static_cast<std::uint8_t>((i * 37 + seed) % 256);
    return r;
}

TEST(PngIo, GrayAndRgbRoundTripExactly) {
    const auto dir = test::scratch_dir("png");
    const Raster8 gray = gray_raster(5, 7, 3);
    write_png(dir / "g.png", gray);
    const Raster8 g2 = read_png(dir / "g.png");
    EXPECT_EQ(g2.channels, 1);
    EXPECT_EQ(g2.data, gray.data);

    Raster8 rgb{4, 3, 3, std::vector<std::uint8_t>(36)};
    for (std::size_t i = 0; i < rgb.data.size(); ++i) rgb.data[i] = static_cast<std::uint8_t>(i * 7);
    write_png(dir / "c.png", rgb);
    const Raster8 c2 = read_png(dir / "c.png");
    EXPECT_EQ(c2.channels, 3);
    EXPECT_EQ(c2.data, rgb.data);
}

TEST(PngIo, UnreadableFileIsDataError) {
    const auto dir = test::scratch_dir("png_bad");
    std::ofstream(dir / "bad.png") << "not a png";
    EXPECT_THROW(read_png(dir / "bad.png"), DataError);
}

TEST(Resize, SameSizeIsIdentityAndConstantsStayConstant) {
    std::mt19937_64 rng(1);
    Image img = test::random_tensor(2, 6, 5, rng);
    for (float& v : img.data) v = std::abs(v);
    EXPECT_EQ(resize_bilinear(img, 6, 5), img);
    Image flat(1, 4, 4, 0.3f);
    for (float v : resize_bilinear(flat, 9, 7).data) EXPECT_NEAR(v, 0.3f, 1e-6);
}

TEST(Resize, HalvingAveragesTwoByTwoBlocks) {
    Image img(1, 4, 4);
    for (int i = 0; i < 16; ++i) img.data[static_cast<std::size_t>(i)] = static_cast<float>(i) / 16.0f;
    const Image half = resize_bilinear(img, 2, 2);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x) {
            const double mean = (img.at(0, 2 * y, 2 * x) + img.at(0, 2 * y, 2 * x + 1) + img.at(0, 2 * y + 1, 2 * x) +
                                 img.at(0, 2 * y + 1, 2 * x + 1)) /
                                4.0;
            EXPECT_NEAR(half.at(0, y, x), mean, 1e-6);
        }
}

TEST(Resize, NearestMaskIsRebinarised) {
    Mask m(4, 4);
    m.at(1, 1) = 255;
    m.at(2, 3) = 7;
    const Mask up = resize_nearest(m, 8, 8);
    for (auto v : up.data) EXPECT_TRUE(v == 0 || v == 1);
    EXPECT_EQ(up.at(2, 2), 1);
    EXPECT_EQ(up.at(5, 7), 1);
    EXPECT_EQ(up.at(0, 0), 0);
}

TEST(ChannelMean, AveragesChannelsPerPixel) {
    Image img(3, 1, 2);
    img.data = {0.0f, 0.3f, 0.6f, 0.6f, 0.9f, 0.0f};
    const ScorePlane m = channel_mean(img);
    EXPECT_NEAR(m.at(0, 0), 0.5f, 1e-6);
    EXPECT_NEAR(m.at(0, 1), 0.3f, 1e-6);
}

TEST(LoadDataset, ThreeTrainImagesGiveThreeMasklessSamples) {
    const auto root = test::scratch_dir("load3");
    fs::create_directories(root / "train" / "normal");
    for (int i = 0; i < 3; ++i)
        write_png(root / "train" / "normal" / ("img" + std::to_string(2 - i) + ".png"),
                  gray_raster(40, 30, static_cast<std::uint8_t>(i)));
    const DatasetManifest m = load_dataset(root, Split::train, {128, 128});
    ASSERT_EQ(m.samples.size(), 3u);
    EXPECT_EQ(m.samples[0].id, "img0");
    EXPECT_EQ(m.samples[2].id, "img2");
    for (const auto& s : m.samples) {
        EXPECT_FALSE(s.mask.has_value());
        EXPECT_EQ(s.pixels.height, 128);
        EXPECT_EQ(s.pixels.width, 128);
        for (float v : s.pixels.data) {
            EXPECT_GE(v, 0.0f);
            EXPECT_LE(v, 1.0f);
        }
    }
}

TEST(LoadDataset, MissingDirectoryIsConfigError) {
    EXPECT_THROW(load_dataset("/nonexistent/lsgs", Split::train, {64, 64}), ConfigError);
    const auto root = test::scratch_dir("empty_root");
    EXPECT_THROW(load_dataset(root, Split::test, {64, 64}), ConfigError);
}

TEST(LoadDataset, MaskShapeMismatchIsDataErrorNamingTheSample) {
    const auto root = test::scratch_dir("mismatch");
    fs::create_directories(root / "test" / "images");
    fs::create_directories(root / "test" / "masks");
    write_png(root / "test" / "images" / "odd_one.png", gray_raster(16, 16, 1));
    write_png(root / "test" / "masks" / "odd_one_mask.png", gray_raster(8, 8, 1));
    try {
        load_dataset(root, Split::test, {16, 16});
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("odd_one"), std::string::npos);
    }
}

TEST(LoadDataset, MasksAreMatchedByStemAndMissingMeansNormal) {
    const auto root = test::scratch_dir("masks");
    fs::create_directories(root / "test" / "images");
    fs::create_directories(root / "test" / "masks");
    write_png(root / "test" / "images" / "a.png", gray_raster(8, 8, 1));
    write_png(root / "test" / "images" / "b.png", gray_raster(8, 8, 2));
    Raster8 mask{8, 8, 1, std::vector<std::uint8_t>(64, 0)};
    mask.data[9] = 255;
    write_png(root / "test" / "masks" / "a_mask.png", mask);
    const DatasetManifest m = load_dataset(root, Split::test, {8, 8});
    ASSERT_EQ(m.samples.size(), 2u);
    EXPECT_TRUE(m.samples[0].is_abnormal());
    EXPECT_EQ(m.samples[0].mask->at(1, 1), 1);
    ASSERT_TRUE(m.samples[1].mask.has_value());
    EXPECT_FALSE(m.samples[1].is_abnormal());
}

TEST(Synthetic, CountsKindsAndNormalCadence) {
    SyntheticOptions o;
    o.seed = 5;
    o.n_train = 6;
    o.n_test = 12;
    const SyntheticDataset ds = synthesize_dataset(o);
    EXPECT_EQ(ds.train.samples.size(), 6u);
    ASSERT_EQ(ds.test.samples.size(), 12u);
    for (const auto& s : ds.train.samples) EXPECT_FALSE(s.is_abnormal());
    for (std::size_t i = 0; i < 12; ++i) {
        const auto& s = ds.test.samples[i];
        EXPECT_EQ(s.is_abnormal(), i % 4 != 0) << s.id;
        EXPECT_EQ(ds.test_kinds[i].empty(), i % 4 == 0);
        if (!ds.test_kinds[i].empty()) EXPECT_NE(s.id.find(ds.test_kinds[i]), std::string::npos);
    }
}

TEST(Synthetic, MaskIsExactlyThePixelDifferenceFromTheCleanRender) {
    SyntheticOptions o;
    o.seed = 6;
    o.n_train = 1;
    o.n_test = 16;
    const SyntheticDataset ds = synthesize_dataset(o);
    for (std::size_t i = 0; i < ds.test.samples.size(); ++i) {
        const auto& s = ds.test.samples[i];
        const Image& clean = ds.test_normal_counterparts[i];
        for (std::size_t p = 0; p < s.pixels.size(); ++p)
            EXPECT_EQ(s.mask->data[p] != 0, s.pixels.data[p] != clean.data[p]) << s.id << " pixel " << p;
    }
}

TEST(Synthetic, StructureSwapCoversTwoCellsAndPatchIsARectangle) {
    SyntheticOptions o;
    o.seed = 7;
    o.n_train = 1;
    o.n_test = 24;
    const SyntheticDataset ds = synthesize_dataset(o);
    const std::size_t cell_area = static_cast<std::size_t>(o.cell_size) * o.cell_size;
    int swaps = 0, patches = 0;
    for (std::size_t i = 0; i < ds.test.samples.size(); ++i) {
        const Mask& m = *ds.test.samples[i].mask;
        std::size_t area = 0;
        int y0 = m.height, y1 = -1, x0 = m.width, x1 = -1;
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x)
                if (m.at(y, x)) {
                    ++area;
                    y0 = std::min(y0, y), y1 = std::max(y1, y), x0 = std::min(x0, x), x1 = std::max(x1, x);
                }
        if (ds.test_kinds[i] == "structure_swap") {
            ++swaps;
            EXPECT_EQ(area, 2 * cell_area);
        } else if (ds.test_kinds[i] == "texture_patch") {
            ++patches;
            const int h = y1 - y0 + 1, w = x1 - x0 + 1;
            EXPECT_EQ(area, static_cast<std::size_t>(h) * w);
            EXPECT_GE(h, 8);
            EXPECT_LE(h, 16);
            EXPECT_GE(w, 8);
            EXPECT_LE(w, 16);
        } else {
            EXPECT_EQ(area, 0u);
        }
    }
    EXPECT_EQ(swaps, 9);
    EXPECT_EQ(patches, 9);
}

TEST(Synthetic, ValuesLieOnTheEightBitGridAndSeedsAreDeterministic) {
    SyntheticOptions o;
    o.seed = 8;
    o.n_train = 3;
    o.n_test = 4;
    const SyntheticDataset a = synthesize_dataset(o), b = synthesize_dataset(o);
    for (std::size_t i = 0; i < a.train.samples.size(); ++i) {
        EXPECT_EQ(a.train.samples[i].pixels, b.train.samples[i].pixels);
        for (float v : a.train.samples[i].pixels.data) {
            const float scaled = v * 255.0f;
            EXPECT_NEAR(scaled, std::round(scaled), 1e-3);
        }
    }
    o.seed = 9;
    const SyntheticDataset c = synthesize_dataset(o);
    EXPECT_NE(a.train.samples[0].pixels, c.train.samples[0].pixels);
}

TEST(Synthetic, SingleKindRequestProducesOnlyThatKind) {
    SyntheticOptions o;
    o.n_train = 1;
    o.n_test = 8;
    o.anomaly_kinds = {AnomalyKind::structure_swap};
    const SyntheticDataset ds = synthesize_dataset(o);
    for (const auto& k : ds.test_kinds) EXPECT_TRUE(k.empty() || k == "structure_swap");
}

TEST(DatasetRoundTrip, LoadSaveLoadPreservesIdsOrderShapesAndPixels) {
    SyntheticOptions o;
    o.seed = 10;
    o.n_train = 4;
    o.n_test = 8;
    const SyntheticDataset ds = synthesize_dataset(o);
    const auto root = test::scratch_dir("roundtrip");
    save_dataset(ds.train, root);
    save_dataset(ds.test, root);
    for (const DatasetManifest* orig : {&ds.train, &ds.test}) {
        const DatasetManifest loaded = load_dataset(root, orig->split, o.resolution);
        const auto root2 = test::scratch_dir("roundtrip2");
        save_dataset(loaded, root2);
        const DatasetManifest again = load_dataset(root2, orig->split, o.resolution);
        ASSERT_EQ(loaded.samples.size(), orig->samples.size());
        ASSERT_EQ(again.samples.size(), orig->samples.size());
        for (std::size_t i = 0; i < orig->samples.size(); ++i) {
            EXPECT_EQ(loaded.samples[i].id, orig->samples[i].id);
            EXPECT_EQ(loaded.samples[i].pixels, orig->samples[i].pixels);
            EXPECT_EQ(again.samples[i].id, loaded.samples[i].id);
            EXPECT_EQ(again.samples[i].pixels, loaded.samples[i].pixels);
            if (orig->split == Split::test) {
                EXPECT_EQ(*loaded.samples[i].mask, *orig->samples[i].mask);
                EXPECT_EQ(*again.samples[i].mask, *loaded.samples[i].mask);
            }
        }
    }
}

TEST(ManifestIndex, WriteReadRoundTrip) {
    SyntheticOptions o;
    o.seed = 11;
    o.n_train = 2;
    o.n_test = 4;
    const SyntheticDataset ds = synthesize_dataset(o);
    const auto root = test::scratch_dir("index");
    const fs::path index = save_dataset(ds.test, root);
    const DatasetManifest back = read_manifest_index(index);
    EXPECT_EQ(back.split, Split::test);
    EXPECT_EQ(back.resolution, ds.test.resolution);
    ASSERT_EQ(back.samples.size(), ds.test.samples.size());
    for (std::size_t i = 0; i < back.samples.size(); ++i) {
        EXPECT_EQ(back.samples[i].id, ds.test.samples[i].id);
        EXPECT_EQ(back.samples[i].pixels, ds.test.samples[i].pixels);
        EXPECT_EQ(*back.samples[i].mask, *ds.test.samples[i].mask);
    }
}

} // namespace
} // namespace lsgs
