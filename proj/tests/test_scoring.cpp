// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "lsgs/error.hpp"
#include "lsgs/scoring.hpp"
#include "test_support.hpp"

namespace lsgs {
namespace {

Image constant_image(int c, int h, int w, float v) { return Image(c, h, w, v); }

RestorationSet worked_example() {
    RestorationSet set;
    set.x_hat = constant_image(1, 2, 2, 0.0f);
    Image y1 = constant_image(1, 2, 2, 0.0f);
    y1.at(0, 0, 0) = 1.0f;
    set.restorations = {y1, constant_image(1, 2, 2, 1.0f)};
    return set;
}

TEST(AnomalyScore, TwoRestorationWorkedExample) {
    const WeightedScore s = anomaly_score(worked_example(), 1.0, 1e-12);
    const double e1 = std::exp(1.0), e4 = std::exp(0.25);
    EXPECT_NEAR(s.weights[0], e1 / (e1 + e4), 1e-12);
    EXPECT_NEAR(s.weights[0], 0.6792, 1e-3);
    EXPECT_NEAR(s.weights[1], 0.3208, 1e-3);
    EXPECT_NEAR(s.scores.at(0, 0), 1.0, 1e-6);
    for (int p = 1; p < 4; ++p) EXPECT_NEAR(s.scores.data[static_cast<std::size_t>(p)], e4 / (e1 + e4), 1e-6);
}

TEST(AnomalyScore, WeightsSumToOneOnRandomInstances) {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> count(1, 6);
    std::uniform_real_distribution<double> kdist(0.1, 50.0);
    for (int trial = 0; trial < 100; ++trial) {
        RestorationSet set;
        set.x_hat = test::random_tensor(2, 5, 4, rng);
        const int n = count(rng);
        for (int i = 0; i < n; ++i) set.restorations.push_back(test::random_tensor(2, 5, 4, rng));
        const WeightedScore s = anomaly_score(set, kdist(rng), 1e-6);
        double total = 0.0;
        for (double w : s.weights) {
            EXPECT_GE(w, 0.0);
            total += w;
        }
        EXPECT_NEAR(total, 1.0, 1e-9);
    }
}

TEST(AnomalyScore, IdenticalRestorationsScoreZero) {
    std::mt19937_64 rng(2);
    RestorationSet set;
    set.x_hat = test::random_tensor(3, 4, 4, rng);
    set.restorations = {set.x_hat, set.x_hat, set.x_hat};
    const WeightedScore s = anomaly_score(set, 1.0, 1e-6);
    for (double w : s.weights) EXPECT_NEAR(w, 1.0 / 3.0, 1e-12);
    for (float v : s.scores.data) EXPECT_EQ(v, 0.0f);
}

TEST(AnomalyScore, SingleRestorationIsTheChannelMeanAbsoluteDifference) {
    std::mt19937_64 rng(3);
    RestorationSet set;
    set.x_hat = test::random_tensor(3, 4, 5, rng);
    set.restorations = {test::random_tensor(3, 4, 5, rng)};
    for (double k : {0.5, 7.0}) {
        const WeightedScore s = anomaly_score(set, k, 1e-6);
        EXPECT_EQ(s.weights[0], 1.0);
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 5; ++x) {
                double d = 0.0;
                for (int c = 0; c < 3; ++c) d += std::abs(set.x_hat.at(c, y, x) - set.restorations[0].at(c, y, x));
                EXPECT_NEAR(s.scores.at(y, x), d / 3.0, 1e-6);
            }
    }
}

TEST(AnomalyScore, ContractAndConfigErrors) {
    RestorationSet empty;
    empty.x_hat = constant_image(1, 2, 2, 0.0f);
    EXPECT_THROW(anomaly_score(empty, 1.0, 1e-6), ContractError);
    EXPECT_THROW(anomaly_score(worked_example(), 0.0, 1e-6), ConfigError);
    EXPECT_THROW(anomaly_score(worked_example(), 1.0, 0.0), ConfigError);
    RestorationSet bad = worked_example();
    bad.restorations[1] = constant_image(1, 3, 2, 0.0f);
    EXPECT_THROW(anomaly_score(bad, 1.0, 1e-6), ShapeError);
}

/// Edge-replicated copy with an r-pixel border.
std::vector<std::vector<float>> pad_replicate(const ScorePlane& in, int r) {
    std::vector<std::vector<float>> out(static_cast<std::size_t>(in.height + 2 * r),
                                        std::vector<float>(static_cast<std::size_t>(in.width + 2 * r)));
    for (int y = 0; y < in.height + 2 * r; ++y)
        for (int x = 0; x < in.width + 2 * r; ++x) {
            const int sy = std::min(std::max(y - r, 0), in.height - 1);
            const int sx = std::min(std::max(x - r, 0), in.width - 1);
            out[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] = in.at(sy, sx);
        }
    return out;
}

ScorePlane naive_smooth(const ScorePlane& in) {
    const auto p3 = pad_replicate(in, 1);
    ScorePlane eroded(in.height, in.width);
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) {
            float m = p3[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)];
            for (int wy = 0; wy < 3; ++wy)
                for (int wx = 0; wx < 3; ++wx) m = std::min(m, p3[static_cast<std::size_t>(y + wy)][static_cast<std::size_t>(x + wx)]);
            eroded.at(y, x) = m;
        }
    const auto p7 = pad_replicate(eroded, 3);
    ScorePlane out(in.height, in.width);
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) {
            double s = 0.0;
            for (int wy = 0; wy < 7; ++wy)
                for (int wx = 0; wx < 7; ++wx) s += p7[static_cast<std::size_t>(y + wy)][static_cast<std::size_t>(x + wx)];
            out.at(y, x) = static_cast<float>(s / 49.0);
        }
    return out;
}

TEST(Smooth, EqualsNaiveSlidingWindowReference) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (int trial = 0; trial < 50; ++trial) {
        ScorePlane in(16, 16);
        for (float& v : in.data) v = u(rng);
        EXPECT_EQ(smooth(in), naive_smooth(in)) << "trial " << trial;
    }
}

TEST(Smooth, SinglePixelSpikeIsSuppressed) {
    ScorePlane in(16, 16, 0.0f);
    in.at(7, 9) = 5.0f;
    for (float v : smooth(in).data) EXPECT_EQ(v, 0.0f);
}

TEST(Smooth, ConstantMapIsUnchanged) {
    const ScorePlane in(9, 11, 0.375f);
    EXPECT_EQ(smooth(in), in);
}

TEST(ForegroundMask, ThresholdsChannelMaxAndClosesHoles) {
    Image img(3, 12, 12, 0.0f);
    for (int y = 3; y < 9; ++y)
        for (int x = 3; x < 9; ++x) img.at(2, y, x) = 0.5f;
    img.at(2, 5, 5) = 0.0f;
    img.at(0, 0, 11) = 0.01f;
    const Mask m = foreground_mask(img, 0.02);
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 12; ++x) EXPECT_EQ(m.at(y, x), (y >= 3 && y < 9 && x >= 3 && x < 9) ? 1 : 0) << y << "," << x;
}

TEST(ApplyMask, ZeroesBackgroundAndChecksShape) {
    ScorePlane s(2, 2, 1.0f);
    Mask m(2, 2, 1);
    m.at(1, 0) = 0;
    const ScorePlane out = apply_mask(s, m);
    EXPECT_EQ(out.data, (std::vector<float>{1, 1, 0, 1}));
    EXPECT_THROW(apply_mask(s, Mask(3, 2, 1)), ShapeError);
}

TEST(Postprocess, OrderFollowsConfig) {
    std::mt19937_64 rng(5);
    Image img(1, 16, 16, 0.0f);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 8; ++x) img.at(0, y, x) = 0.5f;
    ScorePlane raw(16, 16);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (float& v : raw.data) v = u(rng);
    ScoringConfig c;
    const Mask fg = foreground_mask(img, c.fg_threshold);
    EXPECT_EQ(postprocess(raw, img, c), smooth(apply_mask(raw, fg)));
    c.fuse_before_smooth = false;
    EXPECT_EQ(postprocess(raw, img, c), apply_mask(smooth(raw), fg));
    c.use_foreground_mask = false;
    EXPECT_EQ(postprocess(raw, img, c), smooth(raw));
}

VqvaeConfig tiny_vqvae() {
    VqvaeConfig c;
    c.embedding_dim = 4;
    c.n_codes = 6;
    c.hidden_channels = 4;
    c.residual_hidden = 2;
    return c;
}

PriorConfig tiny_prior() {
    PriorConfig c;
    c.n_codes = 6;
    c.seq_len = 4;
    c.layers = 1;
    c.model_dim = 8;
    c.heads = 2;
    c.ff_dim = 8;
    return c;
}

TEST(BuildRestorations, DecodesSeededResamples) {
    const VqvaeModel vq(tiny_vqvae());
    const PriorModel prior(tiny_prior());
    std::mt19937_64 rng(6);
    Image img = test::random_tensor(1, 16, 16, rng);
    for (float& v : img.data) v = std::abs(v);
    const RestorationSet set = build_restorations(vq, prior, img, 3, 1.0, 40);
    EXPECT_EQ(set.x_hat, vq.reconstruct(img));
    ASSERT_EQ(set.restorations.size(), 3u);
    const CodeSequence seq = CodeSequence::from_grid(vq.encode_to_grid(img));
    for (std::uint64_t i = 1; i <= 3; ++i) {
        EXPECT_EQ(set.seeds[i - 1], 40 + i);
        EXPECT_EQ(set.restorations[i - 1], vq.decode(resample_sequence(prior, seq, 1.0, 40 + i).to_grid()));
    }
    EXPECT_EQ(build_restorations(vq, prior, img, 3, 1.0, 40).restorations, set.restorations);
}

TEST(ScoreMapIo, RoundTripAndSidecars) {
    std::mt19937_64 rng(7);
    AnomalyScoreMap map;
    map.scores = ScorePlane(5, 7);
    std::uniform_real_distribution<float> u(0.0f, 3.0f);
    for (float& v : map.scores.data) v = u(rng);
    map.provenance = {"sample_1", "aa", "bb", 8, 1.0, 1.0, 12};
    const auto dir = test::scratch_dir("scoremap");
    write_score_map(map, dir / "sample_1");
    EXPECT_EQ(read_score_grid(dir / "sample_1.score"), map.scores);
    EXPECT_TRUE(std::filesystem::exists(dir / "sample_1.png"));
    std::ifstream meta(dir / "sample_1.meta");
    std::string first;
    std::getline(meta, first);
    EXPECT_EQ(first, "lsgs-score-meta 1");
    EXPECT_THROW(read_score_grid(dir / "missing.score"), DataError);
}

} // namespace
} // namespace lsgs
