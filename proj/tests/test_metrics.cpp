// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "lsgs/error.hpp"
#include "lsgs/metrics.hpp"
#include "test_support.hpp"

namespace lsgs {
namespace {

using Labels = std::vector<std::uint8_t>;

/// P(score_pos > score_neg) + 0.5 P(equal), by enumerating every pair.
double pairwise_auroc(const std::vector<float>& s, const Labels& l) {
    double wins = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j)
            if (l[i] && !l[j]) {
                pairs += 1.0;
                wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
            }
    return wins / pairs;
}

/// Step-wise PR area with precision and recall recounted at every distinct
/// threshold from the top.
double counting_ap(const std::vector<float>& s, const Labels& l) {
    std::set<float, std::greater<>> thresholds(s.begin(), s.end());
    double total_pos = 0.0;
    for (auto v : l) total_pos += v;
    double prev = 0.0, ap = 0.0;
    for (float t : thresholds) {
        double tp = 0.0, pred = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i)
            if (s[i] >= t) {
                pred += 1.0;
                tp += l[i];
            }
        ap += (tp / total_pos - prev) * (tp / pred);
        prev = tp / total_pos;
    }
    return ap;
}

std::pair<std::vector<float>, Labels> random_instance(std::size_t n, std::mt19937_64& rng, int levels = 0) {
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    std::uniform_int_distribution<int> lv(0, std::max(levels - 1, 0));
    std::bernoulli_distribution coin(0.3);
    std::vector<float> s(n);
    Labels l(n);
    for (std::size_t i = 0; i < n; ++i) {
        s[i] = levels > 0 ? static_cast<float>(lv(rng)) / static_cast<float>(levels) : u(rng);
        l[i] = coin(rng);
    }
    l[0] = 1;
    l[1] = 0;
    return {s, l};
}

TEST(PixelAp, HandComputedCase) {
    const std::vector<float> s{0.9f, 0.8f, 0.7f, 0.6f};
    const Labels l{1, 0, 1, 0};
    EXPECT_NEAR(pixel_ap(s, l), 5.0 / 6.0, 1e-12);
}

TEST(PixelAp, PerfectRankingAndAllEqualScores) {
    const std::vector<float> s{1, 0, 1, 0, 0};
    const Labels l{1, 0, 1, 0, 0};
    EXPECT_DOUBLE_EQ(pixel_ap(s, l), 1.0);
    const std::vector<float> flat(5, 0.4f);
    EXPECT_DOUBLE_EQ(pixel_ap(flat, l), 0.4);
}

TEST(PixelAp, MatchesCountingOracleWithAndWithoutTies) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 40; ++trial) {
        const auto [s, l] = random_instance(20 + static_cast<std::size_t>(trial) * 4, rng, trial % 2 ? 7 : 0);
        EXPECT_NEAR(pixel_ap(s, l), counting_ap(s, l), 1e-12);
    }
}

TEST(PixelAuroc, MatchesPairwiseOracle) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 5 + static_cast<std::size_t>(trial) * 5;
        const auto [s, l] = random_instance(n, rng, trial % 2 ? 5 : 0);
        EXPECT_NEAR(pixel_auroc(s, l), pairwise_auroc(s, l), 1e-9);
    }
}

TEST(PixelAuroc, SeparatedScoresGiveOneAndIndependentLabelsGiveAHalf) {
    EXPECT_DOUBLE_EQ(pixel_auroc(std::vector<float>{0.1f, 0.2f, 0.8f, 0.9f}, Labels{0, 0, 1, 1}), 1.0);
    std::mt19937_64 rng(3);
    const auto [s, l] = random_instance(1000, rng);
    EXPECT_NEAR(pixel_auroc(s, l), 0.5, 0.05);
}

TEST(RankingMetrics, InvariantUnderMonotoneTransformAndShuffle) {
    std::mt19937_64 rng(4);
    auto [s, l] = random_instance(150, rng, 9);
    std::vector<float> t(s.size());
    std::transform(s.begin(), s.end(), t.begin(), [](float v) { return std::exp(3.0f * v) - 2.0f; });
    EXPECT_DOUBLE_EQ(pixel_ap(s, l), pixel_ap(t, l));
    EXPECT_DOUBLE_EQ(pixel_auroc(s, l), pixel_auroc(t, l));
    const auto dice = [](const std::vector<float>& x, const Labels& y) {
        return best_dice(x, y, quantile_thresholds(x, 101)).dice;
    };
    EXPECT_DOUBLE_EQ(dice(s, l), dice(t, l));

    std::vector<std::size_t> perm(s.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<float> ps(s.size());
    Labels pl(s.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        ps[i] = s[perm[i]];
        pl[i] = l[perm[i]];
    }
    EXPECT_NEAR(pixel_ap(s, l), pixel_ap(ps, pl), 1e-12);
    EXPECT_NEAR(pixel_auroc(s, l), pixel_auroc(ps, pl), 1e-12);
    EXPECT_DOUBLE_EQ(dice(s, l), dice(ps, pl));
}

TEST(RankingMetrics, SingleClassIsUndefinedAndLengthMismatchIsShapeError) {
    const std::vector<float> s{0.1f, 0.2f};
    EXPECT_THROW(pixel_ap(s, Labels{1, 1}), UndefinedMetricError);
    EXPECT_THROW(pixel_auroc(s, Labels{0, 0}), UndefinedMetricError);
    EXPECT_THROW(pixel_ap(s, Labels{1}), ShapeError);
}

TEST(QuantileThresholds, NearestRankOverSortedScores) {
    const std::vector<float> s{5, 1, 4, 2, 3};
    EXPECT_EQ(quantile_thresholds(s, 5), (std::vector<double>{1, 2, 3, 4, 5}));
    EXPECT_EQ(quantile_thresholds(s, 3), (std::vector<double>{1, 3, 5}));
    EXPECT_EQ(quantile_thresholds(s, 1), (std::vector<double>{1}));
}

TEST(BestDice, MatchesCountingOracleOnEightByEightMaps) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        const auto [s, l] = random_instance(64, rng, trial % 3 ? 0 : 6);
        const auto sweep = quantile_thresholds(s, 101);
        double best = -1.0, best_t = 0.0;
        for (double t : sweep) {
            int pred = 0, gt = 0, tp = 0;
            for (std::size_t i = 0; i < 64; ++i) {
                const bool p = static_cast<double>(s[i]) >= t;
                pred += p;
                gt += l[i];
                tp += p && l[i];
            }
            const double d = 2.0 * tp / (pred + gt);
            if (d > best || (d == best && t < best_t)) {
                best = d;
                best_t = t;
            }
        }
        const DiceResult r = best_dice(s, l, sweep);
        EXPECT_EQ(r.dice, best);
        EXPECT_EQ(r.threshold, best_t);
    }
}

TEST(BestDice, IdentityDisjointAndEmptyConventions) {
    const std::vector<float> s{0, 1, 1, 0};
    EXPECT_DOUBLE_EQ(best_dice(s, Labels{0, 1, 1, 0}, quantile_thresholds(s, 11)).dice, 1.0);
    const std::vector<double> high{2.0, 3.0};
    EXPECT_DOUBLE_EQ(best_dice(s, Labels{0, 1, 1, 0}, high).dice, 0.0);
    EXPECT_DOUBLE_EQ(best_dice(s, Labels{0, 0, 0, 0}, high).dice, 1.0);
    EXPECT_THROW(best_dice(s, Labels{0, 1, 1, 0}, std::vector<double>{}), ConfigError);
}

TEST(BestDice, TiesGoToTheSmallestThreshold) {
    const std::vector<float> s{0.2f, 0.9f};
    const DiceResult r = best_dice(s, Labels{0, 1}, std::vector<double>{0.8, 0.5, 0.3});
    EXPECT_DOUBLE_EQ(r.dice, 1.0);
    EXPECT_DOUBLE_EQ(r.threshold, 0.3);
}

TEST(Evaluate, PerfectMapsScoreOneAndPixelsArePooled) {
    std::vector<ScorePlane> scores;
    std::vector<Mask> masks;
    const std::vector<std::string> ids{"a", "b"};
    Mask m1(4, 4, 0), m2(4, 4, 0);
    m1.at(1, 1) = m1.at(1, 2) = 1;
    masks = {m1, m2};
    for (const Mask& m : masks) {
        ScorePlane s(4, 4);
        for (std::size_t i = 0; i < s.size(); ++i) s.data[i] = m.data[i];
        scores.push_back(s);
    }
    const EvaluationReport r = evaluate(scores, masks, ids);
    EXPECT_DOUBLE_EQ(r.ap, 1.0);
    EXPECT_DOUBLE_EQ(r.auroc, 1.0);
    EXPECT_DOUBLE_EQ(r.dice, 1.0);
    EXPECT_EQ(r.positives, 2u);
    EXPECT_EQ(r.negatives, 30u);
    ASSERT_EQ(r.samples.size(), 2u);
    EXPECT_FALSE(r.samples[0].empty_convention);
    EXPECT_TRUE(r.samples[1].empty_convention);
    EXPECT_DOUBLE_EQ(r.samples[1].dice, 1.0);
}

TEST(Evaluate, ShapeMismatchNamesTheSample) {
    const std::vector<ScorePlane> scores{ScorePlane(4, 4)};
    const std::vector<Mask> masks{Mask(4, 5)};
    const std::vector<std::string> ids{"odd_sample"};
    try {
        evaluate(scores, masks, ids);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("odd_sample"), std::string::npos);
    }
}

TEST(Report, FormatsAreDeterministicAndComplete) {
    std::vector<ScorePlane> scores{ScorePlane(2, 2)};
    scores[0].data = {0.1f, 0.7f, 0.3f, 0.9f};
    Mask m(2, 2, 0);
    m.data = {0, 1, 0, 1};
    const std::vector<Mask> masks{m};
    const std::vector<std::string> ids{"x"};
    const EvaluationReport r = evaluate(scores, masks, ids);
    const std::string kv = format_report_kv(r);
    EXPECT_EQ(kv, format_report_kv(evaluate(scores, masks, ids)));
    for (const char* key : {"version = 1", "ap = ", "auroc = ", "dice = ", "dice_threshold = ", "sample.x.dice = "})
        EXPECT_NE(kv.find(key), std::string::npos) << key;
    EXPECT_EQ(format_report_table(r).rfind("lsgs-report 1\n", 0), 0u);
}

} // namespace
} // namespace lsgs
