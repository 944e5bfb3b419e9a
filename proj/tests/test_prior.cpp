// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "lsgs/error.hpp"
#include "lsgs/prior.hpp"
#include "test_support.hpp"

namespace lsgs {
namespace {

PriorConfig tiny_prior(bool causal = false) {
    PriorConfig c;
    c.n_codes = 6;
    c.seq_len = 8;
    c.layers = 2;
    c.model_dim = 8;
    c.heads = 2;
    c.ff_dim = 16;
    c.causal = causal;
    c.seed = 3;
    return c;
}

CodeSequence random_sequence(int length, int n_codes, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> u(0, n_codes - 1);
    CodeSequence s{1, length, std::vector<int>(static_cast<std::size_t>(length))};
    for (int& t : s.tokens) t = u(rng);
    return s;
}

/// -log softmax(row)[target] in double via log-sum-exp.
double cross_entropy_oracle(const nn::Matrix& logits, int row, int target) {
    double mx = logits(row, 0);
    for (int j = 1; j < logits.cols(); ++j) mx = std::max(mx, static_cast<double>(logits(row, j)));
    double z = 0.0;
    for (int j = 0; j < logits.cols(); ++j) z += std::exp(logits(row, j) - mx);
    return mx + std::log(z) - logits(row, target);
}

TEST(TamperCount, RoundsHalfUpWithAFloorOfOne) {
    EXPECT_EQ(tamper_count(256, 0.1), 26);
    EXPECT_EQ(tamper_count(100, 0.1), 10);
    EXPECT_EQ(tamper_count(5, 0.1), 1);
    EXPECT_EQ(tamper_count(25, 0.1), 3);
    EXPECT_EQ(tamper_count(64, 0.0), 0);
    EXPECT_EQ(tamper_count(10, 1.0), 10);
}

TEST(Tamper, RecordDescribesTheChange) {
    std::mt19937_64 rng(1);
    const CodeSequence s = random_sequence(50, 7, rng);
    const auto [t, rec] = tamper(s, 0.1, 7, 9);
    ASSERT_EQ(rec.positions.size(), 5u);
    EXPECT_TRUE(std::is_sorted(rec.positions.begin(), rec.positions.end()));
    EXPECT_EQ(std::set<int>(rec.positions.begin(), rec.positions.end()).size(), 5u);
    std::size_t next = 0;
    for (int i = 0; i < 50; ++i) {
        const auto u = static_cast<std::size_t>(i);
        if (next < rec.positions.size() && rec.positions[next] == i) {
            EXPECT_EQ(rec.original_tokens[next], s.tokens[u]);
            EXPECT_EQ(rec.replacement_tokens[next], t.tokens[u]);
            EXPECT_GE(t.tokens[u], 0);
            EXPECT_LT(t.tokens[u], 7);
            ++next;
        } else {
            EXPECT_EQ(t.tokens[u], s.tokens[u]);
        }
    }
    const auto [again, rec2] = tamper(s, 0.1, 7, 9);
    EXPECT_EQ(again, t);
    EXPECT_EQ(rec2.positions, rec.positions);
}

TEST(Tamper, EachPositionIsChosenWithTheRateOverManySeeds) {
    const CodeSequence s{10, 10, std::vector<int>(100, 0)};
    std::vector<int> hits(100, 0);
    const int trials = 10000;
    for (int seed = 0; seed < trials; ++seed)
        for (int p : tamper(s, 0.1, 4, static_cast<std::uint64_t>(seed)).second.positions) ++hits[static_cast<std::size_t>(p)];
    for (int h : hits) EXPECT_NEAR(static_cast<double>(h) / trials, 0.10, 0.01);
}

TEST(Tamper, ReplacementTokensAreUniform) {
    const CodeSequence s{1, 100, std::vector<int>(100, 0)};
    std::vector<int> counts(4, 0);
    int total = 0;
    for (int seed = 0; seed < 2000; ++seed)
        for (int r : tamper(s, 0.1, 4, static_cast<std::uint64_t>(seed)).second.replacement_tokens) {
            ++counts[static_cast<std::size_t>(r)];
            ++total;
        }
    for (int c : counts) EXPECT_NEAR(static_cast<double>(c) / total, 0.25, 0.02);
}

TEST(FocalLoss, HandComputedExample) {
    // Two-code logits (a, 0) against target 1 give H = log(1 + e^a).
    nn::Matrix logits(4, 2);
    const float a2 = static_cast<float>(std::log(std::exp(2.0) - 1.0));
    const float a1 = static_cast<float>(std::log(std::exp(1.0) - 1.0));
    logits << a2, 0, a1, 0, a1, 0, a1, 0;
    const CodeSequence target{1, 4, {1, 1, 1, 1}};
    TamperRecord rec;
    rec.positions = {0};
    rec.original_tokens = {1};
    rec.replacement_tokens = {0};
    EXPECT_NEAR(focal_loss(logits, target, rec, 0.01).value, 2.01, 1e-6);
    EXPECT_NEAR(focal_loss(logits, target, rec, 0.01, true).value, 0.99 * 2.0 + 0.01 * 1.0, 1e-5);
}

TEST(FocalLoss, MatchesIndependentCrossEntropyAndGradient) {
    std::mt19937_64 rng(2);
    nn::Matrix logits = test::random_matrix(9, 5, rng, 2.0f);
    const CodeSequence target = random_sequence(9, 5, rng);
    TamperRecord rec;
    rec.positions = {1, 4, 7};
    rec.original_tokens = {target.tokens[1], target.tokens[4], target.tokens[7]};
    rec.replacement_tokens = rec.original_tokens;
    const double beta = 0.2;
    double expect = 0.0;
    for (int i = 0; i < 9; ++i) {
        const bool tampered = i == 1 || i == 4 || i == 7;
        expect += (tampered ? 1.0 - beta : beta) * cross_entropy_oracle(logits, i, target.tokens[static_cast<std::size_t>(i)]);
    }
    const FocalLoss fl = focal_loss(logits, target, rec, beta);
    EXPECT_NEAR(fl.value, expect, 1e-5);
    const auto h = token_cross_entropy(logits, target);
    for (int i = 0; i < 9; ++i) EXPECT_NEAR(h[static_cast<std::size_t>(i)], cross_entropy_oracle(logits, i, target.tokens[static_cast<std::size_t>(i)]), 1e-5);
    const auto loss = [&] { return focal_loss(logits, target, rec, beta).value; };
    EXPECT_LT(test::gradient_error(logits.data(), fl.grad.data(), static_cast<std::size_t>(logits.size()), loss, rng, 32, 1e-2f),
              1e-2);
}

TEST(FocalLoss, BetaOutsideUnitIntervalIsConfigError) {
    const nn::Matrix logits = nn::Matrix::Zero(2, 3);
    const CodeSequence target{1, 2, {0, 1}};
    EXPECT_THROW(focal_loss(logits, target, {}, -0.1), ConfigError);
    EXPECT_THROW(focal_loss(logits, target, {}, 1.5), ConfigError);
}

TEST(PriorModel, BidirectionalLogitsAtFirstPositionDependOnLastToken) {
    const PriorModel model(tiny_prior());
    std::mt19937_64 rng(4);
    CodeSequence s = random_sequence(8, 6, rng);
    const nn::Matrix before = model.conditional_logits(s);
    s.tokens.back() = (s.tokens.back() + 1) % 6;
    const nn::Matrix after = model.conditional_logits(s);
    EXPECT_GT((before.row(0) - after.row(0)).cwiseAbs().maxCoeff(), 1e-6f);
}

TEST(PriorModel, CausalLogitsAtFirstPositionIgnoreLaterTokens) {
    const PriorModel model(tiny_prior(true));
    std::mt19937_64 rng(4);
    CodeSequence s = random_sequence(8, 6, rng);
    const nn::Matrix before = model.conditional_logits(s);
    s.tokens.back() = (s.tokens.back() + 1) % 6;
    const nn::Matrix after = model.conditional_logits(s);
    EXPECT_TRUE(before.row(0) == after.row(0));
}

TEST(PriorModel, RejectsBadTokensAndLengths) {
    const PriorModel model(tiny_prior());
    EXPECT_THROW(model.conditional_logits(CodeSequence{1, 8, {0, 1, 2, 3, 4, 5, 6, 0}}), DataError);
    EXPECT_THROW(model.conditional_logits(CodeSequence{1, 8, {0, 1, 2, 3, 4, 5, -1, 0}}), DataError);
    EXPECT_THROW(model.conditional_logits(CodeSequence{1, 3, {0, 1, 2}}), ShapeError);
}

TEST(PriorModel, ParameterGradientsMatchFiniteDifferences) {
    PriorModel model(tiny_prior());
    std::mt19937_64 rng(5);
    const CodeSequence target = random_sequence(8, 6, rng);
    const auto [input, rec] = tamper(target, 0.25, 6, 1);
    const auto loss_fn = [&](const nn::Matrix& logits, nn::Matrix& dlogits) {
        FocalLoss fl = focal_loss(logits, target, rec, 0.1);
        dlogits = fl.grad;
        return fl.value;
    };
    for (auto& p : model.parameters()) p.param->zero_grad();
    model.accumulate_gradients(input, loss_fn);
    const auto loss = [&] { return focal_loss(model.conditional_logits(input), target, rec, 0.1).value; };
    for (auto& p : model.parameters()) {
        const auto n = static_cast<std::size_t>(p.param->value.size());
        EXPECT_LT(test::gradient_error(p.param->value.data(), p.param->grad.data(), n, loss, rng, 12, 1e-3f), 2e-2)
            << p.name;
    }
}

TEST(Resample, ZeroTemperatureIsArgmaxAndNegativeIsConfigError) {
    const PriorModel model(tiny_prior());
    std::mt19937_64 rng(6);
    const CodeSequence s = random_sequence(8, 6, rng);
    const nn::Matrix logits = model.conditional_logits(s);
    const CodeSequence r = resample_sequence(model, s, 0.0, 1);
    for (int i = 0; i < 8; ++i) {
        Eigen::Index arg = 0;
        logits.row(i).maxCoeff(&arg);
        EXPECT_EQ(r.tokens[static_cast<std::size_t>(i)], static_cast<int>(arg));
    }
    EXPECT_EQ(resample_sequence(model, s, 0.0, 99), r);
    EXPECT_THROW(resample_sequence(model, s, -1.0, 1), ConfigError);
}

TEST(Resample, SeededSamplingIsReproducible) {
    const PriorModel model(tiny_prior());
    std::mt19937_64 rng(7);
    const CodeSequence s = random_sequence(8, 6, rng);
    EXPECT_EQ(resample_sequence(model, s, 1.0, 5), resample_sequence(model, s, 1.0, 5));
}

TEST(TrainPrior, LearnsToRestoreAConstantPattern) {
    PriorConfig c = tiny_prior();
    c.train_steps = 300;
    c.batch_size = 8;
    c.learning_rate = 3e-3f;
    c.tamper_rate = 0.25;
    PriorModel model(c);
    std::vector<CodeSequence> data;
    for (int i = 0; i < 4; ++i) data.push_back(CodeSequence{1, 8, {0, 1, 2, 3, 4, 5, 0, 1}});
    const double before = restoration_accuracy(model, data, 0.25, 11);
    train_prior(model, data);
    const double after = restoration_accuracy(model, data, 0.25, 11);
    EXPECT_GE(after, 0.9);
    EXPECT_GT(after, before);
}

} // namespace
} // namespace lsgs
