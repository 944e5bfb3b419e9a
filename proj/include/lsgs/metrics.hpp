// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lsgs/image.hpp"

namespace lsgs {

/// Area under the precision-recall curve by the step rule over distinct
/// score thresholds. Throws UndefinedMetricError unless both classes occur.
double pixel_ap(std::span<const float> scores, std::span<const std::uint8_t> labels);

/// Mann-Whitney statistic, ties credited 0.5. Throws UndefinedMetricError
/// unless both classes occur.
double pixel_auroc(std::span<const float> scores, std::span<const std::uint8_t> labels);

/// `count` nearest-rank quantiles of the score distribution, q = i/(count-1).
std::vector<double> quantile_thresholds(std::span<const float> scores, int count);

struct DiceResult {
    double dice = 0.0;
    double threshold = 0.0;
};

/// Dice of (scores >= t) against labels maximised over `sweep`; ties go to the
/// smallest threshold. Dice is 1 when prediction and ground truth are both
/// empty. Throws ConfigError on an empty sweep.
DiceResult best_dice(std::span<const float> scores, std::span<const std::uint8_t> labels,
                     std::span<const double> sweep);

struct SampleEvaluation {
    std::string id;
    double dice = 0.0; // at the split-level threshold
    std::size_t positives = 0;
    bool empty_convention = false; // empty truth and empty prediction
};

struct EvaluationReport {
    double ap = 0.0;
    double auroc = 0.0;
    double dice = 0.0;
    double dice_threshold = 0.0;
    std::size_t positives = 0;
    std::size_t negatives = 0;
    std::vector<SampleEvaluation> samples;
};

/// Pixels pooled across every sample for AP, AUROC and Dice.
EvaluationReport evaluate(std::span<const ScorePlane> scores, std::span<const Mask> masks,
                          std::span<const std::string> ids, int sweep_size = 101);

/// Plain-text table (fractions plus a percentage column).
std::string format_report_table(const EvaluationReport& report);
/// Machine-readable `key = value` lines.
std::string format_report_kv(const EvaluationReport& report);

void write_report(const EvaluationReport& report, const std::filesystem::path& dir);

} // namespace lsgs
