// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#include "lsgs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "lsgs/error.hpp"

namespace lsgs {

namespace {

void check_inputs(std::span<const float> scores, std::span<const std::uint8_t> labels, const char* metric) {
    if (scores.size() != labels.size()) throw ShapeError(std::string(metric) + ": scores and labels differ in length");
    const auto pos = std::count_if(labels.begin(), labels.end(), [](std::uint8_t l) { return l != 0; });
    if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size()))
        throw UndefinedMetricError(std::string(metric) + " needs both positive and negative pixels");
}

std::vector<std::size_t> order_descending(std::span<const float> scores) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return idx;
}

} // namespace

double pixel_ap(std::span<const float> scores, std::span<const std::uint8_t> labels) {
    check_inputs(scores, labels, "AP");
    const auto idx = order_descending(scores);
    const double total_pos = static_cast<double>(std::count_if(labels.begin(), labels.end(), [](auto l) { return l != 0; }));
    double tp = 0.0, fp = 0.0, prev_recall = 0.0, ap = 0.0;
    std::size_t i = 0;
    while (i < idx.size()) {
        const float s = scores[idx[i]];
        while (i < idx.size() && scores[idx[i]] == s) {
            (labels[idx[i]] ? tp : fp) += 1.0;
            ++i;
        }
        const double recall = tp / total_pos;
        ap += (recall - prev_recall) * (tp / (tp + fp));
        prev_recall = recall;
    }
    return ap;
}

double pixel_auroc(std::span<const float> scores, std::span<const std::uint8_t> labels) {
    check_inputs(scores, labels, "AUROC");
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double pos_rank_sum = 0.0, pos = 0.0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0; // 1-based
        for (std::size_t k = i; k < j; ++k)
            if (labels[idx[k]]) {
                pos_rank_sum += avg_rank;
                pos += 1.0;
            }
        i = j;
    }
    const double neg = static_cast<double>(scores.size()) - pos;
    return (pos_rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

std::vector<double> quantile_thresholds(std::span<const float> scores, int count) {
    if (count < 1) throw ConfigError("threshold sweep needs at least one point");
    if (scores.empty()) return {};
    std::vector<float> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(count));
    const double last = static_cast<double>(sorted.size() - 1);
    for (int i = 0; i < count; ++i) {
        const double q = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
        out.push_back(sorted[static_cast<std::size_t>(std::llround(q * last))]);
    }
    return out;
}

DiceResult best_dice(std::span<const float> scores, std::span<const std::uint8_t> labels,
                     std::span<const double> sweep) {
    if (sweep.empty()) throw ConfigError("best_dice needs a nonempty threshold sweep");
    if (scores.size() != labels.size()) throw ShapeError("Dice: scores and labels differ in length");
    std::vector<float> all(scores.begin(), scores.end());
    std::vector<float> pos;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (labels[i]) pos.push_back(scores[i]);
    std::sort(all.begin(), all.end());
    std::sort(pos.begin(), pos.end());
    const double gt = static_cast<double>(pos.size());

    DiceResult best{-1.0, 0.0};
    for (double t : sweep) {
        const auto at_least = [t](const std::vector<float>& v) {
            return static_cast<double>(v.end() - std::lower_bound(v.begin(), v.end(), t,
                                                                  [](float a, double b) { return static_cast<double>(a) < b; }));
        };
        const double pred = at_least(all);
        const double tp = at_least(pos);
        const double dice = (pred + gt) == 0.0 ? 1.0 : 2.0 * tp / (pred + gt);
        if (dice > best.dice || (dice == best.dice && t < best.threshold)) best = {dice, t};
    }
    return best;
}

EvaluationReport evaluate(std::span<const ScorePlane> scores, std::span<const Mask> masks,
                          std::span<const std::string> ids, int sweep_size) {
    if (scores.size() != masks.size() || scores.size() != ids.size())
        throw ShapeError("evaluate: scores, masks and ids differ in count");
    std::vector<float> flat_scores;
    std::vector<std::uint8_t> flat_labels;
    for (std::size_t s = 0; s < scores.size(); ++s) {
        if (scores[s].height != masks[s].height || scores[s].width != masks[s].width)
            throw DataError("score map shape differs from mask for sample " + ids[s]);
        flat_scores.insert(flat_scores.end(), scores[s].data.begin(), scores[s].data.end());
        flat_labels.insert(flat_labels.end(), masks[s].data.begin(), masks[s].data.end());
    }
    EvaluationReport r;
    r.positives = static_cast<std::size_t>(std::count_if(flat_labels.begin(), flat_labels.end(), [](auto l) { return l != 0; }));
    r.negatives = flat_labels.size() - r.positives;
    r.ap = pixel_ap(flat_scores, flat_labels);
    r.auroc = pixel_auroc(flat_scores, flat_labels);
    const auto sweep = quantile_thresholds(flat_scores, sweep_size);
    const DiceResult d = best_dice(flat_scores, flat_labels, sweep);
    r.dice = d.dice;
    r.dice_threshold = d.threshold;
    for (std::size_t s = 0; s < scores.size(); ++s) {
        SampleEvaluation e;
        e.id = ids[s];
        double pred = 0.0, tp = 0.0, gt = 0.0;
        for (std::size_t i = 0; i < scores[s].size(); ++i) {
            const bool p = scores[s].data[i] >= d.threshold;
            const bool g = masks[s].data[i] != 0;
            pred += p;
            gt += g;
            tp += p && g;
        }
        e.positives = static_cast<std::size_t>(gt);
        e.empty_convention = pred + gt == 0.0;
        e.dice = e.empty_convention ? 1.0 : 2.0 * tp / (pred + gt);
        r.samples.push_back(std::move(e));
    }
    return r;
}

std::string format_report_table(const EvaluationReport& r) {
    std::ostringstream os;
    os << std::fixed;
    os << "lsgs-report 1\n";
    os << std::left << std::setw(10) << "metric" << std::right << std::setw(12) << "fraction" << std::setw(10) << "percent" << "\n";
    const auto row = [&](const char* name, double v) {
        os << std::left << std::setw(10) << name << std::right << std::setprecision(6) << std::setw(12) << v
           << std::setprecision(2) << std::setw(10) << 100.0 * v << "\n";
    };
    row("AP", r.ap);
    row("AUROC", r.auroc);
    row("Dice", r.dice);
    os << std::setprecision(9) << "dice threshold " << r.dice_threshold << "\n";
    os << "pixels positive " << r.positives << " negative " << r.negatives << "\n";
    os << "per-sample dice at the split threshold:\n";
    for (const auto& s : r.samples) {
        os << "  " << std::left << std::setw(28) << s.id << std::right << std::setprecision(6) << std::setw(10) << s.dice
           << std::setw(8) << s.positives << (s.empty_convention ? "  (empty/empty = 1)" : "") << "\n";
    }
    return os.str();
}

std::string format_report_kv(const EvaluationReport& r) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "version = 1\n"
       << "ap = " << r.ap << "\n"
       << "auroc = " << r.auroc << "\n"
       << "dice = " << r.dice << "\n"
       << "dice_threshold = " << r.dice_threshold << "\n"
       << "positives = " << r.positives << "\n"
       << "negatives = " << r.negatives << "\n"
       << "dice_empty_convention = 1.0\n";
    for (const auto& s : r.samples) os << "sample." << s.id << ".dice = " << s.dice << "\n";
    return os.str();
}

void write_report(const EvaluationReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "report.txt") << format_report_table(report);
    std::ofstream(dir / "report.kv") << format_report_kv(report);
}

} // namespace lsgs
