// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lsgs/config.hpp"
#include "lsgs/metrics.hpp"

namespace lsgs {

/// Line-oriented log: `lsgs <stage> key=value key=value ...`. No timestamps,
/// so identical runs produce identical logs.
class RunLog {
public:
    explicit RunLog(std::ostream* out = nullptr) : out_(out) {}
    void record(std::string_view stage, const std::vector<std::pair<std::string, std::string>>& fields) const;

private:
    std::ostream* out_;
};

/// Shortest round-trip decimal form used in logs and reports.
std::string format_number(double value);

/// Fixed file names inside a run directory.
struct RunPaths {
    std::filesystem::path root;

    std::filesystem::path vqvae() const { return root / "vqvae.ckpt"; }
    std::filesystem::path aggregated() const { return root / "vqvae_aggregated.ckpt"; }
    std::filesystem::path aggregation_report() const { return root / "aggregation.kv"; }
    std::filesystem::path corpus() const { return root / "corpus"; }
    std::filesystem::path prior() const { return root / "prior.ckpt"; }
    std::filesystem::path causal_prior() const { return root / "prior_causal.ckpt"; }
    std::filesystem::path scores() const { return root / "scores"; }
    std::filesystem::path report() const { return root / "report"; }
    std::filesystem::path ablation() const { return root / "ablation"; }

    /// The aggregated checkpoint when present, otherwise the trained one.
    std::filesystem::path active_vqvae() const;
};

struct StageOptions {
    bool force = false;
    bool allow_mismatch = false;
};

/// Writes a synthetic dataset in the loader layout under `data_root`.
void cmd_synth(const RunConfig& config, const std::filesystem::path& data_root, const RunLog& log);

/// Returns the final logged losses.
VqTrainStats cmd_train_vqvae(const RunConfig& config, const std::filesystem::path& data_root,
                             const std::filesystem::path& out, const RunLog& log);

struct AggregationReport {
    int effective_before = 0;
    int effective_after = 0;
    double reconstruction_before = 0.0;
    double reconstruction_after = 0.0;
};

/// Codebook aggregation plus fine-tuning; writes the aggregated checkpoint,
/// the encoding corpus and the before/after report. Throws ConfigError when
/// the cluster count exceeds the corpus size.
AggregationReport cmd_aggregate(const RunConfig& config, const std::filesystem::path& data_root,
                                const std::filesystem::path& out, const RunLog& log);

/// Trains the prior against the active vqvae checkpoint and records its hash.
/// `causal` selects the comparator variant and its own output file.
PriorTrainStats cmd_train_prior(const RunConfig& config, const std::filesystem::path& data_root,
                                 const std::filesystem::path& out, const RunLog& log, bool causal = false);

struct ScoreSummary {
    int written = 0;
    int skipped = 0;
};

/// One score map per test image under `<out>/scores`. Existing complete
/// outputs are skipped unless `force`. A prior trained against a different
/// vqvae checkpoint is a ConfigError unless `allow_mismatch`.
ScoreSummary cmd_score(const RunConfig& config, const std::filesystem::path& data_root,
                       const std::filesystem::path& out, const StageOptions& options, const RunLog& log);

/// Reads `<out>/scores`, writes `<out>/report`. A missing map is a DataError
/// naming the sample id.
EvaluationReport cmd_evaluate(const RunConfig& config, const std::filesystem::path& data_root,
                              const std::filesystem::path& out, const RunLog& log);

struct AblationRow {
    std::string variant;
    std::string config_hash;
    EvaluationReport report;
};

/// Rows for vqvae-only, full and (when enabled) the causal comparator, all
/// sharing the run seed. Writes `<out>/ablation/ablation.{txt,kv}`.
std::vector<AblationRow> cmd_ablation(const RunConfig& config, const std::filesystem::path& data_root,
                                      const std::filesystem::path& out, const StageOptions& options,
                                      const RunLog& log);

std::string format_ablation_table(const std::vector<AblationRow>& rows);
std::string format_ablation_kv(const std::vector<AblationRow>& rows);

/// Per-image scoring seed derived from the run seed and the sample position.
std::uint64_t image_seed(std::uint64_t run_seed, std::size_t index);

} // namespace lsgs
