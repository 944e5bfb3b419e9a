// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "lsgs/config.hpp"
#include "lsgs/error.hpp"
#include "lsgs/pipeline.hpp"

namespace {

struct Flags {
    std::string config;
    std::string data;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::string profile;
    bool force = false;
    bool allow_mismatch = false;
};

void add_common(CLI::App* cmd, Flags& f, bool needs_data, bool needs_out) {
    cmd->add_option("--config", f.config, "Run configuration file");
    auto* data = cmd->add_option("--data", f.data, "Dataset root");
    auto* out = cmd->add_option("--out", f.out, "Output directory");
    if (needs_data) data->required();
    if (needs_out) out->required();
    cmd->add_option("--seed", f.seed, "Run seed (overrides the config)");
    cmd->add_option("--profile", f.profile, "Base profile")->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_flag("--force", f.force, "Recompute existing outputs");
    cmd->add_flag("--allow-mismatch", f.allow_mismatch, "Accept a prior trained against another vqvae checkpoint");
}

lsgs::RunConfig resolve_config(const Flags& f) {
    lsgs::RunConfig config;
    if (!f.config.empty()) {
        config = lsgs::load_config(f.config);
        if (!f.profile.empty() && f.profile != config.profile)
            throw lsgs::ConfigError("--profile " + f.profile + " conflicts with profile " + config.profile + " in " +
                                    f.config);
    } else {
        config = lsgs::profile_config(f.profile.empty() ? "desk" : f.profile);
    }
    if (f.seed) config.seed = *f.seed;
    config.validate();
    return config;
}

void error_line(const std::string& category, const std::string& message) {
    std::cerr << "lsgs error category=" << category << " message=\"" << message << "\"\n";
}

int exit_code(const std::string& category) {
    if (category == "config-error") return 2;
    if (category == "data-error") return 3;
    if (category == "shape-error") return 4;
    if (category == "training-error") return 5;
    if (category == "contract-error") return 6;
    if (category == "undefined-metric") return 7;
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Latent-space restoration anomaly detection pipeline"};
    app.require_subcommand(1);
    Flags f;

    auto* synth = app.add_subcommand("synth", "Write the synthetic dataset to --out");
    add_common(synth, f, false, true);
    auto* print = app.add_subcommand("config", "Print the resolved configuration");
    add_common(print, f, false, false);
    auto* train_vqvae = app.add_subcommand("train-vqvae", "Train the vector-quantised autoencoder");
    add_common(train_vqvae, f, true, true);
    auto* aggregate = app.add_subcommand("aggregate", "Aggregate the codebook and fine-tune");
    add_common(aggregate, f, true, true);
    auto* train_prior = app.add_subcommand("train-prior", "Train the latent transformer prior");
    add_common(train_prior, f, true, true);
    auto* score = app.add_subcommand("score", "Write anomaly score maps for the test split");
    add_common(score, f, true, true);
    auto* evaluate = app.add_subcommand("evaluate", "Compute pixel AP, AUROC and Dice");
    add_common(evaluate, f, true, true);
    auto* ablation = app.add_subcommand("ablation", "Compare vqvae-only, full and causal variants");
    add_common(ablation, f, true, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        error_line("config-error", e.what());
        return exit_code("config-error");
    }

    try {
        const lsgs::RunConfig config = resolve_config(f);
        const lsgs::RunLog log(&std::cout);
        const lsgs::StageOptions options{f.force, f.allow_mismatch};
        if (synth->parsed()) {
            lsgs::cmd_synth(config, f.out, log);
        } else if (print->parsed()) {
            std::cout << lsgs::format_config(config);
        } else if (train_vqvae->parsed()) {
            lsgs::cmd_train_vqvae(config, f.data, f.out, log);
        } else if (aggregate->parsed()) {
            lsgs::cmd_aggregate(config, f.data, f.out, log);
        } else if (train_prior->parsed()) {
            lsgs::cmd_train_prior(config, f.data, f.out, log);
        } else if (score->parsed()) {
            lsgs::cmd_score(config, f.data, f.out, options, log);
        } else if (evaluate->parsed()) {
            std::cout << lsgs::format_report_table(lsgs::cmd_evaluate(config, f.data, f.out, log));
        } else if (ablation->parsed()) {
            std::cout << lsgs::format_ablation_table(lsgs::cmd_ablation(config, f.data, f.out, options, log));
        }
    } catch (const lsgs::Error& e) {
        error_line(e.category(), e.what());
        return exit_code(e.category());
    } catch (const std::filesystem::filesystem_error& e) {
        error_line("data-error", e.what());
        return exit_code("data-error");
    } catch (const std::exception& e) {
        error_line("internal-error", e.what());
        return 1;
    }
    return 0;
}
