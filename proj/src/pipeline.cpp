// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#include "lsgs/pipeline.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "lsgs/aggregation.hpp"
#include "lsgs/checkpoint.hpp"
#include "lsgs/error.hpp"
#include "lsgs/hash.hpp"
#include "lsgs/scoring.hpp"
#include "text_codec.hpp"

namespace lsgs {

namespace fs = std::filesystem;

namespace {

using Fields = std::vector<std::pair<std::string, std::string>>;

DatasetManifest load_split(const RunConfig& config, const fs::path& data_root, Split split) {
    return load_dataset(data_root, split, config.resolution, config.vqvae.image_channels);
}

VqvaeConfig vqvae_config(const RunConfig& config) {
    VqvaeConfig c = config.vqvae;
    c.seed = config.vqvae_seed();
    return c;
}

/// Architecture keys must agree between the run config and a stored model.
void check_vqvae_matches(const RunConfig& config, const VqvaeModel& model, const fs::path& path) {
    const VqvaeConfig& a = config.vqvae;
    const VqvaeConfig& b = model.config();
    const std::pair<const char*, bool> checks[] = {
        {"data.channels", a.image_channels == b.image_channels},
        {"vqvae.downsampling", a.downsampling == b.downsampling},
        {"vqvae.embedding_dim", a.embedding_dim == b.embedding_dim},
        {"vqvae.hidden_channels", a.hidden_channels == b.hidden_channels},
        {"vqvae.residual_hidden", a.residual_hidden == b.residual_hidden},
    };
    for (const auto& [key, ok] : checks)
        if (!ok) throw ConfigError(key + std::string(" differs between the run config and ") + path.string());
}

VqvaeModel load_vqvae(const RunConfig& config, const fs::path& path) {
    if (!fs::exists(path)) throw ConfigError("missing vqvae checkpoint " + path.string());
    VqvaeModel model = vqvae_from_checkpoint(load_checkpoint(path));
    check_vqvae_matches(config, model, path);
    return model;
}

PriorModel load_prior(const fs::path& path, const VqvaeModel& vqvae, const std::string& vqvae_hash,
                      const RunConfig& config, const StageOptions& options, const RunLog& log) {
    if (!fs::exists(path)) throw ConfigError("missing prior checkpoint " + path.string());
    const Checkpoint ckpt = load_checkpoint(path);
    const std::string trained_against = ckpt.meta_value("vqvae_hash");
    if (trained_against != vqvae_hash) {
        if (!options.allow_mismatch)
            throw ConfigError("prior " + path.string() + " was trained against a different vqvae checkpoint");
        log.record("warning", {{"event", "checkpoint-mismatch-allowed"}, {"prior", path.string()}});
    }
    PriorModel prior = prior_from_checkpoint(ckpt);
    const int ds = vqvae.config().downsampling;
    const int seq_len = (config.resolution.height / ds) * (config.resolution.width / ds);
    if (prior.config().n_codes != vqvae.codebook().size() || prior.config().seq_len != seq_len)
        throw ConfigError("prior " + path.string() + " expects " + std::to_string(prior.config().n_codes) + " codes over " +
                          std::to_string(prior.config().seq_len) + " positions, vqvae provides " +
                          std::to_string(vqvae.codebook().size()) + " over " + std::to_string(seq_len));
    return prior;
}

std::vector<CodeSequence> encode_sequences(const VqvaeModel& model, const DatasetManifest& manifest) {
    std::vector<CodeSequence> out;
    out.reserve(manifest.samples.size());
    for (const auto& s : manifest.samples) out.push_back(CodeSequence::from_grid(model.encode_to_grid(s.pixels)));
    return out;
}

Mask truth_mask(const ImageSample& s) { return s.mask ? *s.mask : Mask(s.pixels.height, s.pixels.width); }

ScoringConfig scoring_config(const RunConfig& config, std::size_t index) {
    ScoringConfig sc = config.scoring;
    sc.seed = image_seed(config.scoring_seed(), index);
    return sc;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

EvaluationReport evaluate_maps(const RunConfig& config, const DatasetManifest& test,
                               const std::vector<ScorePlane>& maps) {
    std::vector<Mask> masks;
    std::vector<std::string> ids;
    for (const auto& s : test.samples) {
        masks.push_back(truth_mask(s));
        ids.push_back(s.id);
    }
    return evaluate(maps, masks, ids, config.sweep_size);
}

} // namespace

void RunLog::record(std::string_view stage, const Fields& fields) const {
    if (!out_) return;
    std::string line = "lsgs ";
    line += stage;
    for (const auto& [k, v] : fields) line += " " + k + "=" + v;
    *out_ << line << '\n';
    out_->flush();
}

std::string format_number(double value) { return detail::to_text(value); }

fs::path RunPaths::active_vqvae() const { return fs::exists(aggregated()) ? aggregated() : vqvae(); }

std::uint64_t image_seed(std::uint64_t run_seed, std::size_t index) {
    // splitmix64 finaliser over (seed, index)
    std::uint64_t z = run_seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(index) + 1;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

void cmd_synth(const RunConfig& config, const fs::path& data_root, const RunLog& log) {
    SyntheticOptions o;
    o.seed = config.synth_seed();
    o.n_train = config.synth.n_train;
    o.n_test = config.synth.n_test;
    o.anomaly_kinds = config.synth.anomaly_kinds;
    o.resolution = config.resolution;
    o.cell_size = config.synth.cell_size;
    const SyntheticDataset ds = synthesize_dataset(o);
    save_dataset(ds.train, data_root);
    save_dataset(ds.test, data_root);
    log.record("synth", {{"train", std::to_string(ds.train.samples.size())},
                         {"test", std::to_string(ds.test.samples.size())},
                         {"root", data_root.string()}});
}

VqTrainStats cmd_train_vqvae(const RunConfig& config, const fs::path& data_root, const fs::path& out,
                             const RunLog& log) {
    config.validate();
    const DatasetManifest train = load_split(config, data_root, Split::train);
    if (train.samples.empty()) throw DataError("training split is empty");
    fs::create_directories(out);
    VqvaeModel model(vqvae_config(config));
    const std::vector<Image> images = train.images();
    const VqTrainStats last = train_vqvae(
        model, images, config.vqvae.train_steps, config.vqvae.batch_size, config.vqvae.learning_rate,
        config.vqvae_seed(),
        [&](long step, const VqTrainStats& s) {
            log.record("train-vqvae", {{"step", std::to_string(step)},
                                       {"l_rec", format_number(s.reconstruction)},
                                       {"l_vq", format_number(s.vq)}});
        },
        config.vqvae_log_every);
    codebook_usage(model, images);
    Checkpoint ckpt = to_checkpoint(model);
    ckpt.set_meta("stage", "train-vqvae");
    ckpt.set_meta("config_hash", config_hash(config));
    const RunPaths paths{out};
    save_checkpoint(ckpt, paths.vqvae());
    log.record("train-vqvae", {{"event", "done"}, {"checkpoint", paths.vqvae().string()},
                               {"hash", file_sha256(paths.vqvae())}});
    return last;
}

AggregationReport cmd_aggregate(const RunConfig& config, const fs::path& data_root, const fs::path& out,
                                const RunLog& log) {
    config.validate();
    const RunPaths paths{out};
    VqvaeModel model = load_vqvae(config, paths.vqvae());
    const DatasetManifest train = load_split(config, data_root, Split::train);
    const std::vector<Image> images = train.images();

    AggregationReport report;
    report.effective_before = codebook_usage(model, images).effective_count;
    report.reconstruction_before = mean_reconstruction_loss(model, images);

    const EncodingCorpus corpus = extract_encodings(model, train, config.aggregation.subsample_cap,
                                                    config.subsample_seed());
    save_corpus(corpus, paths.corpus());
    const int k = choose_cluster_count(config.aggregation.k, report.effective_before, config.aggregation.k_cap);
    if (static_cast<std::size_t>(k) > corpus.size())
        throw ConfigError("cluster count " + std::to_string(k) + " exceeds the corpus size " +
                          std::to_string(corpus.size()));
    log.record("aggregate", {{"event", "kmeans"}, {"k", std::to_string(k)}, {"corpus", std::to_string(corpus.size())}});

    KMeansOptions ko;
    ko.k = k;
    ko.seed = config.kmeans_seed();
    ko.max_iters = config.aggregation.kmeans_iters;
    ko.tol = config.aggregation.kmeans_tol;
    const KMeansResult km = kmeans_best_of(corpus.vectors.cast<double>(), ko, config.aggregation.kmeans_restarts);
    log.record("aggregate", {{"event", "kmeans-done"},
                             {"inertia", format_number(km.inertia)},
                             {"iterations", std::to_string(km.iterations)}});
    aggregate_codebook(model, km.centers.cast<float>());

    const FinetuneResult ft = finetune(
        model, train, config.finetune_steps(), config.vqvae.batch_size, config.vqvae.learning_rate,
        config.finetune_seed(), [&](long step, const VqTrainStats& s) {
            log.record("finetune", {{"step", std::to_string(step)},
                                    {"l_rec", format_number(s.reconstruction)},
                                    {"l_vq", format_number(s.vq)}});
        });
    report.reconstruction_after = ft.reconstruction;
    report.effective_after = codebook_usage(model, images).effective_count;

    Checkpoint ckpt = to_checkpoint(model);
    ckpt.set_meta("stage", "aggregate");
    ckpt.set_meta("config_hash", config_hash(config));
    ckpt.set_meta("source_hash", file_sha256(paths.vqvae()));
    save_checkpoint(ckpt, paths.aggregated());

    std::ostringstream kv;
    kv << "lsgs-aggregation 1\n"
       << "effective_count_before = " << report.effective_before << "\n"
       << "effective_count_after = " << report.effective_after << "\n"
       << "reconstruction_loss_before = " << format_number(report.reconstruction_before) << "\n"
       << "reconstruction_loss_after = " << format_number(report.reconstruction_after) << "\n";
    write_text(paths.aggregation_report(), kv.str());
    log.record("aggregate", {{"event", "done"},
                             {"effective_before", std::to_string(report.effective_before)},
                             {"effective_after", std::to_string(report.effective_after)},
                             {"l_rec_before", format_number(report.reconstruction_before)},
                             {"l_rec_after", format_number(report.reconstruction_after)}});
    return report;
}

PriorTrainStats cmd_train_prior(const RunConfig& config, const fs::path& data_root, const fs::path& out,
                                const RunLog& log, bool causal) {
    config.validate();
    const RunPaths paths{out};
    const fs::path vqvae_path = paths.active_vqvae();
    const VqvaeModel vqvae = load_vqvae(config, vqvae_path);
    const DatasetManifest train = load_split(config, data_root, Split::train);
    if (train.samples.empty()) throw DataError("training split is empty");
    const std::vector<CodeSequence> sequences = encode_sequences(vqvae, train);

    PriorConfig pc = config.prior;
    pc.n_codes = vqvae.codebook().size();
    pc.seq_len = sequences.front().length();
    pc.seed = config.prior_seed();
    pc.causal = causal || config.prior.causal;
    PriorModel prior(pc);
    const std::string stage = pc.causal && !config.prior.causal ? "train-prior-causal" : "train-prior";
    const PriorTrainStats last = train_prior(
        prior, sequences,
        [&](long step, const PriorTrainStats& s) {
            log.record(stage, {{"step", std::to_string(step)}, {"loss", format_number(s.loss)}});
        },
        config.prior_log_every);

    Checkpoint ckpt = to_checkpoint(prior);
    ckpt.set_meta("stage", stage);
    ckpt.set_meta("config_hash", config_hash(config));
    ckpt.set_meta("vqvae_hash", file_sha256(vqvae_path));
    const fs::path target = causal ? paths.causal_prior() : paths.prior();
    save_checkpoint(ckpt, target);
    log.record(stage, {{"event", "done"}, {"checkpoint", target.string()}, {"hash", file_sha256(target)}});
    return last;
}

ScoreSummary cmd_score(const RunConfig& config, const fs::path& data_root, const fs::path& out,
                       const StageOptions& options, const RunLog& log) {
    config.validate();
    const RunPaths paths{out};
    const fs::path vqvae_path = paths.active_vqvae();
    const VqvaeModel vqvae = load_vqvae(config, vqvae_path);
    const std::string vqvae_hash = file_sha256(vqvae_path);
    const PriorModel prior = load_prior(paths.prior(), vqvae, vqvae_hash, config, options, log);
    const std::string prior_hash = file_sha256(paths.prior());
    const DatasetManifest test = load_split(config, data_root, Split::test);
    fs::create_directories(paths.scores());

    ScoreSummary summary;
    for (std::size_t i = 0; i < test.samples.size(); ++i) {
        const ImageSample& s = test.samples[i];
        const fs::path base = paths.scores() / s.id;
        const bool complete = fs::exists(base.string() + ".score") && fs::exists(base.string() + ".png") &&
                              fs::exists(base.string() + ".meta");
        if (complete && !options.force) {
            ++summary.skipped;
            log.record("score", {{"id", s.id}, {"status", "skipped"}});
            continue;
        }
        const ScoringConfig sc = scoring_config(config, i);
        AnomalyScoreMap map;
        map.scores = score_image(vqvae, prior, s.pixels, sc);
        map.provenance = {s.id, vqvae_hash, prior_hash, sc.restorations, sc.k, sc.temperature, sc.seed};
        write_score_map(map, base);
        ++summary.written;
        log.record("score", {{"id", s.id}, {"status", "written"}});
    }
    log.record("score", {{"event", "done"},
                         {"written", std::to_string(summary.written)},
                         {"skipped", std::to_string(summary.skipped)}});
    return summary;
}

EvaluationReport cmd_evaluate(const RunConfig& config, const fs::path& data_root, const fs::path& out,
                              const RunLog& log) {
    config.validate();
    const RunPaths paths{out};
    const DatasetManifest test = load_split(config, data_root, Split::test);
    std::vector<ScorePlane> maps;
    for (const auto& s : test.samples) {
        const fs::path file = paths.scores() / (s.id + ".score");
        if (!fs::exists(file)) throw DataError("missing score map for sample " + s.id);
        maps.push_back(read_score_grid(file));
    }
    const EvaluationReport report = evaluate_maps(config, test, maps);
    write_report(report, paths.report());
    log.record("evaluate", {{"ap", format_number(report.ap)},
                            {"auroc", format_number(report.auroc)},
                            {"dice", format_number(report.dice)},
                            {"threshold", format_number(report.dice_threshold)}});
    return report;
}

std::vector<AblationRow> cmd_ablation(const RunConfig& config, const fs::path& data_root, const fs::path& out,
                                      const StageOptions& options, const RunLog& log) {
    config.validate();
    const RunPaths paths{out};
    const fs::path vqvae_path = paths.active_vqvae();
    const VqvaeModel vqvae = load_vqvae(config, vqvae_path);
    const std::string vqvae_hash = file_sha256(vqvae_path);
    const DatasetManifest test = load_split(config, data_root, Split::test);

    std::vector<AblationRow> rows;
    const auto add_row = [&](const std::string& variant, const RunConfig& variant_config,
                             const std::vector<ScorePlane>& maps) {
        rows.push_back({variant, config_hash(variant_config), evaluate_maps(config, test, maps)});
        const auto& r = rows.back().report;
        log.record("ablation", {{"variant", variant},
                                {"ap", format_number(r.ap)},
                                {"auroc", format_number(r.auroc)},
                                {"dice", format_number(r.dice)}});
    };
    const auto prior_maps = [&](const PriorModel& prior) {
        std::vector<ScorePlane> maps;
        for (std::size_t i = 0; i < test.samples.size(); ++i)
            maps.push_back(score_image(vqvae, prior, test.samples[i].pixels, scoring_config(config, i)));
        return maps;
    };

    std::vector<ScorePlane> recon;
    for (std::size_t i = 0; i < test.samples.size(); ++i)
        recon.push_back(reconstruction_score(vqvae, test.samples[i].pixels, scoring_config(config, i)));
    add_row("vqvae-only", config, recon);

    add_row("full", config, prior_maps(load_prior(paths.prior(), vqvae, vqvae_hash, config, options, log)));

    if (config.ablation_causal) {
        if (options.force || !fs::exists(paths.causal_prior())) cmd_train_prior(config, data_root, out, log, true);
        RunConfig causal = config;
        causal.prior.causal = true;
        add_row("causal", causal, prior_maps(load_prior(paths.causal_prior(), vqvae, vqvae_hash, config, options, log)));
    }

    fs::create_directories(paths.ablation());
    write_text(paths.ablation() / "ablation.txt", format_ablation_table(rows));
    write_text(paths.ablation() / "ablation.kv", format_ablation_kv(rows));
    return rows;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    os << "lsgs-ablation 1\n" << std::fixed;
    os << std::left << std::setw(12) << "variant" << std::right << std::setw(10) << "AP" << std::setw(10) << "AUROC"
       << std::setw(10) << "Dice" << "  config\n";
    for (const auto& r : rows)
        os << std::left << std::setw(12) << r.variant << std::right << std::setprecision(4) << std::setw(10)
           << r.report.ap << std::setw(10) << r.report.auroc << std::setw(10) << r.report.dice << "  "
           << r.config_hash.substr(0, 16) << "\n";
    return os.str();
}

std::string format_ablation_kv(const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    os << "version = 1\n";
    for (const auto& r : rows) {
        const std::string p = "variant." + r.variant + ".";
        os << p << "config_hash = " << r.config_hash << "\n"
           << p << "ap = " << format_number(r.report.ap) << "\n"
           << p << "auroc = " << format_number(r.report.auroc) << "\n"
           << p << "dice = " << format_number(r.report.dice) << "\n";
    }
    return os.str();
}

} // namespace lsgs
