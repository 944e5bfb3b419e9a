// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#include "lsgs/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "lsgs/error.hpp"
#include "lsgs/hash.hpp"
#include "text_codec.hpp"

namespace lsgs {

namespace {

constexpr int kConfigVersion = 1;

using detail::to_text;
std::string to_text(const std::string& v) { return v; }
std::string to_text(const std::set<AnomalyKind>& kinds) {
    std::string out;
    for (AnomalyKind k : kinds) out += (out.empty() ? "" : ",") + to_string(k);
    return out;
}

template <class T>
T from_text(const std::string& key, const std::string& text) {
    if constexpr (std::is_same_v<T, std::string>) {
        return text;
    } else if constexpr (std::is_same_v<T, std::set<AnomalyKind>>) {
        std::set<AnomalyKind> kinds;
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                kinds.insert(parse_anomaly_kind(item));
            } catch (const Error&) {
                throw ConfigError("invalid value for " + key + ": '" + text + "'");
            }
        }
        return kinds;
    } else {
        return detail::parse_value<T>(key, text);
    }
}

struct Field {
    std::string key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

template <class Ref>
Field field(std::string key, Ref ref) {
    using T = std::remove_cvref_t<decltype(ref(std::declval<RunConfig&>()))>;
    Field f;
    f.key = key;
    f.get = [ref](const RunConfig& c) { return to_text(ref(c)); };
    f.set = [ref, key](RunConfig& c, const std::string& v) { ref(c) = from_text<T>(key, v); };
    return f;
}

#define LSGS_FIELD(key, expr) field(key, [](auto& c) -> auto& { return c.expr; })

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        LSGS_FIELD("profile", profile),
        LSGS_FIELD("seed", seed),
        LSGS_FIELD("data.height", resolution.height),
        LSGS_FIELD("data.width", resolution.width),
        LSGS_FIELD("data.channels", vqvae.image_channels),
        LSGS_FIELD("vqvae.downsampling", vqvae.downsampling),
        LSGS_FIELD("vqvae.embedding_dim", vqvae.embedding_dim),
        LSGS_FIELD("vqvae.n_codes", vqvae.n_codes),
        LSGS_FIELD("vqvae.hidden_channels", vqvae.hidden_channels),
        LSGS_FIELD("vqvae.residual_hidden", vqvae.residual_hidden),
        LSGS_FIELD("vqvae.commitment_weight", vqvae.commitment_weight),
        LSGS_FIELD("vqvae.learning_rate", vqvae.learning_rate),
        LSGS_FIELD("vqvae.batch_size", vqvae.batch_size),
        LSGS_FIELD("vqvae.train_steps", vqvae.train_steps),
        LSGS_FIELD("vqvae.log_every", vqvae_log_every),
        LSGS_FIELD("aggregation.k", aggregation.k),
        LSGS_FIELD("aggregation.k_cap", aggregation.k_cap),
        LSGS_FIELD("aggregation.subsample_cap", aggregation.subsample_cap),
        LSGS_FIELD("aggregation.kmeans_iters", aggregation.kmeans_iters),
        LSGS_FIELD("aggregation.kmeans_tol", aggregation.kmeans_tol),
        LSGS_FIELD("aggregation.kmeans_restarts", aggregation.kmeans_restarts),
        LSGS_FIELD("aggregation.finetune_steps", aggregation.finetune_steps),
        LSGS_FIELD("prior.layers", prior.layers),
        LSGS_FIELD("prior.model_dim", prior.model_dim),
        LSGS_FIELD("prior.heads", prior.heads),
        LSGS_FIELD("prior.ff_dim", prior.ff_dim),
        LSGS_FIELD("prior.causal", prior.causal),
        LSGS_FIELD("prior.learning_rate", prior.learning_rate),
        LSGS_FIELD("prior.batch_size", prior.batch_size),
        LSGS_FIELD("prior.train_steps", prior.train_steps),
        LSGS_FIELD("prior.tamper_rate", prior.tamper_rate),
        LSGS_FIELD("prior.beta", prior.beta),
        LSGS_FIELD("prior.mean_normalized_loss", prior.mean_normalized_loss),
        LSGS_FIELD("prior.resample_iterations", prior.resample_iterations),
        LSGS_FIELD("prior.log_every", prior_log_every),
        LSGS_FIELD("scoring.restorations", scoring.restorations),
        LSGS_FIELD("scoring.k", scoring.k),
        LSGS_FIELD("scoring.temperature", scoring.temperature),
        LSGS_FIELD("scoring.epsilon", scoring.epsilon),
        LSGS_FIELD("scoring.fg_threshold", scoring.fg_threshold),
        LSGS_FIELD("scoring.foreground_mask", scoring.use_foreground_mask),
        LSGS_FIELD("scoring.fuse_before_smooth", scoring.fuse_before_smooth),
        LSGS_FIELD("eval.sweep_size", sweep_size),
        LSGS_FIELD("ablation.causal", ablation_causal),
        LSGS_FIELD("synth.n_train", synth.n_train),
        LSGS_FIELD("synth.n_test", synth.n_test),
        LSGS_FIELD("synth.cell_size", synth.cell_size),
        LSGS_FIELD("synth.anomaly_kinds", synth.anomaly_kinds),
    };
    return table;
}

#undef LSGS_FIELD

void require(bool ok, const char* key, const char* rule) {
    if (!ok) throw ConfigError(std::string(key) + " must be " + rule);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

int RunConfig::finetune_steps() const {
    return aggregation.finetune_steps >= 0 ? aggregation.finetune_steps : vqvae.train_steps / 10;
}

void RunConfig::validate() const {
    require(profile == "desk" || profile == "paper", "profile", "desk or paper");
    const int r = vqvae.downsampling;
    require(r >= 2 && (r & (r - 1)) == 0, "vqvae.downsampling", "a power of two >= 2");
    require(resolution.height > 0 && resolution.height % r == 0, "data.height", "positive and divisible by vqvae.downsampling");
    require(resolution.width > 0 && resolution.width % r == 0, "data.width", "positive and divisible by vqvae.downsampling");
    require(vqvae.image_channels == 1 || vqvae.image_channels == 3, "data.channels", "1 or 3");
    require(vqvae.embedding_dim >= 1, "vqvae.embedding_dim", ">= 1");
    require(vqvae.n_codes >= 1, "vqvae.n_codes", ">= 1");
    require(vqvae.hidden_channels >= 1, "vqvae.hidden_channels", ">= 1");
    require(vqvae.residual_hidden >= 1, "vqvae.residual_hidden", ">= 1");
    require(vqvae.commitment_weight >= 0.0f, "vqvae.commitment_weight", ">= 0");
    require(vqvae.learning_rate > 0.0f, "vqvae.learning_rate", "> 0");
    require(vqvae.batch_size >= 1, "vqvae.batch_size", ">= 1");
    require(vqvae.train_steps >= 0, "vqvae.train_steps", ">= 0");
    require(vqvae_log_every >= 1, "vqvae.log_every", ">= 1");
    require(aggregation.k >= 0, "aggregation.k", ">= 0");
    require(aggregation.k_cap >= 1, "aggregation.k_cap", ">= 1");
    require(aggregation.subsample_cap >= 1, "aggregation.subsample_cap", ">= 1");
    require(aggregation.kmeans_iters >= 1, "aggregation.kmeans_iters", ">= 1");
    require(aggregation.kmeans_tol >= 0.0, "aggregation.kmeans_tol", ">= 0");
    require(aggregation.kmeans_restarts >= 1, "aggregation.kmeans_restarts", ">= 1");
    require(aggregation.finetune_steps >= -1, "aggregation.finetune_steps", ">= -1");
    require(prior.layers >= 1, "prior.layers", ">= 1");
    require(prior.model_dim >= 1, "prior.model_dim", ">= 1");
    require(prior.heads >= 1 && prior.model_dim % prior.heads == 0, "prior.heads", ">= 1 and divide prior.model_dim");
    require(prior.ff_dim >= 1, "prior.ff_dim", ">= 1");
    require(prior.learning_rate > 0.0f, "prior.learning_rate", "> 0");
    require(prior.batch_size >= 1, "prior.batch_size", ">= 1");
    require(prior.train_steps >= 0, "prior.train_steps", ">= 0");
    require(prior.tamper_rate > 0.0 && prior.tamper_rate <= 1.0, "prior.tamper_rate", "in (0, 1]");
    require(prior.beta >= 0.0 && prior.beta <= 1.0, "prior.beta", "in [0, 1]");
    require(prior.resample_iterations >= 1, "prior.resample_iterations", ">= 1");
    require(prior_log_every >= 1, "prior.log_every", ">= 1");
    require(scoring.restorations >= 1, "scoring.restorations", ">= 1");
    require(scoring.k > 0.0, "scoring.k", "> 0");
    require(scoring.temperature >= 0.0, "scoring.temperature", ">= 0");
    require(scoring.epsilon > 0.0, "scoring.epsilon", "> 0");
    require(scoring.fg_threshold >= 0.0 && scoring.fg_threshold <= 1.0, "scoring.fg_threshold", "in [0, 1]");
    require(sweep_size >= 1, "eval.sweep_size", ">= 1");
    require(synth.n_train >= 1, "synth.n_train", ">= 1");
    require(synth.n_test >= 1, "synth.n_test", ">= 1");
    require(synth.cell_size >= 1, "synth.cell_size", ">= 1");
    require(!synth.anomaly_kinds.empty(), "synth.anomaly_kinds", "nonempty");
}

RunConfig profile_config(const std::string& name) {
    RunConfig c;
    c.profile = name;
    if (name == "desk") {
        c.resolution = {64, 64};
        c.vqvae.embedding_dim = 64;
        c.vqvae.n_codes = 128;
        c.vqvae.hidden_channels = 64;
        c.vqvae.residual_hidden = 32;
        c.vqvae.batch_size = 16;
        c.vqvae.train_steps = 800;
        c.prior.layers = 2;
        c.prior.model_dim = 64;
        c.prior.heads = 4;
        c.prior.ff_dim = 256;
        c.prior.batch_size = 16;
        c.prior.train_steps = 800;
        c.aggregation.k_cap = 256;
    } else if (name == "paper") {
        c.resolution = {128, 128};
        c.vqvae.embedding_dim = 512;
        c.vqvae.n_codes = 1024;
        c.vqvae.hidden_channels = 128;
        c.vqvae.residual_hidden = 64;
        c.vqvae.batch_size = 32;
        c.vqvae.train_steps = 1000;
        c.prior.layers = 12;
        c.prior.model_dim = 768;
        c.prior.heads = 12;
        c.prior.ff_dim = 3072;
        c.prior.batch_size = 32;
        c.prior.train_steps = 1500;
        c.aggregation.k = 1024;
        c.aggregation.k_cap = 4096;
    } else {
        throw ConfigError("unknown profile '" + name + "' (expected desk or paper)");
    }
    return c;
}

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& config) {
    std::vector<std::pair<std::string, std::string>> out;
    out.emplace_back("version", std::to_string(kConfigVersion));
    for (const Field& f : fields()) out.emplace_back(f.key, f.get(config));
    return out;
}

std::string format_config(const RunConfig& config) {
    std::string out = "# lsgs run configuration\n";
    for (const auto& [k, v] : config_entries(config)) out += k + " = " + v + "\n";
    return out;
}

RunConfig parse_config(const std::string& text) {
    std::map<std::string, std::string> values;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (!values.emplace(key, trim(line.substr(eq + 1))).second) throw ConfigError("duplicate config key " + key);
    }
    const auto version = values.find("version");
    if (version == values.end()) throw ConfigError("config is missing 'version'");
    if (version->second != std::to_string(kConfigVersion))
        throw ConfigError("unsupported config version " + version->second);
    values.erase(version);

    const auto profile = values.find("profile");
    RunConfig config = profile_config(profile == values.end() ? "desk" : profile->second);
    for (const Field& f : fields()) {
        const auto it = values.find(f.key);
        if (it == values.end()) continue;
        f.set(config, it->second);
        values.erase(it);
    }
    if (!values.empty()) throw ConfigError("unknown config key " + values.begin()->first);
    config.validate();
    return config;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string config_hash(const RunConfig& config) { return sha256_hex(format_config(config)); }

} // namespace lsgs
