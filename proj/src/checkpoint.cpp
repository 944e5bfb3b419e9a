// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#include "lsgs/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>

#include "lsgs/error.hpp"
#include "text_codec.hpp"

namespace lsgs {

namespace {

constexpr char kMagic[8] = {'L', 'S', 'G', 'S', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
        if (!out_) throw DataError("cannot write checkpoint " + path.string());
    }
    void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    template <class T>
    void pod(T v) { bytes(&v, sizeof v); }
    void str(const std::string& s) {
        pod(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    void kv(const KeyValues& values) {
        pod(static_cast<std::uint32_t>(values.size()));
        for (const auto& [k, v] : values) {
            str(k);
            str(v);
        }
    }
    void finish(const std::filesystem::path& path) {
        out_.flush();
        if (!out_) throw DataError("failed writing checkpoint " + path.string());
    }

private:
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw DataError("cannot read checkpoint " + path.string());
    }
    void bytes(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (!in_) throw DataError("truncated checkpoint " + path_.string());
    }
    template <class T>
    T pod() {
        T v{};
        bytes(&v, sizeof v);
        return v;
    }
    std::string str() {
        const auto n = pod<std::uint32_t>();
        if (n > (1u << 24)) throw DataError("corrupt string in checkpoint " + path_.string());
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
    KeyValues kv() {
        KeyValues out(pod<std::uint32_t>());
        for (auto& [k, v] : out) {
            k = str();
            v = str();
        }
        return out;
    }
    void expect_end() {
        if (in_.peek() != std::char_traits<char>::eof()) throw DataError("trailing bytes in checkpoint " + path_.string());
    }

private:
    std::ifstream in_;
    std::filesystem::path path_;
};

/// Typed access to a stored config with an exact key-set check.
class ConfigReader {
public:
    ConfigReader(const KeyValues& stored, const KeyValues& expected, const std::string& kind) {
        for (const auto& [k, v] : stored) values_[k] = v;
        std::vector<std::string> want, have;
        for (const auto& kv : expected) want.push_back(kv.first);
        for (const auto& kv : stored) have.push_back(kv.first);
        std::sort(want.begin(), want.end());
        std::sort(have.begin(), have.end());
        if (want != have) {
            std::string diff;
            for (const auto& k : want)
                if (!values_.count(k)) diff += " missing:" + k;
            for (const auto& k : have)
                if (!std::binary_search(want.begin(), want.end(), k)) diff += " unexpected:" + k;
            if (diff.empty()) diff = " duplicate keys";
            throw ConfigError(kind + " checkpoint config keys differ from this build:" + diff);
        }
    }
    template <class T>
    void get(const std::string& key, T& out) const {
        out = detail::parse_value<T>(key, values_.at(key));
    }

private:
    std::map<std::string, std::string> values_;
};

const nn::Matrix& find_array(const Checkpoint& ckpt, const std::string& name) {
    for (const auto& [n, m] : ckpt.arrays)
        if (n == name) return m;
    throw DataError(ckpt.kind + " checkpoint lacks array " + name);
}

void load_parameters(const Checkpoint& ckpt, std::vector<nn::NamedParameter> params, const std::string& resizable) {
    if (params.size() != ckpt.arrays.size())
        throw DataError(ckpt.kind + " checkpoint holds " + std::to_string(ckpt.arrays.size()) + " arrays, expected " +
                        std::to_string(params.size()));
    for (auto& p : params) {
        const nn::Matrix& m = find_array(ckpt, p.name);
        const bool rows_ok = m.rows() == p.param->value.rows() || p.name == resizable;
        if (!rows_ok || m.cols() != p.param->value.cols())
            throw DataError(ckpt.kind + " checkpoint array " + p.name + " has the wrong shape");
        p.param->resize(static_cast<int>(m.rows()), static_cast<int>(m.cols()));
        p.param->value = m;
    }
}

} // namespace

std::string Checkpoint::meta_value(const std::string& key) const {
    for (const auto& [k, v] : meta)
        if (k == key) return v;
    return {};
}

void Checkpoint::set_meta(const std::string& key, const std::string& value) {
    for (auto& [k, v] : meta)
        if (k == key) {
            v = value;
            return;
        }
    meta.emplace_back(key, value);
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    Writer w(path);
    w.bytes(kMagic, sizeof kMagic);
    w.pod(kVersion);
    w.str(ckpt.kind);
    w.kv(ckpt.config);
    w.kv(ckpt.meta);
    w.pod(static_cast<std::uint32_t>(ckpt.arrays.size()));
    for (const auto& [name, m] : ckpt.arrays) {
        w.str(name);
        w.pod(static_cast<std::uint64_t>(m.rows()));
        w.pod(static_cast<std::uint64_t>(m.cols()));
        w.bytes(m.data(), static_cast<std::size_t>(m.size()) * sizeof(float));
    }
    w.pod(static_cast<std::uint32_t>(ckpt.counters.size()));
    for (const auto& [name, c] : ckpt.counters) {
        w.str(name);
        w.pod(static_cast<std::uint64_t>(c.size()));
        w.bytes(c.data(), c.size() * sizeof(std::uint64_t));
    }
    w.finish(path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    Reader r(path);
    char magic[8];
    r.bytes(magic, sizeof magic);
    if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw DataError("not a checkpoint: " + path.string());
    const auto version = r.pod<std::uint32_t>();
    if (version != kVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ckpt;
    ckpt.kind = r.str();
    ckpt.config = r.kv();
    ckpt.meta = r.kv();
    const auto n_arrays = r.pod<std::uint32_t>();
    for (std::uint32_t i = 0; i < n_arrays; ++i) {
        std::string name = r.str();
        const auto rows = r.pod<std::uint64_t>();
        const auto cols = r.pod<std::uint64_t>();
        if (rows > (1u << 28) || cols > (1u << 28) || rows * cols > (1ull << 32))
            throw DataError("corrupt array " + name + " in " + path.string());
        nn::Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        r.bytes(m.data(), static_cast<std::size_t>(m.size()) * sizeof(float));
        ckpt.arrays.emplace_back(std::move(name), std::move(m));
    }
    const auto n_counters = r.pod<std::uint32_t>();
    for (std::uint32_t i = 0; i < n_counters; ++i) {
        std::string name = r.str();
        const auto n = r.pod<std::uint64_t>();
        if (n > (1ull << 32)) throw DataError("corrupt counters " + name + " in " + path.string());
        std::vector<std::uint64_t> c(n);
        r.bytes(c.data(), c.size() * sizeof(std::uint64_t));
        ckpt.counters.emplace_back(std::move(name), std::move(c));
    }
    r.expect_end();
    return ckpt;
}

KeyValues vqvae_config_entries(const VqvaeConfig& c) {
    using detail::to_text;
    return {
        {"image_channels", to_text(c.image_channels)},
        {"downsampling", to_text(c.downsampling)},
        {"embedding_dim", to_text(c.embedding_dim)},
        {"n_codes", to_text(c.n_codes)},
        {"hidden_channels", to_text(c.hidden_channels)},
        {"residual_hidden", to_text(c.residual_hidden)},
        {"commitment_weight", to_text(c.commitment_weight)},
        {"learning_rate", to_text(c.learning_rate)},
        {"batch_size", to_text(c.batch_size)},
        {"train_steps", to_text(c.train_steps)},
        {"seed", to_text(c.seed)},
    };
}

KeyValues prior_config_entries(const PriorConfig& c) {
    using detail::to_text;
    return {
        {"n_codes", to_text(c.n_codes)},
        {"seq_len", to_text(c.seq_len)},
        {"layers", to_text(c.layers)},
        {"model_dim", to_text(c.model_dim)},
        {"heads", to_text(c.heads)},
        {"ff_dim", to_text(c.ff_dim)},
        {"causal", to_text(c.causal)},
        {"learning_rate", to_text(c.learning_rate)},
        {"batch_size", to_text(c.batch_size)},
        {"train_steps", to_text(c.train_steps)},
        {"tamper_rate", to_text(c.tamper_rate)},
        {"beta", to_text(c.beta)},
        {"mean_normalized_loss", to_text(c.mean_normalized_loss)},
        {"resample_iterations", to_text(c.resample_iterations)},
        {"seed", to_text(c.seed)},
    };
}

Checkpoint to_checkpoint(VqvaeModel& model) {
    Checkpoint ckpt;
    ckpt.kind = "vqvae";
    ckpt.config = vqvae_config_entries(model.config());
    for (const auto& p : model.parameters()) ckpt.arrays.emplace_back(p.name, p.param->value);
    ckpt.counters.emplace_back("codebook.usage", model.codebook().usage_counts);
    return ckpt;
}

VqvaeModel vqvae_from_checkpoint(const Checkpoint& ckpt) {
    if (ckpt.kind != "vqvae") throw ConfigError("expected a vqvae checkpoint, got '" + ckpt.kind + "'");
    const ConfigReader cr(ckpt.config, vqvae_config_entries({}), "vqvae");
    VqvaeConfig c;
    cr.get("image_channels", c.image_channels);
    cr.get("downsampling", c.downsampling);
    cr.get("embedding_dim", c.embedding_dim);
    cr.get("n_codes", c.n_codes);
    cr.get("hidden_channels", c.hidden_channels);
    cr.get("residual_hidden", c.residual_hidden);
    cr.get("commitment_weight", c.commitment_weight);
    cr.get("learning_rate", c.learning_rate);
    cr.get("batch_size", c.batch_size);
    cr.get("train_steps", c.train_steps);
    cr.get("seed", c.seed);
    VqvaeModel model(c);
    load_parameters(ckpt, model.parameters(), "codebook.embeddings");
    Codebook& cb = model.codebook();
    cb.usage_counts.assign(static_cast<std::size_t>(cb.size()), 0);
    for (const auto& [name, counts] : ckpt.counters) {
        if (name != "codebook.usage") throw DataError("unexpected counter array " + name);
        if (counts.size() != cb.usage_counts.size()) throw DataError("usage counters do not match the codebook size");
        cb.usage_counts = counts;
    }
    return model;
}

Checkpoint to_checkpoint(PriorModel& model) {
    Checkpoint ckpt;
    ckpt.kind = "prior";
    ckpt.config = prior_config_entries(model.config());
    for (const auto& p : model.parameters()) ckpt.arrays.emplace_back(p.name, p.param->value);
    return ckpt;
}

PriorModel prior_from_checkpoint(const Checkpoint& ckpt) {
    if (ckpt.kind != "prior") throw ConfigError("expected a prior checkpoint, got '" + ckpt.kind + "'");
    const ConfigReader cr(ckpt.config, prior_config_entries({}), "prior");
    PriorConfig c;
    cr.get("n_codes", c.n_codes);
    cr.get("seq_len", c.seq_len);
    cr.get("layers", c.layers);
    cr.get("model_dim", c.model_dim);
    cr.get("heads", c.heads);
    cr.get("ff_dim", c.ff_dim);
    cr.get("causal", c.causal);
    cr.get("learning_rate", c.learning_rate);
    cr.get("batch_size", c.batch_size);
    cr.get("train_steps", c.train_steps);
    cr.get("tamper_rate", c.tamper_rate);
    cr.get("beta", c.beta);
    cr.get("mean_normalized_loss", c.mean_normalized_loss);
    cr.get("resample_iterations", c.resample_iterations);
    cr.get("seed", c.seed);
    PriorModel model(c);
    load_parameters(ckpt, model.parameters(), "");
    if (!ckpt.counters.empty()) throw DataError("prior checkpoint carries unexpected counters");
    return model;
}

} // namespace lsgs
