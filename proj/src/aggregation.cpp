// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#include "lsgs/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "lsgs/error.hpp"

namespace lsgs {

EncodingCorpus extract_encodings(const VqvaeModel& model, const DatasetManifest& manifest, std::size_t cap,
                                 std::uint64_t seed) {
    if (manifest.samples.empty()) throw ConfigError("cannot extract encodings from an empty manifest");
    if (cap < 1) throw ConfigError("subsample cap must be >= 1");
    const int d = model.config().embedding_dim;
    std::mt19937_64 rng(seed);

    // Reservoir of (stream position, vector, source).
    std::vector<std::size_t> stream_pos;
    std::vector<std::vector<float>> kept;
    std::vector<EncodingSource> sources;
    std::size_t seen = 0;
    for (const auto& sample : manifest.samples) {
        const LatentFeatureMap z = model.encode(sample.pixels);
        for (int c = 0; c < z.cells(); ++c, ++seen) {
            const float* row = z.values.row(c).data();
            EncodingSource src{sample.id, c / z.width, c % z.width};
            if (kept.size() < cap) {
                stream_pos.push_back(seen);
                kept.emplace_back(row, row + d);
                sources.push_back(std::move(src));
                continue;
            }
            std::uniform_int_distribution<std::size_t> pick(0, seen);
            const std::size_t j = pick(rng);
            if (j < cap) {
                stream_pos[j] = seen;
                kept[j].assign(row, row + d);
                sources[j] = std::move(src);
            }
        }
    }

    std::vector<std::size_t> order(kept.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return stream_pos[a] < stream_pos[b]; });
    EncodingCorpus corpus;
    corpus.vectors.resize(static_cast<Eigen::Index>(kept.size()), d);
    for (std::size_t i = 0; i < order.size(); ++i) {
        std::copy(kept[order[i]].begin(), kept[order[i]].end(), corpus.vectors.row(static_cast<Eigen::Index>(i)).data());
        corpus.sources.push_back(sources[order[i]]);
    }
    return corpus;
}

void save_corpus(const EncodingCorpus& corpus, const std::filesystem::path& base) {
    std::ofstream bin(base.string() + ".bin", std::ios::binary);
    std::ofstream txt(base.string() + ".txt");
    if (!bin || !txt) throw DataError("cannot write corpus at " + base.string());
    const std::uint64_t rows = static_cast<std::uint64_t>(corpus.vectors.rows());
    const std::uint64_t cols = static_cast<std::uint64_t>(corpus.vectors.cols());
    bin.write(reinterpret_cast<const char*>(&rows), sizeof rows);
    bin.write(reinterpret_cast<const char*>(&cols), sizeof cols);
    bin.write(reinterpret_cast<const char*>(corpus.vectors.data()),
              static_cast<std::streamsize>(corpus.vectors.size() * sizeof(float)));
    txt << "lsgs-corpus 1\n";
    for (const auto& s : corpus.sources) txt << s.sample_id << ' ' << s.row << ' ' << s.col << '\n';
}

EncodingCorpus load_corpus(const std::filesystem::path& base) {
    std::ifstream bin(base.string() + ".bin", std::ios::binary);
    std::ifstream txt(base.string() + ".txt");
    if (!bin || !txt) throw DataError("cannot read corpus at " + base.string());
    std::uint64_t rows = 0, cols = 0;
    bin.read(reinterpret_cast<char*>(&rows), sizeof rows);
    bin.read(reinterpret_cast<char*>(&cols), sizeof cols);
    EncodingCorpus corpus;
    corpus.vectors.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    bin.read(reinterpret_cast<char*>(corpus.vectors.data()),
             static_cast<std::streamsize>(corpus.vectors.size() * sizeof(float)));
    if (!bin) throw DataError("truncated corpus " + base.string());
    std::string header;
    std::getline(txt, header);
    if (header != "lsgs-corpus 1") throw DataError("bad corpus index header in " + base.string());
    EncodingSource s;
    while (txt >> s.sample_id >> s.row >> s.col) corpus.sources.push_back(s);
    if (corpus.sources.size() != rows) throw DataError("corpus index/array length mismatch in " + base.string());
    return corpus;
}

// ------------------------------------------------------------------ k-means

namespace {

int nearest_center(const Eigen::MatrixXd& centers, const Eigen::MatrixXd& points, Eigen::Index p, double* dist_out) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centers.rows(); ++c) {
        const double d = (points.row(p) - centers.row(c)).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    if (dist_out) *dist_out = best_d;
    return best;
}

Eigen::MatrixXd plus_plus_init(const Eigen::MatrixXd& points, int k, std::mt19937_64& rng) {
    const Eigen::Index m = points.rows();
    Eigen::MatrixXd centers(k, points.cols());
    std::uniform_int_distribution<Eigen::Index> first(0, m - 1);
    centers.row(0) = points.row(first(rng));
    std::vector<double> d2(static_cast<std::size_t>(m));
    for (Eigen::Index p = 0; p < m; ++p) d2[static_cast<std::size_t>(p)] = (points.row(p) - centers.row(0)).squaredNorm();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int c = 1; c < k; ++c) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        Eigen::Index chosen = 0;
        if (total <= 0.0) {
            chosen = first(rng);
        } else {
            const double target = unit(rng) * total;
            double acc = 0.0;
            chosen = m - 1;
            for (Eigen::Index p = 0; p < m; ++p) {
                acc += d2[static_cast<std::size_t>(p)];
                if (acc > target && d2[static_cast<std::size_t>(p)] > 0.0) {
                    chosen = p;
                    break;
                }
            }
        }
        centers.row(c) = points.row(chosen);
        for (Eigen::Index p = 0; p < m; ++p)
            d2[static_cast<std::size_t>(p)] = std::min(d2[static_cast<std::size_t>(p)], (points.row(p) - centers.row(c)).squaredNorm());
    }
    return centers;
}

} // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, const KMeansOptions& options) {
    const int k = options.k;
    const Eigen::Index m = points.rows();
    if (k < 1) throw ConfigError("k-means needs k >= 1");
    if (m < k) throw ConfigError("k-means needs at least k=" + std::to_string(k) + " points, got " + std::to_string(m));
    std::mt19937_64 rng(options.seed);

    KMeansResult r;
    r.centers = plus_plus_init(points, k, rng);
    r.assignment.assign(static_cast<std::size_t>(m), 0);
    std::vector<double> dist(static_cast<std::size_t>(m));

    for (int it = 0; it < options.max_iters; ++it) {
        r.iterations = it + 1;
        for (Eigen::Index p = 0; p < m; ++p)
            r.assignment[static_cast<std::size_t>(p)] = nearest_center(r.centers, points, p, &dist[static_cast<std::size_t>(p)]);

        std::vector<int> counts(static_cast<std::size_t>(k), 0);
        for (int a : r.assignment) ++counts[static_cast<std::size_t>(a)];
        // Re-seed empty clusters from the farthest member of the largest cluster.
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) continue;
            const int largest = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
            Eigen::Index far = -1;
            double far_d = -1.0;
            for (Eigen::Index p = 0; p < m; ++p)
                if (r.assignment[static_cast<std::size_t>(p)] == largest && dist[static_cast<std::size_t>(p)] > far_d) {
                    far_d = dist[static_cast<std::size_t>(p)];
                    far = p;
                }
            r.assignment[static_cast<std::size_t>(far)] = c;
            dist[static_cast<std::size_t>(far)] = 0.0;
            --counts[static_cast<std::size_t>(largest)];
            ++counts[static_cast<std::size_t>(c)];
        }

        Eigen::MatrixXd next = Eigen::MatrixXd::Zero(k, points.cols());
        for (Eigen::Index p = 0; p < m; ++p) next.row(r.assignment[static_cast<std::size_t>(p)]) += points.row(p);
        for (int c = 0; c < k; ++c) next.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);

        double max_shift = 0.0;
        for (int c = 0; c < k; ++c) max_shift = std::max(max_shift, (next.row(c) - r.centers.row(c)).norm());
        r.centers = std::move(next);
        if (max_shift < options.tol) break;
    }

    r.inertia = 0.0;
    for (Eigen::Index p = 0; p < m; ++p) {
        double d = 0.0;
        r.assignment[static_cast<std::size_t>(p)] = nearest_center(r.centers, points, p, &d);
        r.inertia += d;
    }
    return r;
}

KMeansResult kmeans_best_of(const Eigen::MatrixXd& points, const KMeansOptions& options, int restarts) {
    KMeansResult best;
    bool have = false;
    for (int i = 0; i < std::max(1, restarts); ++i) {
        KMeansOptions o = options;
        o.seed = options.seed + static_cast<std::uint64_t>(i);
        KMeansResult r = kmeans(points, o);
        if (!have || r.inertia < best.inertia) {
            best = std::move(r);
            have = true;
        }
    }
    return best;
}

void aggregate_codebook(VqvaeModel& model, const nn::Matrix& centers) {
    if (centers.cols() != model.codebook().dim())
        throw ConfigError("center dim " + std::to_string(centers.cols()) + " != embedding dim " +
                          std::to_string(model.codebook().dim()));
    if (centers.rows() < 1) throw ConfigError("aggregated codebook needs at least one center");
    model.codebook().assign(centers);
}

FinetuneResult finetune(VqvaeModel& model, const DatasetManifest& manifest, int steps, int batch_size,
                        float learning_rate, std::uint64_t seed, const TrainLogFn& log) {
    const std::vector<Image> images = manifest.images();
    if (steps > 0) train_vqvae(model, images, steps, batch_size, learning_rate, seed, log);
    return {mean_reconstruction_loss(model, images)};
}

int choose_cluster_count(int explicit_k, int effective_count, int cap) {
    const int k = explicit_k > 0 ? explicit_k : 2 * std::max(1, effective_count);
    return std::max(1, std::min(k, cap));
}

} // namespace lsgs
