// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#include "lsgs/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>

#include "lsgs/error.hpp"
#include "lsgs/png_io.hpp"

namespace lsgs {

RestorationSet build_restorations(const VqvaeModel& vqvae, const PriorModel& prior, const Image& image, int n,
                                  double temperature, std::uint64_t seed) {
    if (n < 1) throw ConfigError("need at least one restoration");
    const CodeGrid grid = vqvae.encode_to_grid(image);
    const CodeSequence original = CodeSequence::from_grid(grid);
    RestorationSet set;
    set.x_hat = vqvae.decode(grid);
    for (int i = 1; i <= n; ++i) {
        const std::uint64_t s = seed + static_cast<std::uint64_t>(i);
        set.restorations.push_back(vqvae.decode(resample_sequence(prior, original, temperature, s).to_grid()));
        set.seeds.push_back(s);
    }
    return set;
}

WeightedScore anomaly_score(const RestorationSet& set, double k, double epsilon) {
    if (set.restorations.empty()) throw ContractError("anomaly_score needs at least one restoration");
    if (!(k > 0.0) || !(epsilon > 0.0)) throw ConfigError("anomaly_score needs k > 0 and epsilon > 0");
    const Image& ref = set.x_hat;
    const std::size_t n = set.restorations.size();

    std::vector<double> logits(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Image& y = set.restorations[i];
        if (!y.same_shape(ref)) throw ShapeError("restoration shape differs from the reference reconstruction");
        double l1 = 0.0;
        for (std::size_t p = 0; p < ref.size(); ++p) l1 += std::abs(static_cast<double>(ref.data[p]) - y.data[p]);
        logits[i] = k / (l1 + epsilon);
    }
    const double m = *std::max_element(logits.begin(), logits.end());
    WeightedScore out;
    out.weights.resize(n);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) z += (out.weights[i] = std::exp(logits[i] - m));
    for (double& w : out.weights) w /= z;

    const int plane = ref.plane();
    std::vector<double> acc(static_cast<std::size_t>(plane), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const Image& y = set.restorations[i];
        for (int c = 0; c < ref.channels; ++c)
            for (int p = 0; p < plane; ++p) {
                const std::size_t idx = static_cast<std::size_t>(c) * plane + p;
                acc[static_cast<std::size_t>(p)] +=
                    out.weights[i] * std::abs(static_cast<double>(ref.data[idx]) - y.data[idx]) / ref.channels;
            }
    }
    out.scores = ScorePlane(ref.height, ref.width);
    for (int p = 0; p < plane; ++p) out.scores.data[static_cast<std::size_t>(p)] = static_cast<float>(acc[static_cast<std::size_t>(p)]);
    return out;
}

Mask foreground_mask(const Image& image, double threshold) {
    const int h = image.height, w = image.width;
    Mask raw(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            float v = image.at(0, y, x);
            for (int c = 1; c < image.channels; ++c) v = std::max(v, image.at(c, y, x));
            raw.at(y, x) = v > threshold ? 1 : 0;
        }
    // Closing: dilate (outside = 0) then erode (outside = 1).
    Mask dilated(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            std::uint8_t v = 0;
            for (int dy = -1; dy <= 1 && !v; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int yy = y + dy, xx = x + dx;
                    if (yy >= 0 && yy < h && xx >= 0 && xx < w && raw.at(yy, xx)) {
                        v = 1;
                        break;
                    }
                }
            dilated.at(y, x) = v;
        }
    Mask closed(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            std::uint8_t v = 1;
            for (int dy = -1; dy <= 1 && v; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int yy = y + dy, xx = x + dx;
                    if (yy >= 0 && yy < h && xx >= 0 && xx < w && !dilated.at(yy, xx)) {
                        v = 0;
                        break;
                    }
                }
            closed.at(y, x) = v;
        }
    return closed;
}

ScorePlane min_pool(const ScorePlane& in, int kernel) {
    const int r = kernel / 2;
    ScorePlane out(in.height, in.width);
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) {
            float v = std::numeric_limits<float>::infinity();
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx)
                    v = std::min(v, in.at(std::clamp(y + dy, 0, in.height - 1), std::clamp(x + dx, 0, in.width - 1)));
            out.at(y, x) = v;
        }
    return out;
}

ScorePlane average_pool(const ScorePlane& in, int kernel) {
    const int r = kernel / 2;
    const double area = static_cast<double>(kernel) * kernel;
    ScorePlane out(in.height, in.width);
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) {
            double s = 0.0;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx)
                    s += in.at(std::clamp(y + dy, 0, in.height - 1), std::clamp(x + dx, 0, in.width - 1));
            out.at(y, x) = static_cast<float>(s / area);
        }
    return out;
}

ScorePlane smooth(const ScorePlane& in) { return average_pool(min_pool(in, 3), 7); }

ScorePlane apply_mask(const ScorePlane& scores, const Mask& mask) {
    if (scores.height != mask.height || scores.width != mask.width) throw ShapeError("mask shape differs from score map");
    ScorePlane out = scores;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (!mask.data[i]) out.data[i] = 0.0f;
    return out;
}

ScorePlane postprocess(const ScorePlane& raw, const Image& image, const ScoringConfig& config) {
    if (!config.use_foreground_mask) return smooth(raw);
    const Mask fg = foreground_mask(image, config.fg_threshold);
    return config.fuse_before_smooth ? smooth(apply_mask(raw, fg)) : apply_mask(smooth(raw), fg);
}

ScorePlane score_image(const VqvaeModel& vqvae, const PriorModel& prior, const Image& image,
                       const ScoringConfig& config) {
    const RestorationSet set = build_restorations(vqvae, prior, image, config.restorations, config.temperature, config.seed);
    return postprocess(anomaly_score(set, config.k, config.epsilon).scores, image, config);
}

ScorePlane reconstruction_score(const VqvaeModel& vqvae, const Image& image, const ScoringConfig& config) {
    const Image x_hat = vqvae.reconstruct(image);
    Image diff(image.channels, image.height, image.width);
    for (std::size_t i = 0; i < diff.size(); ++i) diff.data[i] = std::abs(image.data[i] - x_hat.data[i]);
    return postprocess(channel_mean(diff), image, config);
}

// ---------------------------------------------------------------------- IO

namespace {
constexpr char kScoreMagic[8] = {'L', 'S', 'G', 'S', 'S', 'C', 'R', '1'};
}

void write_score_map(const AnomalyScoreMap& map, const std::filesystem::path& base) {
    const ScorePlane& s = map.scores;
    {
        std::ofstream out(base.string() + ".score", std::ios::binary);
        if (!out) throw DataError("cannot write " + base.string() + ".score");
        out.write(kScoreMagic, sizeof kScoreMagic);
        const std::uint32_t dims[2] = {static_cast<std::uint32_t>(s.height), static_cast<std::uint32_t>(s.width)};
        out.write(reinterpret_cast<const char*>(dims), sizeof dims);
        out.write(reinterpret_cast<const char*>(s.data.data()), static_cast<std::streamsize>(s.size() * sizeof(float)));
    }
    {
        Raster8 preview{s.height, s.width, 1, std::vector<std::uint8_t>(s.size())};
        const auto [lo, hi] = std::minmax_element(s.data.begin(), s.data.end());
        const float range = s.size() ? *hi - *lo : 0.0f;
        for (std::size_t i = 0; i < s.size(); ++i)
            preview.data[i] = range > 0.0f ? static_cast<std::uint8_t>(std::lround(255.0f * (s.data[i] - *lo) / range)) : 0;
        write_png(base.string() + ".png", preview);
    }
    {
        std::ofstream meta(base.string() + ".meta");
        const auto& p = map.provenance;
        meta << "lsgs-score-meta 1\n"
             << "id = " << p.input_id << "\n"
             << "vqvae_hash = " << p.vqvae_hash << "\n"
             << "prior_hash = " << p.prior_hash << "\n"
             << "restorations = " << p.restorations << "\n"
             << std::setprecision(17) << "k = " << p.k << "\n"
             << "temperature = " << p.temperature << "\n"
             << "seed = " << p.seed << "\n";
    }
}

ScorePlane read_score_grid(const std::filesystem::path& score_file) {
    std::ifstream in(score_file, std::ios::binary);
    if (!in) throw DataError("cannot read score map " + score_file.string());
    char magic[8];
    std::uint32_t dims[2];
    in.read(magic, sizeof magic);
    in.read(reinterpret_cast<char*>(dims), sizeof dims);
    if (!in || std::memcmp(magic, kScoreMagic, sizeof magic) != 0) throw DataError("bad score map header " + score_file.string());
    ScorePlane s(static_cast<int>(dims[0]), static_cast<int>(dims[1]));
    in.read(reinterpret_cast<char*>(s.data.data()), static_cast<std::streamsize>(s.size() * sizeof(float)));
    if (!in) throw DataError("truncated score map " + score_file.string());
    return s;
}

} // namespace lsgs
