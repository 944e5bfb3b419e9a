// Copyright (C) 2026 The LSGS Authors
// SPDX-License-Identifier: Apache-2.0

#include "lsgs/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "lsgs/error.hpp"
#include "lsgs/png_io.hpp"

namespace fs = std::filesystem;

namespace lsgs {

namespace {

constexpr int kManifestVersion = 1;

bool has_png_extension(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png";
}

std::vector<fs::path> list_images(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw ConfigError("missing directory " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && has_png_extension(entry.path())) files.push_back(entry.path());
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    return files;
}

Image to_image(const Raster8& r, int channels) {
    Image img(channels, r.height, r.width);
    for (int y = 0; y < r.height; ++y) {
        for (int x = 0; x < r.width; ++x) {
            const std::uint8_t* px = r.data.data() + (static_cast<std::size_t>(y) * r.width + x) * r.channels;
            if (channels == r.channels) {
                for (int c = 0; c < channels; ++c) img.at(c, y, x) = px[c] / 255.0f;
            } else if (channels == 3) {
                for (int c = 0; c < 3; ++c) img.at(c, y, x) = px[0] / 255.0f;
            } else {
                img.at(0, y, x) = (0.299f * px[0] + 0.587f * px[1] + 0.114f * px[2]) / 255.0f;
            }
        }
    }
    return img;
}

Raster8 to_raster(const Image& img) {
    Raster8 r{img.height, img.width, img.channels, {}};
    r.data.resize(img.size());
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                const float v = std::clamp(img.at(c, y, x), 0.0f, 1.0f);
                r.data[(static_cast<std::size_t>(y) * img.width + x) * img.channels + c] =
                    static_cast<std::uint8_t>(std::lround(v * 255.0f));
            }
    return r;
}

Mask to_mask(const Raster8& r) {
    Mask m(r.height, r.width);
    for (int y = 0; y < r.height; ++y)
        for (int x = 0; x < r.width; ++x) {
            const std::uint8_t* px = r.data.data() + (static_cast<std::size_t>(y) * r.width + x) * r.channels;
            m.at(y, x) = px[0] > 127 ? 1 : 0;
        }
    return m;
}

Raster8 mask_raster(const Mask& m) {
    Raster8 r{m.height, m.width, 1, std::vector<std::uint8_t>(m.size())};
    for (std::size_t i = 0; i < m.size(); ++i) r.data[i] = m.data[i] ? 255 : 0;
    return r;
}

ImageSample load_sample(const fs::path& image_path, const fs::path* mask_path, Resolution res, int channels) {
    ImageSample s;
    s.id = image_path.stem().string();
    const Raster8 raster = read_png(image_path);
    s.pixels = resize_bilinear(to_image(raster, channels), res.height, res.width);
    if (mask_path) {
        const Raster8 mr = read_png(*mask_path);
        if (mr.height != raster.height || mr.width != raster.width)
            throw DataError("mask shape differs from image shape for sample " + s.id);
        s.mask = resize_nearest(to_mask(mr), res.height, res.width);
        if (s.mask->height != s.pixels.height || s.mask->width != s.pixels.width)
            throw DataError("mask shape mismatch after resize for sample " + s.id);
    }
    return s;
}

} // namespace

std::string to_string(Split split) { return split == Split::train ? "train" : "test"; }

Split parse_split(const std::string& text) {
    if (text == "train") return Split::train;
    if (text == "test") return Split::test;
    throw ConfigError("unknown split '" + text + "'");
}

void DatasetManifest::validate() const {
    for (const auto& s : samples) {
        if (s.pixels.channels != channels || s.pixels.height != resolution.height || s.pixels.width != resolution.width)
            throw DataError("sample " + s.id + " does not match the manifest shape");
        if (s.mask && (s.mask->height != s.pixels.height || s.mask->width != s.pixels.width))
            throw DataError("mask shape mismatch for sample " + s.id);
        if (split == Split::train && s.is_abnormal())
            throw DataError("training sample " + s.id + " carries a nonzero anomaly mask");
        for (float v : s.pixels.data)
            if (!(v >= 0.0f && v <= 1.0f)) throw DataError("sample " + s.id + " has pixel values outside [0,1]");
    }
}

std::vector<Image> DatasetManifest::images() const {
    std::vector<Image> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.pixels);
    return out;
}

const ImageSample* DatasetManifest::find(const std::string& id) const {
    for (const auto& s : samples)
        if (s.id == id) return &s;
    return nullptr;
}

DatasetManifest load_dataset(const fs::path& root, Split split, Resolution resolution, int channels) {
    if (!fs::is_directory(root)) throw ConfigError("missing data root " + root.string());
    if (channels != 0 && channels != 1 && channels != 3) throw ConfigError("channels must be 0, 1 or 3");
    DatasetManifest m;
    m.split = split;
    m.resolution = resolution;
    const fs::path image_dir = split == Split::train ? root / "train" / "normal" : root / "test" / "images";
    const auto files = list_images(image_dir);
    if (channels == 0) channels = files.empty() ? 1 : read_png(files.front()).channels;
    m.channels = channels;
    const fs::path mask_dir = root / "test" / "masks";
    for (const auto& f : files) {
        if (split == Split::train) {
            m.samples.push_back(load_sample(f, nullptr, resolution, channels));
            continue;
        }
        const std::string stem = f.stem().string();
        fs::path mask_path;
        for (const auto& candidate : {mask_dir / (stem + ".png"), mask_dir / (stem + "_mask.png")})
            if (fs::is_regular_file(candidate)) {
                mask_path = candidate;
                break;
            }
        ImageSample s = load_sample(f, mask_path.empty() ? nullptr : &mask_path, resolution, channels);
        if (!s.mask) s.mask = Mask(resolution.height, resolution.width, 0);
        m.samples.push_back(std::move(s));
    }
    m.validate();
    return m;
}

void write_manifest_index(const DatasetManifest& manifest, const fs::path& index_path) {
    std::ofstream out(index_path);
    if (!out) throw DataError("cannot write manifest " + index_path.string());
    out << "lsgs-manifest " << kManifestVersion << "\n";
    out << "split " << to_string(manifest.split) << "\n";
    out << "channels " << manifest.channels << "\n";
    out << "resolution " << manifest.resolution.height << " " << manifest.resolution.width << "\n";
    out << "count " << manifest.samples.size() << "\n";
    for (const auto& s : manifest.samples) {
        if (manifest.split == Split::train) {
            out << s.id << "\ttrain/normal/" << s.id << ".png\t-\n";
        } else {
            out << s.id << "\ttest/images/" << s.id << ".png\t" << (s.mask ? "test/masks/" + s.id + ".png" : "-")
                << "\n";
        }
    }
}

fs::path save_dataset(const DatasetManifest& manifest, const fs::path& root) {
    manifest.validate();
    const bool train = manifest.split == Split::train;
    const fs::path image_dir = train ? root / "train" / "normal" : root / "test" / "images";
    const fs::path mask_dir = root / "test" / "masks";
    fs::create_directories(image_dir);
    if (!train) fs::create_directories(mask_dir);
    for (const auto& s : manifest.samples) {
        write_png(image_dir / (s.id + ".png"), to_raster(s.pixels));
        if (!train && s.mask) write_png(mask_dir / (s.id + ".png"), mask_raster(*s.mask));
    }
    const fs::path index = root / (to_string(manifest.split) + ".manifest");
    write_manifest_index(manifest, index);
    return index;
}

DatasetManifest read_manifest_index(const fs::path& index_path) {
    std::ifstream in(index_path);
    if (!in) throw ConfigError("missing manifest " + index_path.string());
    const fs::path base = index_path.parent_path();
    std::string tag;
    int version = 0;
    in >> tag >> version;
    if (tag != "lsgs-manifest" || version != kManifestVersion)
        throw DataError("unsupported manifest header in " + index_path.string());
    DatasetManifest m;
    std::string split;
    std::size_t count = 0;
    in >> tag >> split;
    if (tag != "split") throw DataError("manifest: expected 'split'");
    m.split = parse_split(split);
    in >> tag >> m.channels;
    if (tag != "channels") throw DataError("manifest: expected 'channels'");
    in >> tag >> m.resolution.height >> m.resolution.width;
    if (tag != "resolution") throw DataError("manifest: expected 'resolution'");
    in >> tag >> count;
    if (tag != "count") throw DataError("manifest: expected 'count'");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream rec(line);
        std::string id, path, mask;
        if (!std::getline(rec, id, '\t') || !std::getline(rec, path, '\t') || !std::getline(rec, mask))
            throw DataError("malformed manifest record: " + line);
        const fs::path mask_path = base / mask;
        ImageSample s = load_sample(base / path, mask == "-" ? nullptr : &mask_path, m.resolution, m.channels);
        s.id = id;
        m.samples.push_back(std::move(s));
    }
    if (m.samples.size() != count) throw DataError("manifest record count mismatch in " + index_path.string());
    m.validate();
    return m;
}

// ---------------------------------------------------------------- synthesis

std::string to_string(AnomalyKind kind) {
    return kind == AnomalyKind::texture_patch ? "texture_patch" : "structure_swap";
}

AnomalyKind parse_anomaly_kind(const std::string& text) {
    if (text == "texture_patch") return AnomalyKind::texture_patch;
    if (text == "structure_swap") return AnomalyKind::structure_swap;
    throw ConfigError("unknown anomaly kind '" + text + "'");
}

namespace {

struct RenderParams {
    int phase = 0;      // stripe phase, shared by every cell
    int brightness = 0; // additive 8-bit offset
};

// Three cell types with disjoint intensity ranges, so any two cells of
// different type differ at every pixel.
int cell_type(int row, int col) { return (row + 2 * col) % 3; }

std::uint8_t texel(int type, int y, int x, const RenderParams& p) {
    int v = 0;
    switch (type) {
    case 0: v = 50 + (((y + p.phase) / 2) % 2 ? 40 : 0); break;             // horizontal stripes
    case 1: v = 150 + (((x + p.phase) / 2) % 2 ? 40 : 0); break;            // vertical stripes
    default: v = 210 + ((((x + p.phase) / 2) + (y / 2)) % 2 ? 35 : 0); break; // checker
    }
    return static_cast<std::uint8_t>(std::clamp(v + p.brightness, 0, 255));
}

std::vector<std::uint8_t> render(const SyntheticOptions& o, const RenderParams& p) {
    std::vector<std::uint8_t> px(static_cast<std::size_t>(o.resolution.height) * o.resolution.width);
    for (int y = 0; y < o.resolution.height; ++y)
        for (int x = 0; x < o.resolution.width; ++x)
            px[static_cast<std::size_t>(y) * o.resolution.width + x] = texel(cell_type(y / o.cell_size, x / o.cell_size), y, x, p);
    return px;
}

Image to_unit_image(const std::vector<std::uint8_t>& px, Resolution res) {
    Image img(1, res.height, res.width);
    for (std::size_t i = 0; i < px.size(); ++i) img.data[i] = px[i] / 255.0f;
    return img;
}

RenderParams draw_params(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> phase(0, 3);
    std::uniform_int_distribution<int> bright(-6, 6);
    RenderParams p;
    p.phase = phase(rng);
    p.brightness = bright(rng);
    return p;
}

std::string numbered(const std::string& prefix, int i) {
    std::ostringstream os;
    os << prefix << "_" << std::setw(4) << std::setfill('0') << i;
    return os.str();
}

} // namespace

SyntheticDataset synthesize_dataset(const SyntheticOptions& o) {
    if (o.n_train < 1 || o.n_test < 1) throw ConfigError("synthetic dataset needs n_train >= 1 and n_test >= 1");
    if (o.cell_size < 1 || o.resolution.height % o.cell_size != 0 || o.resolution.width % o.cell_size != 0)
        throw ConfigError("resolution must be a multiple of the cell size");
    const int rows = o.resolution.height / o.cell_size;
    const int cols = o.resolution.width / o.cell_size;
    if (o.anomaly_kinds.count(AnomalyKind::structure_swap) && rows * cols < 2)
        throw ConfigError("structure_swap needs at least two cells");

    std::mt19937_64 rng(o.seed);
    SyntheticDataset ds;
    ds.train.split = Split::train;
    ds.test.split = Split::test;
    ds.train.resolution = ds.test.resolution = o.resolution;
    ds.train.channels = ds.test.channels = 1;

    for (int i = 0; i < o.n_train; ++i) {
        const RenderParams p = draw_params(rng);
        ds.train.samples.push_back({numbered("train", i), to_unit_image(render(o, p), o.resolution), std::nullopt});
    }

    const std::vector<AnomalyKind> kinds(o.anomaly_kinds.begin(), o.anomaly_kinds.end());
    int abnormal_index = 0;
    for (int i = 0; i < o.n_test; ++i) {
        const RenderParams p = draw_params(rng);
        const std::vector<std::uint8_t> clean = render(o, p);
        std::vector<std::uint8_t> px = clean;
        std::string kind_name;
        const bool normal = kinds.empty() || i % 4 == 0;
        if (!normal) {
            const AnomalyKind kind = kinds[static_cast<std::size_t>(abnormal_index++) % kinds.size()];
            kind_name = to_string(kind);
            if (kind == AnomalyKind::texture_patch) {
                std::uniform_int_distribution<int> size_dist(8, 16);
                const int sh = size_dist(rng);
                const int sw = size_dist(rng);
                std::uniform_int_distribution<int> y_dist(0, o.resolution.height - sh);
                std::uniform_int_distribution<int> x_dist(0, o.resolution.width - sw);
                const int y0 = y_dist(rng);
                const int x0 = x_dist(rng);
                std::uniform_int_distribution<int> noise(0, 254);
                for (int y = y0; y < y0 + sh; ++y)
                    for (int x = x0; x < x0 + sw; ++x) {
                        auto& v = px[static_cast<std::size_t>(y) * o.resolution.width + x];
                        const int n = noise(rng);
                        // Skip over the original value so every patch pixel changes.
                        v = static_cast<std::uint8_t>(n >= v ? n + 1 : n);
                    }
            } else {
                std::uniform_int_distribution<int> cell_dist(0, rows * cols - 1);
                int a = 0, b = 0;
                do {
                    a = cell_dist(rng);
                    b = cell_dist(rng);
                } while (cell_type(a / cols, a % cols) == cell_type(b / cols, b % cols));
                const int ay = (a / cols) * o.cell_size, ax = (a % cols) * o.cell_size;
                const int by = (b / cols) * o.cell_size, bx = (b % cols) * o.cell_size;
                for (int dy = 0; dy < o.cell_size; ++dy)
                    for (int dx = 0; dx < o.cell_size; ++dx)
                        std::swap(px[static_cast<std::size_t>(ay + dy) * o.resolution.width + ax + dx],
                                  px[static_cast<std::size_t>(by + dy) * o.resolution.width + bx + dx]);
            }
        }
        Mask mask(o.resolution.height, o.resolution.width);
        for (std::size_t k = 0; k < px.size(); ++k) mask.data[k] = px[k] != clean[k] ? 1 : 0;
        const std::string id = normal ? numbered("test", i) : numbered("test", i) + "_" + kind_name;
        ds.test.samples.push_back({id, to_unit_image(px, o.resolution), mask});
        ds.test_normal_counterparts.push_back(to_unit_image(clean, o.resolution));
        ds.test_kinds.push_back(kind_name);
    }
    ds.train.validate();
    ds.test.validate();
    return ds;
}

} // namespace lsgs
