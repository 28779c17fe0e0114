#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "demsr/errors.hpp"
#include "demsr/grid.hpp"
#include "demsr/raster.hpp"
#include "demsr/rng.hpp"

namespace demsr {

// Keys cubic convolution kernel, a = -0.5.
inline double keys_cubic(double x) {
    x = std::abs(x);
    if (x < 1.0) return (1.5 * x - 2.5) * x * x + 1.0;
    if (x < 2.0) return ((-0.5 * x + 2.5) * x - 4.0) * x + 2.0;
    return 0.0;
}

namespace detail {

// Per-output-pixel tap set along one axis. Output pixel i samples source
// coordinate (i + 0.5) * in/out - 0.5; when shrinking, the kernel is widened
// by the scale ratio and the weights renormalized (area-preserving
// decimation). Out-of-range taps are clamped to the border sample.
struct TapSet {
    int first = 0;              // first source index (unclamped)
    int nearest = 0;            // clamped index of round(src), anchors the accumulation
    std::vector<double> weights; // normalized
};

inline std::vector<TapSet> make_taps(int in_size, int out_size) {
    const double ratio = static_cast<double>(in_size) / static_cast<double>(out_size);
    const double s = std::max(1.0, ratio);
    std::vector<TapSet> taps(static_cast<std::size_t>(out_size));
    for (int i = 0; i < out_size; ++i) {
        const double src = (static_cast<double>(i) + 0.5) * ratio - 0.5;
        const int lo = static_cast<int>(std::ceil(src - 2.0 * s));
        const int hi = static_cast<int>(std::floor(src + 2.0 * s));
        TapSet& t = taps[static_cast<std::size_t>(i)];
        t.first = lo;
        t.nearest = std::clamp(static_cast<int>(std::lround(src)), 0, in_size - 1);
        t.weights.resize(static_cast<std::size_t>(hi - lo + 1));
        double sum = 0.0;
        for (int j = lo; j <= hi; ++j) {
            const double w = keys_cubic((src - static_cast<double>(j)) / s);
            t.weights[static_cast<std::size_t>(j - lo)] = w;
            sum += w;
        }
        for (double& w : t.weights) w /= sum;
    }
    return taps;
}

// Anchoring the weighted sum on the nearest sample makes constant inputs and
// the identity mapping reproduce bit-exactly.
inline double apply_taps(const TapSet& t, const double* line, int stride, int size) {
    const double anchor = line[static_cast<std::size_t>(t.nearest) * stride];
    double acc = 0.0;
    for (std::size_t k = 0; k < t.weights.size(); ++k) {
        const int j = std::clamp(t.first + static_cast<int>(k), 0, size - 1);
        acc += t.weights[k] * (line[static_cast<std::size_t>(j) * stride] - anchor);
    }
    return anchor + acc;
}

} // namespace detail

// Separable bicubic resize: vertical pass, then horizontal pass.
inline Grid bicubic_resize(const Grid& in, int out_rows, int out_cols) {
    if (in.rows < 2 || in.cols < 2)
        throw ArgumentError("bicubic_resize: input must be at least 2x2");
    if (out_rows < 1 || out_cols < 1)
        throw ArgumentError("bicubic_resize: output size must be positive");
    if (!in.all_finite())
        throw ArgumentError("bicubic_resize: input contains non-finite values");

    const std::vector<detail::TapSet> row_taps = detail::make_taps(in.rows, out_rows);
    const std::vector<detail::TapSet> col_taps = detail::make_taps(in.cols, out_cols);

    Grid mid(out_rows, in.cols);
    for (int c = 0; c < in.cols; ++c) {
        const double* col = in.v.data() + c;
        for (int r = 0; r < out_rows; ++r)
            mid.at(r, c) = detail::apply_taps(row_taps[static_cast<std::size_t>(r)], col, in.cols,
                                              in.rows);
    }
    Grid out(out_rows, out_cols);
    for (int r = 0; r < out_rows; ++r) {
        const double* row = mid.v.data() + static_cast<std::size_t>(r) * mid.cols;
        for (int c = 0; c < out_cols; ++c)
            out.at(r, c) = detail::apply_taps(col_taps[static_cast<std::size_t>(c)], row, 1,
                                              in.cols);
    }
    return out;
}

// Tile-level resize. Voids are rejected: interpolating through nodata
// sentinels would smear them into neighbors.
inline DemTile resize_tile(const DemTile& tile, int out_rows, int out_cols) {
    tile.validate();
    if (tile.has_nodata())
        throw ArgumentError("resize_tile: tile contains nodata, fill voids before resampling");
    Grid g = grid_from_tile(tile);
    Grid r = bicubic_resize(g, out_rows, out_cols);
    DemTile out = tile_from_grid(r, tile);
    out.cellsize = tile.cellsize * static_cast<double>(tile.rows) / static_cast<double>(out_rows);
    return out;
}

// One LR/ILR/HR training triple.
struct TrainPair {
    DemTile lr;
    DemTile ilr;
    DemTile hr;
    std::string id;
};

// lr = antialiased bicubic decimation of hr at the pixel scale factor;
// ilr = bicubic upsample of lr back to the hr grid.
inline TrainPair make_pair(const DemTile& hr, int scale, const std::string& id = "") {
    hr.validate();
    if (scale < 1) throw ArgumentError("make_pair: scale must be a positive integer");
    if (hr.has_nodata())
        throw ArgumentError("make_pair: tile contains nodata, fill voids before resampling");

    const int lr_rows = (hr.rows + scale - 1) / scale;
    const int lr_cols = (hr.cols + scale - 1) / scale;
    if (lr_rows < 2 || lr_cols < 2)
        throw ArgumentError("make_pair: tile too small for scale " + std::to_string(scale));

    TrainPair p;
    p.id = id;
    p.hr = hr;
    p.lr = resize_tile(hr, lr_rows, lr_cols);
    p.lr.cellsize = hr.cellsize * static_cast<double>(scale);
    p.ilr = resize_tile(p.lr, hr.rows, hr.cols);
    p.ilr.cellsize = hr.cellsize;
    return p;
}

enum class Split { train, val, test };

inline const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        default: return "test";
    }
}

inline Split split_from_name(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "val") return Split::val;
    if (name == "test") return Split::test;
    throw FormatError("unknown split name '" + name + "'");
}

struct ManifestEntry {
    std::string id;
    std::string lr_path; // resolved, absolute or relative to cwd
    std::string hr_path;
};

struct DatasetManifest {
    Split split = Split::train;
    int scale = 8;
    std::vector<ManifestEntry> entries;
};

// JSON lines: a header object {"scale":..,"split":..} followed by one
// {"id":..,"lr":..,"hr":..} object per pair. Paths are stored relative to the
// manifest file.
inline void write_manifest(const DatasetManifest& m, const std::string& path) {
    std::string out;
    nlohmann::ordered_json header;
    header["scale"] = m.scale;
    header["split"] = split_name(m.split);
    out += header.dump();
    out += '\n';
    std::filesystem::path base = std::filesystem::path(path).parent_path();
    if (base.empty()) base = ".";
    for (const ManifestEntry& e : m.entries) {
        nlohmann::ordered_json j;
        j["id"] = e.id;
        j["lr"] = std::filesystem::proximate(e.lr_path, base).generic_string();
        j["hr"] = std::filesystem::proximate(e.hr_path, base).generic_string();
        out += j.dump();
        out += '\n';
    }
    detail::write_file(path, out);
}

inline DatasetManifest read_manifest(const std::string& path) {
    const std::string data = detail::read_file(path);
    const std::filesystem::path base = std::filesystem::path(path).parent_path();

    DatasetManifest m;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool have_header = false;
    while (pos < data.size()) {
        std::size_t end = data.find('\n', pos);
        if (end == std::string::npos) end = data.size();
        const std::string line = data.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(path + ":" + std::to_string(line_no) + ": bad JSON: " + e.what());
        }
        if (!have_header) {
            for (auto it = j.begin(); it != j.end(); ++it)
                if (it.key() != "scale" && it.key() != "split")
                    throw FormatError(path + ": unknown manifest header key '" + it.key() + "'");
            if (!j.contains("scale") || !j.contains("split"))
                throw FormatError(path + ": manifest header needs 'scale' and 'split'");
            m.scale = j["scale"].get<int>();
            m.split = split_from_name(j["split"].get<std::string>());
            if (m.scale < 1) throw FormatError(path + ": scale must be positive");
            have_header = true;
            continue;
        }
        for (auto it = j.begin(); it != j.end(); ++it)
            if (it.key() != "id" && it.key() != "lr" && it.key() != "hr")
                throw FormatError(path + ": unknown manifest entry key '" + it.key() + "'");
        if (!j.contains("id") || !j.contains("lr") || !j.contains("hr"))
            throw FormatError(path + ":" + std::to_string(line_no) +
                              ": manifest entry needs 'id', 'lr' and 'hr'");
        ManifestEntry e;
        e.id = j["id"].get<std::string>();
        e.lr_path = (base / j["lr"].get<std::string>()).lexically_normal().string();
        e.hr_path = (base / j["hr"].get<std::string>()).lexically_normal().string();
        if (!std::filesystem::exists(e.lr_path))
            throw IoError(path + ": pair '" + e.id + "': missing file " + e.lr_path);
        if (!std::filesystem::exists(e.hr_path))
            throw IoError(path + ": pair '" + e.id + "': missing file " + e.hr_path);
        m.entries.push_back(std::move(e));
    }
    if (!have_header) throw FormatError(path + ": empty manifest, missing header line");

    std::vector<std::string> ids;
    for (const ManifestEntry& e : m.entries) ids.push_back(e.id);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
        throw FormatError(path + ": duplicate pair ids");
    return m;
}

// Loads one entry and rebuilds its ILR from the stored LR.
inline TrainPair load_pair(const DatasetManifest& m, std::size_t index) {
    const ManifestEntry& e = m.entries.at(index);
    TrainPair p;
    p.id = e.id;
    p.lr = read_bin(e.lr_path);
    p.hr = read_bin(e.hr_path);
    p.ilr = resize_tile(p.lr, p.hr.rows, p.hr.cols);
    p.ilr.cellsize = p.hr.cellsize;
    return p;
}

struct ManifestSet {
    DatasetManifest train;
    DatasetManifest val;
    std::string train_path;
    std::string val_path;
};

// Scans hr_dir for .asc/.bin tiles, splits them with a seeded shuffle,
// materializes LR/HR pairs as DEM1 under out_dir/pairs and writes
// train.jsonl / val.jsonl next to them.
inline ManifestSet build_manifest(const std::string& hr_dir, double train_ratio, double val_ratio,
                                  int scale, std::uint64_t seed, const std::string& out_dir) {
    namespace fs = std::filesystem;
    if (!(train_ratio >= 0.0 && val_ratio >= 0.0))
        throw ArgumentError("build_manifest: split ratios must be non-negative");
    if (std::abs(train_ratio + val_ratio - 1.0) > 1e-9)
        throw ArgumentError("build_manifest: split ratios must sum to 1");
    if (scale < 1) throw ArgumentError("build_manifest: scale must be positive");
    if (!fs::is_directory(hr_dir)) throw ArgumentError("build_manifest: not a directory: " + hr_dir);

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(hr_dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        if (ext == ".asc" || ext == ".bin" || ext == ".dem1") files.push_back(entry.path());
    }
    if (files.empty()) throw ArgumentError("build_manifest: no .asc/.bin tiles in " + hr_dir);
    std::sort(files.begin(), files.end());

    std::vector<std::string> ids;
    for (const fs::path& f : files) ids.push_back(f.stem().string());
    {
        std::vector<std::string> sorted = ids;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw ArgumentError("build_manifest: duplicate tile ids (same stem, different extension)");
    }

    std::vector<std::size_t> order(files.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    CounterRng rng(seed);
    rng.shuffle(order);

    const std::size_t n = files.size();
    std::size_t n_train = static_cast<std::size_t>(std::llround(train_ratio * static_cast<double>(n)));
    n_train = std::min(n_train, n);

    const fs::path pairs_dir = fs::path(out_dir) / "pairs";
    fs::create_directories(pairs_dir);

    ManifestSet set;
    set.train.scale = scale;
    set.train.split = Split::train;
    set.val.scale = scale;
    set.val.split = Split::val;

    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = order[k];
        const DemTile hr = read_tile(files[i].string());
        const TrainPair pair = make_pair(hr, scale, ids[i]);
        ManifestEntry e;
        e.id = ids[i];
        e.lr_path = (pairs_dir / (ids[i] + "_lr.bin")).string();
        e.hr_path = (pairs_dir / (ids[i] + "_hr.bin")).string();
        write_bin(pair.lr, e.lr_path);
        write_bin(pair.hr, e.hr_path);
        (k < n_train ? set.train : set.val).entries.push_back(std::move(e));
    }

    auto by_id = [](const ManifestEntry& a, const ManifestEntry& b) { return a.id < b.id; };
    std::sort(set.train.entries.begin(), set.train.entries.end(), by_id);
    std::sort(set.val.entries.begin(), set.val.entries.end(), by_id);

    set.train_path = (fs::path(out_dir) / "train.jsonl").string();
    set.val_path = (fs::path(out_dir) / "val.jsonl").string();
    write_manifest(set.train, set.train_path);
    write_manifest(set.val, set.val_path);
    return set;
}

} // namespace demsr
