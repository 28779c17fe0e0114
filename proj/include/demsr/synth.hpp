#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "demsr/errors.hpp"
#include "demsr/raster.hpp"
#include "demsr/rng.hpp"

namespace demsr {

// Deterministic fractal terrain. Side length is 2^exponent + 1; offsets come
// from a keyed counter RNG, so the same spec yields the same grid on any
// platform and under any evaluation order.
struct SynthSpec {
    int exponent = 6;           // grid side = 2^exponent + 1
    std::uint64_t seed = 0;
    double roughness = 10.0;    // initial offset amplitude, meters
    double decay = 0.5;         // amplitude multiplier per subdivision level
    // corner heights: [north-west, north-east, south-west, south-east]
    std::array<double, 4> corner_heights{0.0, 0.0, 0.0, 0.0};

    void validate() const {
        if (exponent < 1 || exponent > 14)
            throw ArgumentError("SynthSpec: exponent must be in [1, 14]");
        if (!(roughness >= 0.0)) throw ArgumentError("SynthSpec: roughness must be >= 0");
        if (!(decay > 0.0 && decay <= 1.0)) throw ArgumentError("SynthSpec: decay must be in (0, 1]");
        for (double c : corner_heights)
            if (!std::isfinite(c)) throw ArgumentError("SynthSpec: corner heights must be finite");
    }
};

// Optional per-level instrumentation: mean |offset| applied at each level.
inline DemTile diamond_square(const SynthSpec& spec,
                              std::vector<double>* level_mean_abs_offset = nullptr) {
    spec.validate();
    const int side = (1 << spec.exponent) + 1;
    Grid g(side, side);

    g.at(0, 0) = spec.corner_heights[0];
    g.at(0, side - 1) = spec.corner_heights[1];
    g.at(side - 1, 0) = spec.corner_heights[2];
    g.at(side - 1, side - 1) = spec.corner_heights[3];

    // Mirror off-grid neighbor indices back into the grid.
    auto mirror = [side](int i) {
        if (i < 0) return -i;
        if (i >= side) return 2 * (side - 1) - i;
        return i;
    };

    double amp = spec.roughness;
    std::uint64_t level = 0;
    if (level_mean_abs_offset) level_mean_abs_offset->clear();

    for (int step = side - 1; step >= 2; step /= 2, ++level) {
        const int half = step / 2;
        double abs_sum = 0.0;
        std::size_t n_offsets = 0;

        // Diamond: centers of squares get the mean of their four corners.
        for (int y = half; y < side; y += step) {
            for (int x = half; x < side; x += step) {
                const double avg = 0.25 * (g.at(y - half, x - half) + g.at(y - half, x + half) +
                                           g.at(y + half, x - half) + g.at(y + half, x + half));
                const double off = keyed_symmetric(spec.seed, level, 0, static_cast<std::uint64_t>(y),
                                                   static_cast<std::uint64_t>(x), amp);
                g.at(y, x) = avg + off;
                abs_sum += std::abs(off);
                ++n_offsets;
            }
        }

        // Square: edge midpoints get the mean of their four axis neighbors,
        // mirrored at the border.
        for (int y = 0; y < side; y += half) {
            const int x0 = ((y / half) % 2 == 0) ? half : 0;
            for (int x = x0; x < side; x += step) {
                const double avg = 0.25 * (g.at(mirror(y - half), x) + g.at(mirror(y + half), x) +
                                           g.at(y, mirror(x - half)) + g.at(y, mirror(x + half)));
                const double off = keyed_symmetric(spec.seed, level, 1, static_cast<std::uint64_t>(y),
                                                   static_cast<std::uint64_t>(x), amp);
                g.at(y, x) = avg + off;
                abs_sum += std::abs(off);
                ++n_offsets;
            }
        }

        if (level_mean_abs_offset)
            level_mean_abs_offset->push_back(n_offsets ? abs_sum / static_cast<double>(n_offsets)
                                                       : 0.0);
        amp *= spec.decay;
    }

    DemTile t;
    t.rows = side;
    t.cols = side;
    t.cellsize = 2.0; // matches the 2 m HR grids this generator stands in for
    t.origin_x = 0.0;
    t.origin_y = 0.0;
    t.nodata_value = kDefaultNodata;
    t.heights.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) t.heights[i] = static_cast<float>(g.v[i]);
    return t;
}

// All size x size crops on the stride grid; a final clamped row/col position
// is added so coverage always reaches the far edge.
inline std::vector<int> crop_positions(int extent, int size, int stride) {
    std::vector<int> pos;
    for (int p = 0; p + size <= extent; p += stride) pos.push_back(p);
    if (pos.empty() || pos.back() != extent - size) pos.push_back(extent - size);
    return pos;
}

inline std::vector<DemTile> crop_tiles(const DemTile& tile, int size, int stride) {
    tile.validate();
    if (size <= 0) throw ArgumentError("crop_tiles: size must be positive");
    if (stride <= 0) throw ArgumentError("crop_tiles: stride must be positive");
    if (size > tile.rows || size > tile.cols)
        throw ArgumentError("crop_tiles: size " + std::to_string(size) + " exceeds tile extent " +
                            std::to_string(tile.rows) + "x" + std::to_string(tile.cols));

    const std::vector<int> row_pos = crop_positions(tile.rows, size, stride);
    const std::vector<int> col_pos = crop_positions(tile.cols, size, stride);

    std::vector<DemTile> out;
    out.reserve(row_pos.size() * col_pos.size());
    for (int r0 : row_pos) {
        for (int c0 : col_pos) {
            DemTile t;
            t.rows = size;
            t.cols = size;
            t.cellsize = tile.cellsize;
            t.origin_x = tile.origin_x + static_cast<double>(c0) * tile.cellsize;
            // row 0 is north, origin is the lower-left corner
            t.origin_y = tile.origin_y + static_cast<double>(tile.rows - r0 - size) * tile.cellsize;
            t.nodata_value = tile.nodata_value;
            t.heights.resize(static_cast<std::size_t>(size) * size);
            for (int r = 0; r < size; ++r)
                for (int c = 0; c < size; ++c) t.at(r, c) = tile.at(r0 + r, c0 + c);
            out.push_back(std::move(t));
        }
    }
    return out;
}

} // namespace demsr
