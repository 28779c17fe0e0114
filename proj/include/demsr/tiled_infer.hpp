#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "demsr/errors.hpp"
#include "demsr/grid.hpp"
#include "demsr/net.hpp"
#include "demsr/raster.hpp"
#include "demsr/threads.hpp"

namespace demsr {

// Patch placement over an ILR grid. Positions advance by
// patch_size - 2*overlap; a clamped final position is appended whenever the
// stride grid stops short of the far edge.
struct PatchPlan {
    int patch_size = 0;
    int overlap = 0;
    std::vector<std::pair<int, int>> positions; // (row, col), row-major order

    int stride() const { return patch_size - 2 * overlap; }
};

namespace detail {

inline std::vector<int> patch_positions(int extent, int patch, int stride) {
    std::vector<int> pos;
    for (int p = 0; p + patch <= extent; p += stride) pos.push_back(p);
    if (pos.back() != extent - patch) pos.push_back(extent - patch);
    return pos;
}

} // namespace detail

inline PatchPlan plan_patches(int rows, int cols, int patch_size, int overlap) {
    if (rows < 1 || cols < 1) throw ArgumentError("plan_patches: empty grid");
    if (patch_size < 1) throw ArgumentError("plan_patches: patch size must be positive");
    if (patch_size > rows || patch_size > cols)
        throw ArgumentError("plan_patches: patch size " + std::to_string(patch_size) +
                            " exceeds grid " + std::to_string(rows) + "x" + std::to_string(cols));
    if (overlap < 0) throw ArgumentError("plan_patches: overlap must be non-negative");
    if (2 * overlap >= patch_size)
        throw ArgumentError("plan_patches: need 2*overlap < patch size for a positive stride");

    PatchPlan plan;
    plan.patch_size = patch_size;
    plan.overlap = overlap;
    const std::vector<int> row_pos = detail::patch_positions(rows, patch_size, plan.stride());
    const std::vector<int> col_pos = detail::patch_positions(cols, patch_size, plan.stride());
    for (int r : row_pos)
        for (int c : col_pos) plan.positions.emplace_back(r, c);
    return plan;
}

// Generic tiled application: run `process` on every planned patch and blend
// by per-pixel mean. Patches run in parallel; accumulation follows position
// index order, so results are bit-reproducible.
inline Grid tile_apply(const Grid& input, const PatchPlan& plan,
                       const std::function<Grid(const Grid&, std::size_t)>& process) {
    if (plan.positions.empty()) throw ArgumentError("tile_apply: empty patch plan");
    const int P = plan.patch_size;
    for (const auto& [r, c] : plan.positions)
        if (r < 0 || c < 0 || r + P > input.rows || c + P > input.cols)
            throw ArgumentError("tile_apply: patch plan does not fit the grid");

    std::vector<Grid> results(plan.positions.size());
    parallel_for(plan.positions.size(), [&](std::size_t i) {
        const auto [r0, c0] = plan.positions[i];
        Grid patch(P, P);
        for (int r = 0; r < P; ++r)
            for (int c = 0; c < P; ++c) patch.at(r, c) = input.at(r0 + r, c0 + c);
        Grid out = process(patch, i);
        if (out.rows != P || out.cols != P)
            throw ArgumentError("tile_apply: processor changed the patch size");
        results[i] = std::move(out);
    });

    Grid sum(input.rows, input.cols);
    std::vector<int> hits(input.size(), 0);
    for (std::size_t i = 0; i < plan.positions.size(); ++i) {
        const auto [r0, c0] = plan.positions[i];
        for (int r = 0; r < P; ++r) {
            for (int c = 0; c < P; ++c) {
                sum.at(r0 + r, c0 + c) += results[i].at(r, c);
                ++hits[static_cast<std::size_t>(r0 + r) * input.cols + (c0 + c)];
            }
        }
    }
    for (std::size_t i = 0; i < sum.size(); ++i) {
        if (hits[i] == 0) throw ArgumentError("tile_apply: patch plan leaves pixels uncovered");
        sum.v[i] /= static_cast<double>(hits[i]);
    }
    return sum;
}

// Super-resolve an ILR tile patch by patch. overlap 0 in the plan gives
// independent patches (DSRFB); overlap patch/4 gives the aggregated variant
// (DSRFO).
inline DemTile super_resolve(const DsrfbNet& net, const DemTile& ilr, const PatchPlan& plan,
                             EnsembleMode mode) {
    ilr.validate();
    if (ilr.has_nodata())
        throw ArgumentError("super_resolve: tile contains nodata, fill voids first");
    const Grid in = grid_from_tile(ilr);
    Grid out = tile_apply(in, plan, [&](const Grid& patch, std::size_t) {
        return ensemble(net.forward(patch), mode);
    });
    return tile_from_grid(out, ilr);
}

} // namespace demsr
