#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "demsr/errors.hpp"

namespace demsr {

// Dense row-major 2-D array of doubles. The working currency of resampling,
// network I/O and metrics; raster files carry float32 (see raster.hpp).
struct Grid {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Grid() = default;
    Grid(int r, int c, double fill = 0.0)
        : rows(r), cols(c), v(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {}

    double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }

    std::size_t size() const { return v.size(); }

    bool same_shape(const Grid& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }
};

inline void require_same_shape(const Grid& a, const Grid& b, const char* what) {
    if (!a.same_shape(b))
        throw ArgumentError(std::string(what) + ": shape mismatch (" + std::to_string(a.rows) +
                            "x" + std::to_string(a.cols) + " vs " + std::to_string(b.rows) + "x" +
                            std::to_string(b.cols) + ")");
}

} // namespace demsr
