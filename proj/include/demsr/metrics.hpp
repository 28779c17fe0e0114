#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "demsr/errors.hpp"
#include "demsr/grid.hpp"
#include "demsr/raster.hpp"

namespace demsr {

inline double mse(const Grid& pred, const Grid& truth) {
    require_same_shape(pred, truth, "mse");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred.v[i] - truth.v[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
}

inline double rmse(const Grid& pred, const Grid& truth) { return std::sqrt(mse(pred, truth)); }

// 10*log10(R^2 / MSE); +infinity when the grids agree exactly.
inline double psnr(const Grid& pred, const Grid& truth, double peak) {
    if (!(peak > 0.0)) throw ArgumentError("psnr: peak must be positive");
    const double m = mse(pred, truth);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / m);
}

struct EvalResult {
    std::string region;
    double rmse = 0.0;
    double psnr = 0.0;
    long long pixels = 0;
    double peak = 0.0; // ground-truth elevation range used as the PSNR peak
};

// Pools squared error over every pixel of the region; the PSNR peak is the
// elevation range of the region's ground truth.
inline EvalResult evaluate_region(const std::string& region, const std::vector<DemTile>& pred,
                                  const std::vector<DemTile>& truth) {
    if (pred.size() != truth.size() || pred.empty())
        throw ArgumentError("evaluate_region: pred/truth tile counts differ or are empty");
    double sq_sum = 0.0;
    long long pixels = 0;
    double tmin = std::numeric_limits<double>::infinity();
    double tmax = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i].rows != truth[i].rows || pred[i].cols != truth[i].cols)
            throw ArgumentError("evaluate_region: tile " + std::to_string(i) + " shape mismatch");
        if (pred[i].has_nodata() || truth[i].has_nodata())
            throw ArgumentError("evaluate_region: tiles contain nodata");
        for (std::size_t k = 0; k < truth[i].heights.size(); ++k) {
            const double p = static_cast<double>(pred[i].heights[k]);
            const double t = static_cast<double>(truth[i].heights[k]);
            const double d = p - t;
            sq_sum += d * d;
            tmin = std::min(tmin, t);
            tmax = std::max(tmax, t);
        }
        pixels += static_cast<long long>(truth[i].heights.size());
    }
    EvalResult r;
    r.region = region;
    r.pixels = pixels;
    r.peak = tmax - tmin;
    const double pooled_mse = sq_sum / static_cast<double>(pixels);
    r.rmse = std::sqrt(pooled_mse);
    if (!(r.peak > 0.0))
        throw ArgumentError("evaluate_region: ground truth is constant, PSNR peak undefined");
    r.psnr = pooled_mse == 0.0 ? std::numeric_limits<double>::infinity()
                               : 10.0 * std::log10(r.peak * r.peak / pooled_mse);
    return r;
}

// Signed prediction error as a red/blue raster: negative error (prediction
// below truth) keeps red at 255, positive keeps blue at 255, |e| >= clip
// saturates, zero error is white. Written as binary PPM (P6) plus the raw
// signed error grid as .asc.
inline void error_raster(const DemTile& pred, const DemTile& truth, double clip,
                         const std::string& asc_path, const std::string& ppm_path) {
    if (pred.rows != truth.rows || pred.cols != truth.cols)
        throw ArgumentError("error_raster: shape mismatch");
    if (!(clip > 0.0)) throw ArgumentError("error_raster: clip must be positive");
    if (pred.has_nodata() || truth.has_nodata())
        throw ArgumentError("error_raster: tiles contain nodata");

    DemTile err = truth;
    std::string ppm = "P6\n" + std::to_string(truth.cols) + " " + std::to_string(truth.rows) +
                      "\n255\n";
    ppm.reserve(ppm.size() + static_cast<std::size_t>(truth.rows) * truth.cols * 3);
    for (std::size_t i = 0; i < truth.heights.size(); ++i) {
        const double e =
            static_cast<double>(pred.heights[i]) - static_cast<double>(truth.heights[i]);
        err.heights[i] = static_cast<float>(e);
        const double f = std::min(std::abs(e), clip) / clip;
        const unsigned char fade = static_cast<unsigned char>(255.0 * (1.0 - f));
        unsigned char rgb[3];
        if (e < 0.0) {
            rgb[0] = 255;
            rgb[1] = fade;
            rgb[2] = fade;
        } else if (e > 0.0) {
            rgb[0] = fade;
            rgb[1] = fade;
            rgb[2] = 255;
        } else {
            rgb[0] = rgb[1] = rgb[2] = 255;
        }
        ppm.append(reinterpret_cast<const char*>(rgb), 3);
    }
    write_asc(err, asc_path);
    detail::write_file(ppm_path, ppm);
}

inline nlohmann::ordered_json eval_result_json(const EvalResult& r) {
    nlohmann::ordered_json j;
    j["region"] = r.region;
    j["rmse_m"] = r.rmse;
    j["psnr_db"] = std::isinf(r.psnr) ? 1e9 : r.psnr;
    j["pixels"] = r.pixels;
    j["peak_m"] = r.peak;
    return j;
}

inline void write_eval_report(const std::vector<EvalResult>& results, const std::string& path) {
    nlohmann::ordered_json j;
    j["regions"] = nlohmann::ordered_json::array();
    for (const EvalResult& r : results) j["regions"].push_back(eval_result_json(r));
    detail::write_file(path, j.dump(2) + "\n");
}

// Plain-text table with one row per region.
inline std::string format_eval_table(const std::vector<EvalResult>& results) {
    char buf[160];
    std::string out;
    std::snprintf(buf, sizeof(buf), "%-20s %12s %12s %12s %12s\n", "Region", "PSNR (dB)",
                  "RMSE (m)", "pixels", "peak (m)");
    out += buf;
    for (const EvalResult& r : results) {
        std::snprintf(buf, sizeof(buf), "%-20s %12.3f %12.4f %12lld %12.2f\n", r.region.c_str(),
                      r.psnr, r.rmse, r.pixels, r.peak);
        out += buf;
    }
    return out;
}

} // namespace demsr
