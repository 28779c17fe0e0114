#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "demsr/errors.hpp"
#include "demsr/metrics.hpp"
#include "demsr/net.hpp"
#include "demsr/resample.hpp"
#include "demsr/rng.hpp"

namespace demsr {

struct TrainConfig {
    int batch_size = 4;
    double base_lr = 1e-4;
    std::vector<int> lr_milestones{50, 75, 90};
    double lr_gamma = 0.5;
    int epochs = 100;
    std::uint64_t seed = 0;

    void validate() const {
        if (batch_size < 1) throw ArgumentError("TrainConfig: batch_size must be positive");
        if (!(base_lr > 0.0)) throw ArgumentError("TrainConfig: base_lr must be positive");
        if (!(lr_gamma > 0.0)) throw ArgumentError("TrainConfig: lr_gamma must be positive");
        if (epochs < 1) throw ArgumentError("TrainConfig: epochs must be positive");
        for (std::size_t i = 0; i < lr_milestones.size(); ++i) {
            if (lr_milestones[i] >= epochs)
                throw ArgumentError("TrainConfig: milestones must be below epochs");
            if (i > 0 && lr_milestones[i] <= lr_milestones[i - 1])
                throw ArgumentError("TrainConfig: milestones must be strictly increasing");
        }
    }
};

struct EpochRecord {
    int epoch = 0;
    double mean_loss = 0.0;
    double val_rmse = 0.0;
    double lr = 0.0;
    double wall_seconds = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
};

// Accumulated multi-step objective: sum over unroll steps of the per-pixel
// mean absolute error against HR.
inline double loss(const SrOutputs& outputs, const Grid& hr) {
    if (outputs.sr.empty()) throw ArgumentError("loss: no outputs");
    double total = 0.0;
    for (const Grid& sr : outputs.sr) {
        require_same_shape(sr, hr, "loss");
        double acc = 0.0;
        for (std::size_t i = 0; i < sr.size(); ++i) acc += std::abs(sr.v[i] - hr.v[i]);
        total += acc / static_cast<double>(sr.size());
    }
    return total;
}

// Loss plus its gradient w.r.t. every step output, scaled by grad_scale
// (1/batch for batch averaging). d|x|/dx at exactly 0 is taken as 0.
inline double loss_and_output_grads(const SrOutputs& outputs, const Grid& hr, double grad_scale,
                                    std::vector<Grid>& dsr) {
    if (outputs.sr.empty()) throw ArgumentError("loss: no outputs");
    dsr.assign(outputs.sr.size(), Grid(hr.rows, hr.cols));
    double total = 0.0;
    for (std::size_t t = 0; t < outputs.sr.size(); ++t) {
        const Grid& sr = outputs.sr[t];
        require_same_shape(sr, hr, "loss");
        const double inv_n = 1.0 / static_cast<double>(sr.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < sr.size(); ++i) {
            const double d = sr.v[i] - hr.v[i];
            acc += std::abs(d);
            dsr[t].v[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) * inv_n * grad_scale;
        }
        total += acc * inv_n;
    }
    return total;
}

// Multi-step decay: base_lr * gamma^(number of milestones <= epoch).
inline double lr_at(int epoch, const TrainConfig& cfg) {
    if (epoch < 0 || epoch >= cfg.epochs) throw ArgumentError("lr_at: epoch out of range");
    int hits = 0;
    for (int ms : cfg.lr_milestones)
        if (ms <= epoch) ++hits;
    return cfg.base_lr * std::pow(cfg.lr_gamma, hits);
}

struct Adam {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step_count = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

    void init(const std::vector<ParamRef>& params) {
        m.clear();
        v.clear();
        for (const ParamRef& p : params) {
            m.emplace_back(p.values->size(), 0.0);
            v.emplace_back(p.values->size(), 0.0);
        }
        step_count = 0;
    }

    void step(const std::vector<ParamRef>& params, double lr) {
        ++step_count;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
        for (std::size_t p = 0; p < params.size(); ++p) {
            std::vector<double>& w = *params[p].values;
            const std::vector<double>& g = *params[p].grads;
            std::vector<double>& mp = m[p];
            std::vector<double>& vp = v[p];
            for (std::size_t i = 0; i < w.size(); ++i) {
                mp[i] = beta1 * mp[i] + (1.0 - beta1) * g[i];
                vp[i] = beta2 * vp[i] + (1.0 - beta2) * g[i] * g[i];
                const double mhat = mp[i] / bc1;
                const double vhat = vp[i] / bc2;
                w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }
};

// Mean RMSE of the final-step output over all pairs of a manifest.
inline double validate(const DsrfbNet& net, const DatasetManifest& manifest) {
    if (manifest.entries.empty()) throw ArgumentError("validate: empty manifest");
    double sum = 0.0;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        const TrainPair pair = load_pair(manifest, i);
        const SrOutputs out = net.forward(grid_from_tile(pair.ilr));
        sum += rmse(out.sr.back(), grid_from_tile(pair.hr));
    }
    return sum / static_cast<double>(manifest.entries.size());
}

namespace detail {

inline void append_report_line(const std::string& path, const EpochRecord& r) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["loss"] = r.mean_loss;
    j["val_rmse"] = r.val_rmse;
    j["lr"] = r.lr;
    j["wall_s"] = r.wall_seconds;
    std::ofstream out(path, std::ios::app);
    if (!out) throw IoError("cannot open '" + path + "' for appending");
    out << j.dump() << '\n';
    if (!out) throw IoError("write failure on '" + path + "'");
}

} // namespace detail

// Full training run: seeded shuffles, batched Adam steps on the accumulated
// L1 objective, per-epoch validation, last/best checkpoints and a JSONL
// report under out_dir. Deterministic for a fixed seed.
inline TrainReport train(DsrfbNet& net, const DatasetManifest& train_manifest,
                         const DatasetManifest& val_manifest, const TrainConfig& cfg,
                         const std::string& out_dir) {
    cfg.validate();
    if (train_manifest.entries.empty()) throw ArgumentError("train: empty training manifest");
    if (val_manifest.entries.empty()) throw ArgumentError("train: empty validation manifest");
    std::filesystem::create_directories(out_dir);
    const std::string report_path = (std::filesystem::path(out_dir) / "report.jsonl").string();
    std::filesystem::remove(report_path);

    std::vector<ParamRef> params = net.params();
    Adam adam;
    adam.init(params);

    std::vector<std::size_t> order(train_manifest.entries.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainReport report;
    double best_rmse = std::numeric_limits<double>::infinity();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = lr_at(epoch, cfg);

        // fresh deterministic stream per epoch
        CounterRng shuffle_rng(mix64(cfg.seed ^ (0x7368756666ULL + static_cast<std::uint64_t>(epoch))));
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const double grad_scale = 1.0 / static_cast<double>(end - start);
            net.zero_grad();
            double batch_loss = 0.0;
            std::string batch_ids;
            for (std::size_t k = start; k < end; ++k) {
                const TrainPair pair = load_pair(train_manifest, order[k]);
                if (!batch_ids.empty()) batch_ids += ", ";
                batch_ids += pair.id;
                ForwardCache cache;
                const SrOutputs outs = net.forward_cached(grid_from_tile(pair.ilr), cache);
                std::vector<Grid> dsr;
                batch_loss +=
                    grad_scale * loss_and_output_grads(outs, grid_from_tile(pair.hr), grad_scale, dsr);
                net.backward(cache, dsr);
            }
            if (!std::isfinite(batch_loss))
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                   ", batch ids [" + batch_ids + "]");
            adam.step(params, lr);
            loss_sum += batch_loss;
            ++n_batches;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.mean_loss = loss_sum / static_cast<double>(n_batches);
        rec.lr = lr;
        rec.val_rmse = validate(net, val_manifest);
        rec.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        save_checkpoint(net, (std::filesystem::path(out_dir) / "last.ckpt").string());
        if (rec.val_rmse < best_rmse) {
            best_rmse = rec.val_rmse;
            save_checkpoint(net, (std::filesystem::path(out_dir) / "best.ckpt").string());
        }
        detail::append_report_line(report_path, rec);
        report.epochs.push_back(rec);
    }
    return report;
}

} // namespace demsr
