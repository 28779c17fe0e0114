#pragma once

#include <set>
#include <string>

#include <json.hpp>

#include "demsr/errors.hpp"
#include "demsr/net.hpp"
#include "demsr/raster.hpp"
#include "demsr/train.hpp"

namespace demsr {

// Training run description. Silent hyperparameter typos are the main
// reproduction hazard, so unknown keys anywhere in the document are errors.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    std::string train_manifest;
    std::string val_manifest;
    std::uint64_t init_seed = 0; // weight init; defaults to train.seed
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                                const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ArgumentError("config: unknown key '" + where + it.key() + "'");
}

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ArgumentError("config: bad value for '" + where + key + "'");
    }
}

} // namespace detail

inline RunConfig parse_run_config(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(detail::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ArgumentError(path + ": invalid JSON: " + std::string(e.what()));
    }
    if (!j.is_object()) throw ArgumentError(path + ": config root must be an object");
    detail::reject_unknown_keys(j, {"model", "train", "data"}, "");

    RunConfig cfg;
    bool have_init_seed = false;
    if (j.contains("model")) {
        const auto& m = j.at("model");
        detail::reject_unknown_keys(m, {"m", "n", "t", "scale", "init_seed"}, "model.");
        detail::read_key(m, "m", cfg.model.m, "model.");
        detail::read_key(m, "n", cfg.model.n, "model.");
        detail::read_key(m, "t", cfg.model.t_steps, "model.");
        detail::read_key(m, "scale", cfg.model.scale, "model.");
        if (m.contains("init_seed")) {
            detail::read_key(m, "init_seed", cfg.init_seed, "model.");
            have_init_seed = true;
        }
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        detail::reject_unknown_keys(
            t, {"batch_size", "base_lr", "lr_milestones", "lr_gamma", "epochs", "seed"}, "train.");
        detail::read_key(t, "batch_size", cfg.train.batch_size, "train.");
        detail::read_key(t, "base_lr", cfg.train.base_lr, "train.");
        detail::read_key(t, "lr_milestones", cfg.train.lr_milestones, "train.");
        detail::read_key(t, "lr_gamma", cfg.train.lr_gamma, "train.");
        detail::read_key(t, "epochs", cfg.train.epochs, "train.");
        detail::read_key(t, "seed", cfg.train.seed, "train.");
    }
    if (!j.contains("data")) throw ArgumentError(path + ": missing 'data' section");
    const auto& d = j.at("data");
    detail::reject_unknown_keys(d, {"train_manifest", "val_manifest"}, "data.");
    detail::read_key(d, "train_manifest", cfg.train_manifest, "data.");
    detail::read_key(d, "val_manifest", cfg.val_manifest, "data.");
    if (cfg.train_manifest.empty()) throw ArgumentError(path + ": data.train_manifest is required");
    if (cfg.val_manifest.empty()) throw ArgumentError(path + ": data.val_manifest is required");

    if (!have_init_seed) cfg.init_seed = cfg.train.seed;
    cfg.model.validate();
    cfg.train.validate();
    return cfg;
}

} // namespace demsr
