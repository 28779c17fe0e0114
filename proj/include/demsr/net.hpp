#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "demsr/errors.hpp"
#include "demsr/grid.hpp"
#include "demsr/raster.hpp"
#include "demsr/rng.hpp"
#include "demsr/tensor.hpp"

namespace demsr {

struct ModelConfig {
    int m = 64;      // base filter count
    int n = 16;      // residual units in the feedback block (even)
    int t_steps = 4; // unroll steps
    int scale = 8;   // super-resolution factor carried as metadata

    void validate() const {
        if (m < 1) throw ArgumentError("ModelConfig: m must be positive");
        if (n < 1) throw ArgumentError("ModelConfig: n must be positive");
        if (n % 2 != 0)
            throw ArgumentError("ModelConfig: n must be even, the fusion reads even-indexed units");
        if (t_steps < 1) throw ArgumentError("ModelConfig: t_steps must be positive");
        if (scale < 1) throw ArgumentError("ModelConfig: scale must be positive");
    }
};

// Skip wiring of the feedback block. Unit B_i consumes every earlier output
// L_j of opposite parity; since L_0 is even, it reaches the odd units only
// and never the (even) last unit. The final fusion reads the even-indexed
// outputs L_2, L_4, ..., L_n.
struct LayerPlan {
    std::vector<std::vector<int>> unit_inputs; // unit_inputs[i-1] lists source L indices of B_i
    std::vector<int> fusion_inputs;

    static LayerPlan make(int n) {
        LayerPlan p;
        p.unit_inputs.resize(static_cast<std::size_t>(n));
        for (int i = 1; i <= n; ++i) {
            std::vector<int>& in = p.unit_inputs[static_cast<std::size_t>(i - 1)];
            for (int j = (i % 2 == 0) ? 1 : 0; j < i; j += 2) in.push_back(j);
        }
        for (int j = 2; j <= n; j += 2) p.fusion_inputs.push_back(j);
        return p;
    }
};

// The wrapped hidden state F^t_out carried between unroll steps.
struct FeedbackState {
    Tensor features;
};

// Per-step reconstructions of one unrolled forward pass.
struct SrOutputs {
    std::vector<Grid> sr;  // I^t_SR = I^t_Res + ILR
    std::vector<Grid> res; // I^t_Res
    FeedbackState state;   // F^T_out
};

enum class EnsembleMode { last, mean };

inline EnsembleMode ensemble_from_name(const std::string& s) {
    if (s == "last") return EnsembleMode::last;
    if (s == "mean") return EnsembleMode::mean;
    throw ArgumentError("unknown ensemble mode '" + s + "' (expected last|mean)");
}

struct ParamRef {
    std::string name;
    std::vector<int> shape;
    std::vector<double>* values;
    std::vector<double>* grads;
};

// Activation record of one residual unit, kept for backprop.
struct UnitCache {
    Tensor cat;      // concatenated skip inputs
    Tensor fuse_pre; // 1x1 conv output
    Tensor fuse_out; // after PReLU
    Tensor conv_pre; // 3x3 conv output
};

struct StepCache {
    Tensor cat_in; // [F^{t-1}_out, F^t_in]
    Tensor l0_pre;
    std::vector<Tensor> l; // L_0..L_n (post-activation)
    std::vector<UnitCache> units;
    Tensor fus_cat;
    Tensor fus_pre;
    Tensor f_out;
};

struct ForwardCache {
    Tensor ilr;
    Tensor fe0_pre, fe0_post, fe1_pre, f_in;
    std::vector<StepCache> steps;
};

// DSRFB: feature extraction, a weight-shared feedback block unrolled
// t_steps times, and a reconstruction conv with a global ILR residual.
class DsrfbNet {
public:
    DsrfbNet() = default;

    explicit DsrfbNet(const ModelConfig& config, std::uint64_t init_seed = 0) : cfg_(config) {
        cfg_.validate();
        plan_ = LayerPlan::make(cfg_.n);
        const int m = cfg_.m;

        fe_conv0_ = Conv2d(1, 4 * m, 3);
        fe_act0_ = PReLU(4 * m);
        fe_conv1_ = Conv2d(4 * m, m, 1);
        fe_act1_ = PReLU(m);

        compress_ = Conv2d(2 * m, m, 1);
        compress_act_ = PReLU(m);

        units_.resize(static_cast<std::size_t>(cfg_.n));
        for (int i = 1; i <= cfg_.n; ++i) {
            Unit& u = units_[static_cast<std::size_t>(i - 1)];
            const int fan = static_cast<int>(plan_.unit_inputs[static_cast<std::size_t>(i - 1)].size());
            u.fuse = Conv2d(fan * m, m, 1);
            u.fuse_act = PReLU(m);
            u.conv = Conv2d(m, m, 3);
            u.conv_act = PReLU(m);
        }

        fusion_ = Conv2d((cfg_.n / 2) * m, m, 1);
        fusion_act_ = PReLU(m);
        rb_conv_ = Conv2d(cfg_.m, 1, 3);

        init_weights(init_seed);
    }

    const ModelConfig& config() const { return cfg_; }
    const LayerPlan& plan() const { return plan_; }

    // Fixed-order registry of every learnable block; the same storage is
    // reused at every unroll step (weight sharing by construction).
    std::vector<ParamRef> params() {
        std::vector<ParamRef> out;
        auto conv = [&out](const std::string& name, Conv2d& c) {
            out.push_back({name + ".weight", {c.out_ch, c.in_ch, c.ksize, c.ksize}, &c.weight,
                           &c.grad_weight});
            out.push_back({name + ".bias", {c.out_ch}, &c.bias, &c.grad_bias});
        };
        auto act = [&out](const std::string& name, PReLU& p) {
            out.push_back({name + ".slope", {static_cast<int>(p.slope.size())}, &p.slope,
                           &p.grad_slope});
        };
        conv("fe.conv0", fe_conv0_);
        act("fe.act0", fe_act0_);
        conv("fe.conv1", fe_conv1_);
        act("fe.act1", fe_act1_);
        conv("fb.compress", compress_);
        act("fb.compress_act", compress_act_);
        for (int i = 1; i <= cfg_.n; ++i) {
            Unit& u = units_[static_cast<std::size_t>(i - 1)];
            const std::string base = "fb.b" + std::to_string(i);
            conv(base + ".fuse", u.fuse);
            act(base + ".fuse_act", u.fuse_act);
            conv(base + ".conv", u.conv);
            act(base + ".conv_act", u.conv_act);
        }
        conv("fb.fusion", fusion_);
        act("fb.fusion_act", fusion_act_);
        conv("rb.conv", rb_conv_);
        return out;
    }

    void zero_grad() {
        for (ParamRef& p : params()) std::fill(p.grads->begin(), p.grads->end(), 0.0);
    }

    SrOutputs forward(const Grid& ilr) const { return run_forward(ilr, nullptr); }

    SrOutputs forward_cached(const Grid& ilr, ForwardCache& cache) const {
        return run_forward(ilr, &cache);
    }

    // Backprop through the unrolled graph. dsr[t] is the loss gradient of
    // I^{t+1}_SR; parameter gradients accumulate (call zero_grad between
    // batches). The feedback path routes each step's state gradient into the
    // previous step; at t=1 it lands on F_in, which doubles as F^0_out.
    void backward(const ForwardCache& cache, const std::vector<Grid>& dsr) {
        const int T = cfg_.t_steps;
        if (static_cast<int>(dsr.size()) != T)
            throw ArgumentError("backward: need one output gradient per unroll step");
        const int m = cfg_.m;
        const int H = cache.ilr.h, W = cache.ilr.w;

        Tensor d_f_in(m, H, W);
        Tensor d_next_prev; // dF^t_out contribution arriving from step t+1

        for (int t = T - 1; t >= 0; --t) {
            const StepCache& sc = cache.steps[static_cast<std::size_t>(t)];

            // reconstruction: sr = rb(f_out) + ilr
            Tensor dres = tensor_from_grid(dsr[static_cast<std::size_t>(t)]);
            Tensor d_f_out;
            rb_conv_.backward(sc.f_out, dres, &d_f_out);
            if (d_next_prev.v.size()) add_inplace(d_f_out, d_next_prev);

            // fusion over even-indexed unit outputs
            Tensor d_fus_pre;
            fusion_act_.backward(sc.fus_pre, d_f_out, d_fus_pre);
            Tensor d_fus_cat;
            fusion_.backward(sc.fus_cat, d_fus_pre, &d_fus_cat);

            std::vector<Tensor> dl(static_cast<std::size_t>(cfg_.n) + 1);
            for (Tensor& d : dl) d = Tensor(m, H, W);
            {
                std::vector<Tensor*> sinks;
                for (int j : plan_.fusion_inputs) sinks.push_back(&dl[static_cast<std::size_t>(j)]);
                split_add(d_fus_cat, sinks);
            }

            // units in reverse; dl[i] is complete once every later consumer
            // has been processed
            for (int i = cfg_.n; i >= 1; --i) {
                Unit& u = units_[static_cast<std::size_t>(i - 1)];
                const UnitCache& uc = sc.units[static_cast<std::size_t>(i - 1)];
                Tensor d_conv_pre;
                u.conv_act.backward(uc.conv_pre, dl[static_cast<std::size_t>(i)], d_conv_pre);
                Tensor d_fuse_out;
                u.conv.backward(uc.fuse_out, d_conv_pre, &d_fuse_out);
                Tensor d_fuse_pre;
                u.fuse_act.backward(uc.fuse_pre, d_fuse_out, d_fuse_pre);
                Tensor d_cat;
                u.fuse.backward(uc.cat, d_fuse_pre, &d_cat);
                std::vector<Tensor*> sinks;
                for (int j : plan_.unit_inputs[static_cast<std::size_t>(i - 1)])
                    sinks.push_back(&dl[static_cast<std::size_t>(j)]);
                split_add(d_cat, sinks);
            }

            // compression back onto [F^{t-1}_out, F^t_in]
            Tensor d_l0_pre;
            compress_act_.backward(sc.l0_pre, dl[0], d_l0_pre);
            Tensor d_cat_in;
            compress_.backward(sc.cat_in, d_l0_pre, &d_cat_in);

            Tensor d_prev(m, H, W), d_in(m, H, W);
            split_add(d_cat_in, {&d_prev, &d_in});
            add_inplace(d_f_in, d_in);
            if (t > 0)
                d_next_prev = std::move(d_prev);
            else
                add_inplace(d_f_in, d_prev); // F^0_out := F^1_in
        }

        // feature extraction
        Tensor d_fe1_pre;
        fe_act1_.backward(cache.fe1_pre, d_f_in, d_fe1_pre);
        Tensor d_fe0_post;
        fe_conv1_.backward(cache.fe0_post, d_fe1_pre, &d_fe0_post);
        Tensor d_fe0_pre;
        fe_act0_.backward(cache.fe0_pre, d_fe0_post, d_fe0_pre);
        fe_conv0_.backward(cache.ilr, d_fe0_pre, nullptr);
    }

private:
    struct Unit {
        Conv2d fuse;
        PReLU fuse_act;
        Conv2d conv;
        PReLU conv_act;
    };

    void init_weights(std::uint64_t seed) {
        CounterRng rng(seed);
        const double a = 0.25; // PReLU slope at init
        for (ParamRef& p : params()) {
            if (p.name.size() > 7 && p.name.substr(p.name.size() - 7) == ".weight") {
                // zero-mean normal, variance 2 / ((1 + a^2) * fan_in)
                std::size_t fan_in = 1;
                for (std::size_t d = 1; d < p.shape.size(); ++d)
                    fan_in *= static_cast<std::size_t>(p.shape[d]);
                const double std_dev = std::sqrt(2.0 / ((1.0 + a * a) * static_cast<double>(fan_in)));
                for (double& w : *p.values) w = rng.next_normal() * std_dev;
            }
            // biases stay zero, PReLU slopes keep their 0.25 init
        }
    }

    SrOutputs run_forward(const Grid& ilr_grid, ForwardCache* cache) const {
        if (ilr_grid.rows < 1 || ilr_grid.cols < 1) throw ArgumentError("forward: empty input");
        if (!ilr_grid.all_finite())
            throw ArgumentError("forward: input contains non-finite values");

        const int T = cfg_.t_steps;
        const Tensor ilr = tensor_from_grid(ilr_grid);

        // FE runs once; with shared weights every step would recompute the
        // identical F^t_in
        Tensor fe0_pre, fe0_post, fe1_pre, f_in;
        fe_conv0_.forward(ilr, fe0_pre);
        fe_act0_.forward(fe0_pre, fe0_post);
        fe_conv1_.forward(fe0_post, fe1_pre);
        fe_act1_.forward(fe1_pre, f_in);

        if (cache) {
            cache->ilr = ilr;
            cache->fe0_pre = fe0_pre;
            cache->fe0_post = fe0_post;
            cache->fe1_pre = fe1_pre;
            cache->f_in = f_in;
            cache->steps.clear();
            cache->steps.resize(static_cast<std::size_t>(T));
        }

        SrOutputs out;
        out.sr.reserve(static_cast<std::size_t>(T));
        out.res.reserve(static_cast<std::size_t>(T));

        Tensor f_prev = f_in; // F^0_out
        for (int t = 0; t < T; ++t) {
            StepCache local;
            StepCache& sc = cache ? cache->steps[static_cast<std::size_t>(t)] : local;

            sc.cat_in = concat({&f_prev, &f_in});
            compress_.forward(sc.cat_in, sc.l0_pre);
            sc.l.assign(static_cast<std::size_t>(cfg_.n) + 1, Tensor());
            compress_act_.forward(sc.l0_pre, sc.l[0]);

            if (cache) sc.units.resize(static_cast<std::size_t>(cfg_.n));
            for (int i = 1; i <= cfg_.n; ++i) {
                const Unit& u = units_[static_cast<std::size_t>(i - 1)];
                std::vector<const Tensor*> srcs;
                for (int j : plan_.unit_inputs[static_cast<std::size_t>(i - 1)])
                    srcs.push_back(&sc.l[static_cast<std::size_t>(j)]);
                // without a cache the unit intermediates die right here
                UnitCache scratch;
                UnitCache& uc = cache ? sc.units[static_cast<std::size_t>(i - 1)] : scratch;
                uc.cat = concat(srcs);
                u.fuse.forward(uc.cat, uc.fuse_pre);
                u.fuse_act.forward(uc.fuse_pre, uc.fuse_out);
                u.conv.forward(uc.fuse_out, uc.conv_pre);
                u.conv_act.forward(uc.conv_pre, sc.l[static_cast<std::size_t>(i)]);
            }

            {
                std::vector<const Tensor*> srcs;
                for (int j : plan_.fusion_inputs) srcs.push_back(&sc.l[static_cast<std::size_t>(j)]);
                sc.fus_cat = concat(srcs);
            }
            fusion_.forward(sc.fus_cat, sc.fus_pre);
            fusion_act_.forward(sc.fus_pre, sc.f_out);

            Tensor res;
            rb_conv_.forward(sc.f_out, res);

            Grid res_grid = grid_from_tensor(res);
            Grid sr_grid(res_grid.rows, res_grid.cols);
            for (std::size_t i = 0; i < sr_grid.size(); ++i)
                sr_grid.v[i] = res_grid.v[i] + ilr_grid.v[i];
            out.res.push_back(std::move(res_grid));
            out.sr.push_back(std::move(sr_grid));

            f_prev = sc.f_out;
            if (t == T - 1) out.state.features = sc.f_out;
        }
        return out;
    }

    ModelConfig cfg_;
    LayerPlan plan_;
    Conv2d fe_conv0_;
    PReLU fe_act0_;
    Conv2d fe_conv1_;
    PReLU fe_act1_;
    Conv2d compress_;
    PReLU compress_act_;
    std::vector<Unit> units_;
    Conv2d fusion_;
    PReLU fusion_act_;
    Conv2d rb_conv_;
};

inline Grid ensemble(const SrOutputs& outputs, EnsembleMode mode) {
    if (outputs.sr.empty()) throw ArgumentError("ensemble: no outputs");
    if (mode == EnsembleMode::last) return outputs.sr.back();
    Grid mean = outputs.sr.front();
    for (std::size_t t = 1; t < outputs.sr.size(); ++t)
        for (std::size_t i = 0; i < mean.size(); ++i) mean.v[i] += outputs.sr[t].v[i];
    const double inv = 1.0 / static_cast<double>(outputs.sr.size());
    for (double& x : mean.v) x *= inv;
    return mean;
}

inline constexpr char kCkptMagic[4] = {'D', 'S', 'R', 'C'};

// Checkpoint: magic, u32 version, u64 header length, JSON header (config +
// named parameter manifest), then raw little-endian f32 blocks in manifest
// order.
inline void save_checkpoint(DsrfbNet& net, const std::string& path) {
    nlohmann::ordered_json header;
    header["model"] = {{"m", net.config().m},
                       {"n", net.config().n},
                       {"t", net.config().t_steps},
                       {"scale", net.config().scale}};
    header["params"] = nlohmann::ordered_json::array();
    for (const ParamRef& p : net.params()) {
        nlohmann::ordered_json entry;
        entry["name"] = p.name;
        entry["shape"] = p.shape;
        header["params"].push_back(entry);
    }
    const std::string hdr = header.dump();

    std::string out;
    out.append(kCkptMagic, 4);
    detail::put_le<std::uint32_t>(out, 1u);
    detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(hdr.size()));
    out += hdr;
    for (const ParamRef& p : net.params())
        for (double w : *p.values) detail::put_le<float>(out, static_cast<float>(w));
    detail::write_file(path, out);
}

inline DsrfbNet load_checkpoint(const std::string& path) {
    const std::string data = detail::read_file(path);
    if (data.size() < 4 || std::memcmp(data.data(), kCkptMagic, 4) != 0)
        throw FormatError(path + ": bad magic, not a DSRFB checkpoint");
    std::size_t off = 4;
    const auto version = detail::get_le<std::uint32_t>(data, off, "version");
    if (version != 1u) throw FormatError(path + ": unsupported checkpoint version");
    const auto hdr_len = detail::get_le<std::uint64_t>(data, off, "header length");
    if (off + hdr_len > data.size()) throw FormatError(path + ": truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(data.substr(off, hdr_len));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": bad checkpoint header: " + std::string(e.what()));
    }
    off += hdr_len;

    ModelConfig cfg;
    try {
        cfg.m = header.at("model").at("m").get<int>();
        cfg.n = header.at("model").at("n").get<int>();
        cfg.t_steps = header.at("model").at("t").get<int>();
        cfg.scale = header.at("model").at("scale").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": bad checkpoint header: " + std::string(e.what()));
    }

    DsrfbNet net(cfg, 0);
    std::vector<ParamRef> params = net.params();
    const auto& manifest = header.at("params");
    if (manifest.size() != params.size())
        throw FormatError(path + ": checkpoint has " + std::to_string(manifest.size()) +
                          " parameter blocks, network expects " + std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const std::string name = manifest[i].at("name").get<std::string>();
        const std::vector<int> shape = manifest[i].at("shape").get<std::vector<int>>();
        if (name != params[i].name)
            throw FormatError(path + ": parameter " + std::to_string(i) + " is '" + name +
                              "', expected '" + params[i].name + "'");
        if (shape != params[i].shape)
            throw FormatError(path + ": parameter '" + name + "' has unexpected shape");
        for (double& w : *params[i].values)
            w = static_cast<double>(detail::get_le<float>(data, off, name.c_str()));
    }
    if (off != data.size()) throw FormatError(path + ": trailing bytes after parameter blocks");
    return net;
}

} // namespace demsr
