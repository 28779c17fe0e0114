#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "demsr/errors.hpp"
#include "demsr/grid.hpp"

namespace demsr {

// Channel-major feature map: c planes of h*w doubles.
struct Tensor {
    int c = 0;
    int h = 0;
    int w = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int c_, int h_, int w_)
        : c(c_), h(h_), w(w_),
          v(static_cast<std::size_t>(c_) * static_cast<std::size_t>(h_) * static_cast<std::size_t>(w_),
            0.0) {}

    std::size_t plane_size() const { return static_cast<std::size_t>(h) * w; }
    double* plane(int ci) { return v.data() + static_cast<std::size_t>(ci) * plane_size(); }
    const double* plane(int ci) const { return v.data() + static_cast<std::size_t>(ci) * plane_size(); }

    bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }

    void zero() { std::fill(v.begin(), v.end(), 0.0); }
};

inline Tensor tensor_from_grid(const Grid& g) {
    Tensor t(1, g.rows, g.cols);
    t.v = g.v;
    return t;
}

inline Grid grid_from_tensor(const Tensor& t, int channel = 0) {
    Grid g(t.h, t.w);
    const double* p = t.plane(channel);
    std::copy(p, p + t.plane_size(), g.v.begin());
    return g;
}

// 2-D convolution, zero padding, stride 1, odd square kernels. Weights are
// [out][in][k][k]; gradients live alongside the parameters so one layer
// instance can be shared across unroll steps and accumulate through time.
struct Conv2d {
    int in_ch = 0;
    int out_ch = 0;
    int ksize = 1;
    std::vector<double> weight;
    std::vector<double> bias;
    std::vector<double> grad_weight;
    std::vector<double> grad_bias;

    Conv2d() = default;
    Conv2d(int in_c, int out_c, int k)
        : in_ch(in_c), out_ch(out_c), ksize(k),
          weight(static_cast<std::size_t>(out_c) * in_c * k * k, 0.0), bias(out_c, 0.0),
          grad_weight(weight.size(), 0.0), grad_bias(out_c, 0.0) {}

    double wt(int o, int i, int ky, int kx) const {
        return weight[((static_cast<std::size_t>(o) * in_ch + i) * ksize + ky) * ksize + kx];
    }

    void forward(const Tensor& x, Tensor& y) const {
        y = Tensor(out_ch, x.h, x.w);
        const int pad = ksize / 2;
        const int H = x.h, W = x.w;
        for (int o = 0; o < out_ch; ++o) {
            double* yp = y.plane(o);
            const double b = bias[static_cast<std::size_t>(o)];
            for (std::size_t i = 0; i < y.plane_size(); ++i) yp[i] = b;
            for (int ci = 0; ci < in_ch; ++ci) {
                const double* xp = x.plane(ci);
                for (int ky = 0; ky < ksize; ++ky) {
                    const int dy = ky - pad;
                    for (int kx = 0; kx < ksize; ++kx) {
                        const int dx = kx - pad;
                        const double wv = wt(o, ci, ky, kx);
                        if (wv == 0.0) continue;
                        const int y0 = std::max(0, -dy), y1 = H - std::max(0, dy);
                        const int x0 = std::max(0, -dx), x1 = W - std::max(0, dx);
                        for (int yy = y0; yy < y1; ++yy) {
                            double* dst = yp + static_cast<std::size_t>(yy) * W;
                            const double* src = xp + static_cast<std::size_t>(yy + dy) * W + dx;
                            for (int xx = x0; xx < x1; ++xx) dst[xx] += wv * src[xx];
                        }
                    }
                }
            }
        }
    }

    // Accumulates parameter gradients; writes the input gradient if dx given.
    void backward(const Tensor& x, const Tensor& dy, Tensor* dx) {
        const int pad = ksize / 2;
        const int H = x.h, W = x.w;
        if (dx) *dx = Tensor(in_ch, H, W);
        for (int o = 0; o < out_ch; ++o) {
            const double* dyp = dy.plane(o);
            double gb = 0.0;
            for (std::size_t i = 0; i < dy.plane_size(); ++i) gb += dyp[i];
            grad_bias[static_cast<std::size_t>(o)] += gb;
            for (int ci = 0; ci < in_ch; ++ci) {
                const double* xp = x.plane(ci);
                double* dxp = dx ? dx->plane(ci) : nullptr;
                for (int ky = 0; ky < ksize; ++ky) {
                    const int dyo = ky - pad;
                    for (int kx = 0; kx < ksize; ++kx) {
                        const int dxo = kx - pad;
                        const int y0 = std::max(0, -dyo), y1 = H - std::max(0, dyo);
                        const int x0 = std::max(0, -dxo), x1 = W - std::max(0, dxo);
                        double gw = 0.0;
                        const double wv = wt(o, ci, ky, kx);
                        for (int yy = y0; yy < y1; ++yy) {
                            const double* drow = dyp + static_cast<std::size_t>(yy) * W;
                            const double* srow = xp + static_cast<std::size_t>(yy + dyo) * W + dxo;
                            double* dst = dxp ? dxp + static_cast<std::size_t>(yy + dyo) * W + dxo
                                              : nullptr;
                            if (dst) {
                                for (int xx = x0; xx < x1; ++xx) {
                                    gw += drow[xx] * srow[xx];
                                    dst[xx] += wv * drow[xx];
                                }
                            } else {
                                for (int xx = x0; xx < x1; ++xx) gw += drow[xx] * srow[xx];
                            }
                        }
                        grad_weight[((static_cast<std::size_t>(o) * in_ch + ci) * ksize + ky) *
                                        ksize +
                                    kx] += gw;
                    }
                }
            }
        }
    }
};

// Per-channel parametric ReLU.
struct PReLU {
    std::vector<double> slope;
    std::vector<double> grad_slope;

    PReLU() = default;
    explicit PReLU(int channels, double init = 0.25)
        : slope(channels, init), grad_slope(channels, 0.0) {}

    void forward(const Tensor& x, Tensor& y) const {
        y = Tensor(x.c, x.h, x.w);
        for (int ci = 0; ci < x.c; ++ci) {
            const double s = slope[static_cast<std::size_t>(ci)];
            const double* xp = x.plane(ci);
            double* yp = y.plane(ci);
            for (std::size_t i = 0; i < x.plane_size(); ++i)
                yp[i] = xp[i] >= 0.0 ? xp[i] : s * xp[i];
        }
    }

    // x is the pre-activation input that was fed to forward.
    void backward(const Tensor& x, const Tensor& dy, Tensor& dx) {
        dx = Tensor(x.c, x.h, x.w);
        for (int ci = 0; ci < x.c; ++ci) {
            const double s = slope[static_cast<std::size_t>(ci)];
            const double* xp = x.plane(ci);
            const double* dyp = dy.plane(ci);
            double* dxp = dx.plane(ci);
            double gs = 0.0;
            for (std::size_t i = 0; i < x.plane_size(); ++i) {
                if (xp[i] >= 0.0) {
                    dxp[i] = dyp[i];
                } else {
                    dxp[i] = s * dyp[i];
                    gs += dyp[i] * xp[i];
                }
            }
            grad_slope[static_cast<std::size_t>(ci)] += gs;
        }
    }
};

// Channel concatenation of equal-sized maps.
inline Tensor concat(const std::vector<const Tensor*>& parts) {
    int ch = 0;
    for (const Tensor* p : parts) ch += p->c;
    Tensor out(ch, parts[0]->h, parts[0]->w);
    std::size_t off = 0;
    for (const Tensor* p : parts) {
        std::copy(p->v.begin(), p->v.end(), out.v.begin() + static_cast<std::ptrdiff_t>(off));
        off += p->v.size();
    }
    return out;
}

// Splits a concat gradient back onto its parts, accumulating.
inline void split_add(const Tensor& dcat, const std::vector<Tensor*>& dparts) {
    std::size_t off = 0;
    for (Tensor* p : dparts) {
        for (std::size_t i = 0; i < p->v.size(); ++i) p->v[i] += dcat.v[off + i];
        off += p->v.size();
    }
}

inline void add_inplace(Tensor& a, const Tensor& b) {
    for (std::size_t i = 0; i < a.v.size(); ++i) a.v[i] += b.v[i];
}

} // namespace demsr
