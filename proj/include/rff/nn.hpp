// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>

#include "rff/gemm.hpp"
#include "rff/tensor.hpp"

namespace rff {

// Layers carry their parameters; per-call intermediates live in Ctx objects
// owned by the caller, so two branches of a Siamese step can hold separate
// activation state. backward() accumulates parameter gradients and returns
// the input gradient.

// ---------------------------------------------------------------------------

inline double kaiming_bound(int fan_in) { return std::sqrt(6.0 / double(fan_in)); }

template <typename T>
void kaiming_uniform(TensorT<T>& w, int fan_in, Rng& rng) {
    const double b = kaiming_bound(fan_in);
    for (auto& v : w.data) v = T(rng.uniform(-b, b));
}

// ---------------------------------------------------------------------------

template <typename T>
struct Conv1d {
    int in_ch = 0, out_ch = 0, ksize = 3, pad = 1;
    TensorT<T> w;  // [out, in, k]
    TensorT<T> b;  // [out]

    struct Ctx {
        int n = 0, len = 0;
        std::vector<T> x_col;  // (in*k) x (n*len), column-major
    };

    void init(int in_channels, int out_channels, int k, Rng& rng) {
        in_ch = in_channels;
        out_ch = out_channels;
        ksize = k;
        pad = k / 2;
        w = TensorT<T>({out_ch, in_ch, ksize});
        b = TensorT<T>({out_ch});
        kaiming_uniform(w, in_ch * ksize, rng);
        w.set_requires_grad();
        b.set_requires_grad();
    }

    TensorT<T> forward(const TensorT<T>& x, Ctx& ctx) const {
        if (x.ndim() != 3 || x.dim(1) != in_ch) throw ShapeError("conv1d: bad input shape");
        const int n = x.dim(0), len = x.dim(2);
        const int rows = in_ch * ksize;
        ctx.n = n;
        ctx.len = len;
        ctx.x_col.resize(std::size_t(rows) * std::size_t(n) * std::size_t(len));

#pragma omp parallel for schedule(static)
        for (int ni = 0; ni < n; ++ni)
            for (int t = 0; t < len; ++t) {
                T* col = ctx.x_col.data() + (std::size_t(ni) * len + t) * rows;
                for (int c = 0; c < in_ch; ++c) {
                    const T* xc = x.data.data() + (std::size_t(ni) * in_ch + c) * len;
                    for (int dk = 0; dk < ksize; ++dk) {
                        const int s = t - pad + dk;
                        col[c * ksize + dk] = (s >= 0 && s < len) ? xc[s] : T(0);
                    }
                }
            }

        std::vector<T> y_mat(std::size_t(out_ch) * std::size_t(n) * std::size_t(len));
        detail::matmul_wx(w.data.data(), out_ch, rows, ctx.x_col.data(), n * len, y_mat.data());

        TensorT<T> y({n, out_ch, len});
#pragma omp parallel for schedule(static)
        for (int ni = 0; ni < n; ++ni)
            for (int t = 0; t < len; ++t) {
                const T* src = y_mat.data() + (std::size_t(ni) * len + t) * out_ch;
                for (int co = 0; co < out_ch; ++co)
                    y.data[(std::size_t(ni) * out_ch + co) * len + t] = src[co] + b.data[std::size_t(co)];
            }
        return y;
    }

    TensorT<T> backward(const Ctx& ctx, const TensorT<T>& dy) {
        const int n = ctx.n, len = ctx.len;
        const int rows = in_ch * ksize;

        std::vector<T> dy_mat(std::size_t(out_ch) * std::size_t(n) * std::size_t(len));
#pragma omp parallel for schedule(static)
        for (int ni = 0; ni < n; ++ni)
            for (int t = 0; t < len; ++t) {
                T* dst = dy_mat.data() + (std::size_t(ni) * len + t) * out_ch;
                for (int co = 0; co < out_ch; ++co)
                    dst[co] = dy.data[(std::size_t(ni) * out_ch + co) * len + t];
            }

#pragma omp parallel for schedule(static)
        for (int co = 0; co < out_ch; ++co) {
            T acc = T(0);
            for (int ni = 0; ni < n; ++ni) {
                const T* row = dy.data.data() + (std::size_t(ni) * out_ch + co) * len;
                for (int t = 0; t < len; ++t) acc += row[t];
            }
            b.grad[std::size_t(co)] += acc;
        }

        detail::matmul_dyxt_acc(dy_mat.data(), out_ch, ctx.x_col.data(), rows, n * len,
                                w.grad.data());

        std::vector<T> dx_col(std::size_t(rows) * std::size_t(n) * std::size_t(len));
        detail::matmul_wtx(w.data.data(), out_ch, rows, dy_mat.data(), n * len, dx_col.data());

        TensorT<T> dx({n, in_ch, len});
#pragma omp parallel for schedule(static)
        for (int ni = 0; ni < n; ++ni)
            for (int t = 0; t < len; ++t) {
                const T* col = dx_col.data() + (std::size_t(ni) * len + t) * rows;
                for (int c = 0; c < in_ch; ++c) {
                    T* xc = dx.data.data() + (std::size_t(ni) * in_ch + c) * len;
                    for (int dk = 0; dk < ksize; ++dk) {
                        const int s = t - pad + dk;
                        if (s >= 0 && s < len) xc[s] += col[c * ksize + dk];
                    }
                }
            }
        return dx;
    }
};

// ---------------------------------------------------------------------------

// Works on [N, C, L] or [N, C]; statistics are taken over N and L. Training
// mode normalizes with biased batch variance and tracks running statistics
// (momentum 0.1, unbiased variance), eval mode uses the running values.
template <typename T>
struct BatchNorm1d {
    int channels = 0;
    T momentum = T(0.1);
    T eps = T(1e-5);
    TensorT<T> gamma, beta;
    std::vector<T> running_mean, running_var;

    struct Ctx {
        int n = 0, len = 0;
        bool training = true;
        std::vector<T> xhat;
        std::vector<T> invstd;  // per channel
    };

    void init(int c) {
        channels = c;
        gamma = TensorT<T>({c});
        beta = TensorT<T>({c});
        std::fill(gamma.data.begin(), gamma.data.end(), T(1));
        gamma.set_requires_grad();
        beta.set_requires_grad();
        running_mean.assign(std::size_t(c), T(0));
        running_var.assign(std::size_t(c), T(1));
    }

    TensorT<T> forward(const TensorT<T>& x, Ctx& ctx, bool training, bool record = true) {
        const bool flat = x.ndim() == 2;
        if ((flat && x.dim(1) != channels) || (!flat && (x.ndim() != 3 || x.dim(1) != channels)))
            throw ShapeError("batchnorm1d: bad input shape");
        const int n = x.dim(0);
        const int len = flat ? 1 : x.dim(2);
        const std::int64_t m = std::int64_t(n) * len;
        ctx.n = n;
        ctx.len = len;
        ctx.training = training;
        if (record) ctx.xhat.resize(x.data.size());
        ctx.invstd.resize(std::size_t(channels));

        TensorT<T> y(x.shape);
#pragma omp parallel for schedule(static)
        for (int c = 0; c < channels; ++c) {
            T mean, var;
            if (training) {
                T sum = T(0);
                for (int ni = 0; ni < n; ++ni) {
                    const T* xc = x.data.data() + (std::size_t(ni) * channels + c) * len;
                    for (int t = 0; t < len; ++t) sum += xc[t];
                }
                mean = sum / T(m);
                T sq = T(0);
                for (int ni = 0; ni < n; ++ni) {
                    const T* xc = x.data.data() + (std::size_t(ni) * channels + c) * len;
                    for (int t = 0; t < len; ++t) {
                        const T d = xc[t] - mean;
                        sq += d * d;
                    }
                }
                var = sq / T(m);
                const T unbiased = m > 1 ? sq / T(m - 1) : var;
                running_mean[std::size_t(c)] =
                    (T(1) - momentum) * running_mean[std::size_t(c)] + momentum * mean;
                running_var[std::size_t(c)] =
                    (T(1) - momentum) * running_var[std::size_t(c)] + momentum * unbiased;
            } else {
                mean = running_mean[std::size_t(c)];
                var = running_var[std::size_t(c)];
            }
            const T invstd = T(1) / std::sqrt(var + eps);
            ctx.invstd[std::size_t(c)] = invstd;
            const T g = gamma.data[std::size_t(c)];
            const T bt = beta.data[std::size_t(c)];
            for (int ni = 0; ni < n; ++ni) {
                const std::size_t base = (std::size_t(ni) * channels + c) * len;
                if (record)
                    for (int t = 0; t < len; ++t) {
                        const T xh = (x.data[base + t] - mean) * invstd;
                        ctx.xhat[base + t] = xh;
                        y.data[base + t] = g * xh + bt;
                    }
                else
                    for (int t = 0; t < len; ++t)
                        y.data[base + t] = g * (x.data[base + t] - mean) * invstd + bt;
            }
        }
        return y;
    }

    TensorT<T> backward(const Ctx& ctx, const TensorT<T>& dy) {
        const int n = ctx.n, len = ctx.len;
        const std::int64_t m = std::int64_t(n) * len;
        TensorT<T> dx(dy.shape);
#pragma omp parallel for schedule(static)
        for (int c = 0; c < channels; ++c) {
            T sum_dy = T(0), sum_dy_xh = T(0);
            for (int ni = 0; ni < n; ++ni) {
                const std::size_t base = (std::size_t(ni) * channels + c) * len;
                for (int t = 0; t < len; ++t) {
                    sum_dy += dy.data[base + t];
                    sum_dy_xh += dy.data[base + t] * ctx.xhat[base + t];
                }
            }
            gamma.grad[std::size_t(c)] += sum_dy_xh;
            beta.grad[std::size_t(c)] += sum_dy;
            const T g = gamma.data[std::size_t(c)];
            const T invstd = ctx.invstd[std::size_t(c)];
            if (ctx.training) {
                const T scale = g * invstd / T(m);
                for (int ni = 0; ni < n; ++ni) {
                    const std::size_t base = (std::size_t(ni) * channels + c) * len;
                    for (int t = 0; t < len; ++t)
                        dx.data[base + t] = scale * (T(m) * dy.data[base + t] - sum_dy -
                                                     ctx.xhat[base + t] * sum_dy_xh);
                }
            } else {
                for (int ni = 0; ni < n; ++ni) {
                    const std::size_t base = (std::size_t(ni) * channels + c) * len;
                    for (int t = 0; t < len; ++t) dx.data[base + t] = g * invstd * dy.data[base + t];
                }
            }
        }
        return dx;
    }
};

// ---------------------------------------------------------------------------

template <typename T>
struct ReLU {
    struct Ctx {
        std::vector<std::uint8_t> mask;
    };

    TensorT<T> forward(const TensorT<T>& x, Ctx& ctx, bool record = true) const {
        TensorT<T> y(x.shape);
        if (record) {
            ctx.mask.resize(x.data.size());
            for (std::size_t i = 0; i < x.data.size(); ++i) {
                const bool pos = x.data[i] > T(0);
                ctx.mask[i] = pos;
                y.data[i] = pos ? x.data[i] : T(0);
            }
        } else {
            for (std::size_t i = 0; i < x.data.size(); ++i)
                y.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
        }
        return y;
    }

    TensorT<T> backward(const Ctx& ctx, const TensorT<T>& dy) const {
        TensorT<T> dx(dy.shape);
        for (std::size_t i = 0; i < dy.data.size(); ++i)
            dx.data[i] = ctx.mask[i] ? dy.data[i] : T(0);
        return dx;
    }
};

// ---------------------------------------------------------------------------

template <typename T>
struct MaxPool1d {
    int kernel = 2;

    struct Ctx {
        int n = 0, ch = 0, lin = 0, lout = 0;
        std::vector<int> argmax;
    };

    TensorT<T> forward(const TensorT<T>& x, Ctx& ctx, bool record = true) const {
        if (x.ndim() != 3) throw ShapeError("maxpool1d: expects [N, C, L]");
        const int n = x.dim(0), ch = x.dim(1), lin = x.dim(2);
        const int lout = lin / kernel;
        if (lout < 1) throw ShapeError("maxpool1d: input shorter than kernel");
        ctx.n = n;
        ctx.ch = ch;
        ctx.lin = lin;
        ctx.lout = lout;
        if (record) ctx.argmax.resize(std::size_t(n) * ch * std::size_t(lout));
        TensorT<T> y({n, ch, lout});
#pragma omp parallel for schedule(static)
        for (int ni = 0; ni < n; ++ni)
            for (int c = 0; c < ch; ++c) {
                const T* xc = x.data.data() + (std::size_t(ni) * ch + c) * lin;
                const std::size_t obase = (std::size_t(ni) * ch + c) * lout;
                for (int t = 0; t < lout; ++t) {
                    int best = t * kernel;
                    for (int dk = 1; dk < kernel; ++dk)
                        if (xc[t * kernel + dk] > xc[best]) best = t * kernel + dk;
                    if (record) ctx.argmax[obase + t] = best;
                    y.data[obase + t] = xc[best];
                }
            }
        return y;
    }

    TensorT<T> backward(const Ctx& ctx, const TensorT<T>& dy) const {
        TensorT<T> dx({ctx.n, ctx.ch, ctx.lin});
#pragma omp parallel for schedule(static)
        for (int ni = 0; ni < ctx.n; ++ni)
            for (int c = 0; c < ctx.ch; ++c) {
                const std::size_t obase = (std::size_t(ni) * ctx.ch + c) * ctx.lout;
                const std::size_t ibase = (std::size_t(ni) * ctx.ch + c) * ctx.lin;
                for (int t = 0; t < ctx.lout; ++t)
                    dx.data[ibase + std::size_t(ctx.argmax[obase + t])] += dy.data[obase + t];
            }
        return dx;
    }
};

// ---------------------------------------------------------------------------

// Adaptive average pooling to length 1, flattened to [N, C].
template <typename T>
struct GlobalAvgPool1d {
    struct Ctx {
        int n = 0, ch = 0, len = 0;
    };

    TensorT<T> forward(const TensorT<T>& x, Ctx& ctx) const {
        if (x.ndim() != 3) throw ShapeError("avgpool: expects [N, C, L]");
        ctx.n = x.dim(0);
        ctx.ch = x.dim(1);
        ctx.len = x.dim(2);
        TensorT<T> y({ctx.n, ctx.ch});
        for (int ni = 0; ni < ctx.n; ++ni)
            for (int c = 0; c < ctx.ch; ++c) {
                const T* xc = x.data.data() + (std::size_t(ni) * ctx.ch + c) * ctx.len;
                T acc = T(0);
                for (int t = 0; t < ctx.len; ++t) acc += xc[t];
                y.data[std::size_t(ni) * ctx.ch + c] = acc / T(ctx.len);
            }
        return y;
    }

    TensorT<T> backward(const Ctx& ctx, const TensorT<T>& dy) const {
        TensorT<T> dx({ctx.n, ctx.ch, ctx.len});
        for (int ni = 0; ni < ctx.n; ++ni)
            for (int c = 0; c < ctx.ch; ++c) {
                const T g = dy.data[std::size_t(ni) * ctx.ch + c] / T(ctx.len);
                T* xc = dx.data.data() + (std::size_t(ni) * ctx.ch + c) * ctx.len;
                for (int t = 0; t < ctx.len; ++t) xc[t] = g;
            }
        return dx;
    }
};

// ---------------------------------------------------------------------------

template <typename T>
struct Linear {
    int in_f = 0, out_f = 0;
    TensorT<T> w;  // [out, in]
    TensorT<T> b;  // [out]

    struct Ctx {
        int n = 0;
        std::vector<T> x;
    };

    void init(int in_features, int out_features, Rng& rng) {
        in_f = in_features;
        out_f = out_features;
        w = TensorT<T>({out_f, in_f});
        b = TensorT<T>({out_f});
        kaiming_uniform(w, in_f, rng);
        w.set_requires_grad();
        b.set_requires_grad();
    }

    TensorT<T> forward(const TensorT<T>& x, Ctx& ctx, bool record = true) const {
        if (x.ndim() != 2 || x.dim(1) != in_f) throw ShapeError("linear: bad input shape");
        const int n = x.dim(0);
        ctx.n = n;
        if (record) ctx.x = x.data;
        TensorT<T> y({n, out_f});
        // row-major [N, in] is column-major [in, N]
        detail::matmul_wx(w.data.data(), out_f, in_f, x.data.data(), n, y.data.data());
        for (int ni = 0; ni < n; ++ni)
            for (int o = 0; o < out_f; ++o) y.data[std::size_t(ni) * out_f + o] += b.data[std::size_t(o)];
        return y;
    }

    TensorT<T> backward(const Ctx& ctx, const TensorT<T>& dy) {
        const int n = ctx.n;
        for (int o = 0; o < out_f; ++o) {
            T acc = T(0);
            for (int ni = 0; ni < n; ++ni) acc += dy.data[std::size_t(ni) * out_f + o];
            b.grad[std::size_t(o)] += acc;
        }
        detail::matmul_dyxt_acc(dy.data.data(), out_f, ctx.x.data(), in_f, n, w.grad.data());
        TensorT<T> dx({n, in_f});
        detail::matmul_wtx(w.data.data(), out_f, in_f, dy.data.data(), n, dx.data.data());
        return dx;
    }
};

// ---------------------------------------------------------------------------

// Row-wise x / max(||x||2, 1e-12) on [N, D].
template <typename T>
struct L2Normalize {
    static constexpr double kEps = 1e-12;

    struct Ctx {
        int n = 0, d = 0;
        std::vector<T> y;
        std::vector<T> norm;  // clamped
        std::vector<std::uint8_t> clamped;
    };

    TensorT<T> forward(const TensorT<T>& x, Ctx& ctx, bool record = true) const {
        if (x.ndim() != 2) throw ShapeError("l2_normalize: expects [N, D]");
        const int n = x.dim(0), d = x.dim(1);
        ctx.n = n;
        ctx.d = d;
        ctx.norm.resize(std::size_t(n));
        ctx.clamped.resize(std::size_t(n));
        TensorT<T> y({n, d});
        for (int ni = 0; ni < n; ++ni) {
            const T* xr = x.data.data() + std::size_t(ni) * d;
            T sq = T(0);
            for (int i = 0; i < d; ++i) sq += xr[i] * xr[i];
            const T nrm = std::sqrt(sq);
            const bool cl = !(nrm > T(kEps));
            const T denom = cl ? T(kEps) : nrm;
            ctx.norm[std::size_t(ni)] = denom;
            ctx.clamped[std::size_t(ni)] = cl;
            T* yr = y.data.data() + std::size_t(ni) * d;
            for (int i = 0; i < d; ++i) yr[i] = xr[i] / denom;
        }
        if (record) ctx.y = y.data;
        return y;
    }

    TensorT<T> backward(const Ctx& ctx, const TensorT<T>& dy) const {
        TensorT<T> dx({ctx.n, ctx.d});
        for (int ni = 0; ni < ctx.n; ++ni) {
            const std::size_t base = std::size_t(ni) * ctx.d;
            const T denom = ctx.norm[std::size_t(ni)];
            if (ctx.clamped[std::size_t(ni)]) {
                for (int i = 0; i < ctx.d; ++i) dx.data[base + i] = dy.data[base + i] / denom;
                continue;
            }
            T dot = T(0);
            for (int i = 0; i < ctx.d; ++i) dot += ctx.y[base + i] * dy.data[base + i];
            for (int i = 0; i < ctx.d; ++i)
                dx.data[base + i] = (dy.data[base + i] - ctx.y[base + i] * dot) / denom;
        }
        return dx;
    }
};

// ---------------------------------------------------------------------------
// Backbone: four conv blocks (conv k=3 pad=1 -> batchnorm -> relu ->
// maxpool 2), adaptive average pooling, flatten, L2 normalization.
// ---------------------------------------------------------------------------

struct BackboneConfig {
    int in_channels = 2;
    std::vector<int> widths{64, 160, 320, 512};
    int kernel = 3;
    int pool = 2;
    int input_len = 260;

    int embed_dim() const { return widths.back(); }
    std::int64_t param_count() const;
    // fp32 bytes of the backbone parameters
    std::int64_t param_bytes() const { return 4 * param_count(); }
    void validate() const;
};

template <typename T>
struct ConvBlock {
    Conv1d<T> conv;
    BatchNorm1d<T> bn;
    ReLU<T> relu;
    MaxPool1d<T> pool;

    struct Ctx {
        typename Conv1d<T>::Ctx conv;
        typename BatchNorm1d<T>::Ctx bn;
        typename ReLU<T>::Ctx relu;
        typename MaxPool1d<T>::Ctx pool;
    };

    TensorT<T> forward(const TensorT<T>& x, Ctx& ctx, bool training, bool record = true) {
        auto y = conv.forward(x, ctx.conv);
        y = bn.forward(y, ctx.bn, training, record);
        y = relu.forward(y, ctx.relu, record);
        return pool.forward(y, ctx.pool, record);
    }

    TensorT<T> backward(Ctx& ctx, const TensorT<T>& dy) {
        auto g = pool.backward(ctx.pool, dy);
        g = relu.backward(ctx.relu, g);
        g = bn.backward(ctx.bn, g);
        return conv.backward(ctx.conv, g);
    }
};

template <typename T>
struct Backbone {
    BackboneConfig cfg;
    std::vector<ConvBlock<T>> blocks;
    GlobalAvgPool1d<T> avg;
    L2Normalize<T> l2;

    struct Ctx {
        std::vector<typename ConvBlock<T>::Ctx> blocks;
        typename GlobalAvgPool1d<T>::Ctx avg;
        typename L2Normalize<T>::Ctx l2;
    };

    void init(Rng& rng) {
        cfg.validate();
        blocks.assign(cfg.widths.size(), {});
        int in_c = cfg.in_channels;
        for (std::size_t i = 0; i < cfg.widths.size(); ++i) {
            blocks[i].conv.init(in_c, cfg.widths[i], cfg.kernel, rng);
            blocks[i].bn.init(cfg.widths[i]);
            blocks[i].pool.kernel = cfg.pool;
            in_c = cfg.widths[i];
        }
    }

    TensorT<T> forward(const TensorT<T>& x, Ctx& ctx, bool training, bool record = true) {
        ctx.blocks.resize(blocks.size());
        TensorT<T> h = x;
        for (std::size_t i = 0; i < blocks.size(); ++i)
            h = blocks[i].forward(h, ctx.blocks[i], training, record);
        h = avg.forward(h, ctx.avg);
        return l2.forward(h, ctx.l2, record);
    }

    TensorT<T> backward(Ctx& ctx, const TensorT<T>& dy) {
        TensorT<T> g = l2.backward(ctx.l2, dy);
        g = avg.backward(ctx.avg, g);
        for (std::size_t i = blocks.size(); i-- > 0;) g = blocks[i].backward(ctx.blocks[i], g);
        return g;
    }
};

// ---------------------------------------------------------------------------
// SimSiam heads and the fine-tune classifier. The projection output is
// L2-normalized so encoder rows always have unit norm; the cosine loss is
// scale-invariant so this does not change the objective.
// ---------------------------------------------------------------------------

template <typename T>
struct ProjectionMlp {
    Linear<T> lin1;
    BatchNorm1d<T> bn1;
    ReLU<T> relu;
    Linear<T> lin2;
    BatchNorm1d<T> bn2;
    L2Normalize<T> l2;

    struct Ctx {
        typename Linear<T>::Ctx lin1, lin2;
        typename BatchNorm1d<T>::Ctx bn1, bn2;
        typename ReLU<T>::Ctx relu;
        typename L2Normalize<T>::Ctx l2;
    };

    void init(int dim, Rng& rng) {
        lin1.init(dim, dim, rng);
        bn1.init(dim);
        lin2.init(dim, dim, rng);
        bn2.init(dim);
    }

    TensorT<T> forward(const TensorT<T>& x, Ctx& ctx, bool training, bool record = true) {
        auto y = lin1.forward(x, ctx.lin1, record);
        y = bn1.forward(y, ctx.bn1, training, record);
        y = relu.forward(y, ctx.relu, record);
        y = lin2.forward(y, ctx.lin2, record);
        y = bn2.forward(y, ctx.bn2, training, record);
        return l2.forward(y, ctx.l2, record);
    }

    TensorT<T> backward(Ctx& ctx, const TensorT<T>& dy) {
        auto g = l2.backward(ctx.l2, dy);
        g = bn2.backward(ctx.bn2, g);
        g = lin2.backward(ctx.lin2, g);
        g = relu.backward(ctx.relu, g);
        g = bn1.backward(ctx.bn1, g);
        return lin1.backward(ctx.lin1, g);
    }
};

template <typename T>
struct PredictionMlp {
    Linear<T> lin1;
    BatchNorm1d<T> bn1;
    ReLU<T> relu;
    Linear<T> lin2;

    struct Ctx {
        typename Linear<T>::Ctx lin1, lin2;
        typename BatchNorm1d<T>::Ctx bn1;
        typename ReLU<T>::Ctx relu;
    };

    void init(int dim, int bottleneck, Rng& rng) {
        lin1.init(dim, bottleneck, rng);
        bn1.init(bottleneck);
        lin2.init(bottleneck, dim, rng);
        // Output bias starts away from zero: a batch row whose bottleneck
        // units are all relu-dead would otherwise have an exactly zero
        // predictor output, and Eq. 10 rejects zero-norm rows.
        const double bound = 1.0 / std::sqrt(double(bottleneck));
        for (auto& v : lin2.b.data) v = T(rng.uniform(-bound, bound));
    }

    TensorT<T> forward(const TensorT<T>& x, Ctx& ctx, bool training, bool record = true) {
        auto y = lin1.forward(x, ctx.lin1, record);
        y = bn1.forward(y, ctx.bn1, training, record);
        y = relu.forward(y, ctx.relu, record);
        return lin2.forward(y, ctx.lin2, record);
    }

    TensorT<T> backward(Ctx& ctx, const TensorT<T>& dy) {
        auto g = lin2.backward(ctx.lin2, dy);
        g = relu.backward(ctx.relu, g);
        g = bn1.backward(ctx.bn1, g);
        return lin1.backward(ctx.lin1, g);
    }
};

template <typename T>
struct ClassifierHead {
    Linear<T> lin1;
    ReLU<T> relu;
    Linear<T> lin2;

    struct Ctx {
        typename Linear<T>::Ctx lin1, lin2;
        typename ReLU<T>::Ctx relu;
    };

    void init(int dim, int hidden, int classes, Rng& rng) {
        lin1.init(dim, hidden, rng);
        lin2.init(hidden, classes, rng);
    }

    TensorT<T> forward(const TensorT<T>& x, Ctx& ctx, bool record = true) {
        auto y = lin1.forward(x, ctx.lin1, record);
        y = relu.forward(y, ctx.relu, record);
        return lin2.forward(y, ctx.lin2, record);
    }

    TensorT<T> backward(Ctx& ctx, const TensorT<T>& dy) {
        auto g = lin2.backward(ctx.lin2, dy);
        g = relu.backward(ctx.relu, g);
        return lin1.backward(ctx.lin1, g);
    }
};

// ---------------------------------------------------------------------------

inline constexpr int kPredictorBottleneckDiv = 4;  // SimSiam 1/4 bottleneck
inline constexpr int kClassifierHidden = 128;

template <typename T>
struct ModelT {
    BackboneConfig cfg;
    int num_classes = 0;  // 0 = no classifier head
    bool with_heads = false;

    Backbone<T> backbone;
    std::optional<ProjectionMlp<T>> projection;
    std::optional<PredictionMlp<T>> prediction;
    std::optional<ClassifierHead<T>> classifier;

    struct EncoderCtx {
        typename Backbone<T>::Ctx bb;
        typename ProjectionMlp<T>::Ctx proj;
    };

    static ModelT make_simsiam(const BackboneConfig& cfg, std::uint64_t seed) {
        ModelT m;
        m.cfg = cfg;
        m.with_heads = true;
        Rng rng(seed);
        m.backbone.cfg = cfg;
        m.backbone.init(rng);
        m.projection.emplace();
        m.projection->init(cfg.embed_dim(), rng);
        m.prediction.emplace();
        m.prediction->init(cfg.embed_dim(), cfg.embed_dim() / kPredictorBottleneckDiv, rng);
        return m;
    }

    static ModelT make_classifier(const BackboneConfig& cfg, int classes, std::uint64_t seed) {
        ModelT m;
        m.cfg = cfg;
        m.num_classes = classes;
        Rng rng(seed);
        m.backbone.cfg = cfg;
        m.backbone.init(rng);
        m.classifier.emplace();
        m.classifier->init(cfg.embed_dim(), kClassifierHidden, classes, rng);
        return m;
    }

    // Adds a freshly initialized classifier head (fine-tuning entry).
    void attach_classifier(int classes, std::uint64_t seed) {
        Rng rng(seed);
        num_classes = classes;
        classifier.emplace();
        classifier->init(cfg.embed_dim(), kClassifierHidden, classes, rng);
    }

    // Backbone features: [N, 2, 260] -> [N, D], unit rows. record=false
    // skips the backward caches (inference).
    TensorT<T> forward_features(const TensorT<T>& x, typename Backbone<T>::Ctx& ctx,
                                bool training, bool record = true) {
        return backbone.forward(x, ctx, training, record);
    }

    // SimSiam encoder f(.): backbone + projection MLP, unit rows.
    TensorT<T> forward_encoder(const TensorT<T>& x, EncoderCtx& ctx, bool training,
                               bool record = true) {
        auto feats = backbone.forward(x, ctx.bb, training, record);
        return projection->forward(feats, ctx.proj, training, record);
    }

    TensorT<T> forward_predictor(const TensorT<T>& z, typename PredictionMlp<T>::Ctx& ctx,
                                 bool training, bool record = true) {
        return prediction->forward(z, ctx, training, record);
    }

    TensorT<T> forward_classifier(const TensorT<T>& feats, typename ClassifierHead<T>::Ctx& ctx,
                                  bool record = true) {
        return classifier->forward(feats, ctx, record);
    }

    // Fixed iteration order; defines checkpoint layout and optimizer slots.
    void for_each_param(const std::function<void(const std::string&, TensorT<T>&)>& fn) {
        for (std::size_t i = 0; i < backbone.blocks.size(); ++i) {
            const std::string p = "backbone.block" + std::to_string(i) + ".";
            fn(p + "conv.w", backbone.blocks[i].conv.w);
            fn(p + "conv.b", backbone.blocks[i].conv.b);
            fn(p + "bn.gamma", backbone.blocks[i].bn.gamma);
            fn(p + "bn.beta", backbone.blocks[i].bn.beta);
        }
        if (projection) {
            fn("projection.lin1.w", projection->lin1.w);
            fn("projection.lin1.b", projection->lin1.b);
            fn("projection.bn1.gamma", projection->bn1.gamma);
            fn("projection.bn1.beta", projection->bn1.beta);
            fn("projection.lin2.w", projection->lin2.w);
            fn("projection.lin2.b", projection->lin2.b);
            fn("projection.bn2.gamma", projection->bn2.gamma);
            fn("projection.bn2.beta", projection->bn2.beta);
        }
        if (prediction) {
            fn("prediction.lin1.w", prediction->lin1.w);
            fn("prediction.lin1.b", prediction->lin1.b);
            fn("prediction.bn1.gamma", prediction->bn1.gamma);
            fn("prediction.bn1.beta", prediction->bn1.beta);
            fn("prediction.lin2.w", prediction->lin2.w);
            fn("prediction.lin2.b", prediction->lin2.b);
        }
        if (classifier) {
            fn("classifier.lin1.w", classifier->lin1.w);
            fn("classifier.lin1.b", classifier->lin1.b);
            fn("classifier.lin2.w", classifier->lin2.w);
            fn("classifier.lin2.b", classifier->lin2.b);
        }
    }

    // Non-trainable state (batchnorm running statistics).
    void for_each_buffer(const std::function<void(const std::string&, std::vector<T>&)>& fn) {
        for (std::size_t i = 0; i < backbone.blocks.size(); ++i) {
            const std::string p = "backbone.block" + std::to_string(i) + ".bn.";
            fn(p + "running_mean", backbone.blocks[i].bn.running_mean);
            fn(p + "running_var", backbone.blocks[i].bn.running_var);
        }
        if (projection) {
            fn("projection.bn1.running_mean", projection->bn1.running_mean);
            fn("projection.bn1.running_var", projection->bn1.running_var);
            fn("projection.bn2.running_mean", projection->bn2.running_mean);
            fn("projection.bn2.running_var", projection->bn2.running_var);
        }
        if (prediction) {
            fn("prediction.bn1.running_mean", prediction->bn1.running_mean);
            fn("prediction.bn1.running_var", prediction->bn1.running_var);
        }
    }

    void zero_grad() {
        std::vector<TensorT<T>*> params;
        for_each_param([&](const std::string&, TensorT<T>& p) { params.push_back(&p); });
#pragma omp parallel for schedule(dynamic, 1)
        for (std::int64_t i = 0; i < std::int64_t(params.size()); ++i)
            params[std::size_t(i)]->zero_grad();
    }

    std::int64_t param_count() {
        std::int64_t n = 0;
        for_each_param([&](const std::string&, TensorT<T>& p) { n += p.numel(); });
        return n;
    }
};

using Model = ModelT<float>;

// ---------------------------------------------------------------------------

// Standard bias-corrected Adam; per-slot lr scale implements the layer-wise
// fine-tuning rate.
template <typename T>
struct Adam {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::int64_t t = 0;

    struct Slot {
        TensorT<T>* param = nullptr;
        std::string name;
        double lr_scale = 1.0;
        std::vector<T> m, v;
    };
    std::vector<Slot> slots;

    void attach(ModelT<T>& model, const std::function<double(const std::string&)>& scale_of) {
        slots.clear();
        model.for_each_param([&](const std::string& name, TensorT<T>& p) {
            Slot s;
            s.param = &p;
            s.name = name;
            s.lr_scale = scale_of(name);
            s.m.assign(p.data.size(), T(0));
            s.v.assign(p.data.size(), T(0));
            slots.push_back(std::move(s));
        });
    }

    void attach(ModelT<T>& model) {
        attach(model, [](const std::string&) { return 1.0; });
    }

    void step(double lr) {
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, double(t));
        const double bc2 = 1.0 - std::pow(beta2, double(t));
        bool bad_grad = false;
        // slots are disjoint, so the parallel update stays deterministic
#pragma omp parallel for schedule(dynamic, 1)
        for (std::int64_t si = 0; si < std::int64_t(slots.size()); ++si) {
            auto& s = slots[std::size_t(si)];
            const T step_lr = T(lr * s.lr_scale);
            for (std::size_t i = 0; i < s.param->data.size(); ++i) {
                const T g = s.param->grad[i];
                if (!std::isfinite(double(g))) {
#pragma omp atomic write
                    bad_grad = true;
                    break;
                }
                s.m[i] = T(beta1) * s.m[i] + T(1.0 - beta1) * g;
                s.v[i] = T(beta2) * s.v[i] + T(1.0 - beta2) * g * g;
                const T mhat = s.m[i] / T(bc1);
                const T vhat = s.v[i] / T(bc2);
                s.param->data[i] -= step_lr * mhat / (std::sqrt(vhat) + T(eps));
            }
        }
        if (bad_grad) throw NumericError("adam: non-finite gradient");
    }
};

// lr_min + 0.5 (lr_max - lr_min) (1 + cos(pi epoch / total))
double cosine_lr(int epoch, int total_epochs, double lr_max = 1e-3, double lr_min = 1e-4);

}  // namespace rff
