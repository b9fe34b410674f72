#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "ros/errors.hpp"
#include "ros/losses.hpp"  // Mat/Vec aliases
#include "ros/rng.hpp"

namespace ros {

/// One trainable tensor. `row_lr_mult` / `col_lr_mult`, when nonempty,
/// scale the update of individual rows/columns (used for the unknown-class
/// row of the stage-two head and its bias entry).
template <typename T>
struct Param {
    std::string name;
    Mat<T> value;
    Mat<T> grad;
    T lr_mult = T(1);
    bool trainable = true;
    std::vector<T> row_lr_mult;
    std::vector<T> col_lr_mult;

    void init_zero(Eigen::Index rows, Eigen::Index cols, const std::string& n) {
        name = n;
        value = Mat<T>::Zero(rows, cols);
        grad = Mat<T>::Zero(rows, cols);
    }
    void zero_grad() { grad.setZero(); }
};

/// Kaiming-style normal init, deterministic in the caller-provided rng.
template <typename T>
void init_kaiming(Param<T>& p, int fan_in, Rng& rng) {
    double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (Eigen::Index r = 0; r < p.value.rows(); ++r)
        for (Eigen::Index c = 0; c < p.value.cols(); ++c)
            p.value(r, c) = static_cast<T>(rng.normal(0.0, stddev));
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

template <typename T>
struct Linear {
    Param<T> weight;  // (out, in)
    Param<T> bias;    // (1, out)

    void init(int in_dim, int out_dim, const std::string& name, Rng& rng) {
        weight.init_zero(out_dim, in_dim, name + ".weight");
        bias.init_zero(1, out_dim, name + ".bias");
        init_kaiming(weight, in_dim, rng);
    }

    Mat<T> forward(const Mat<T>& x) const {
        if (x.cols() != weight.value.cols())
            throw ShapeError(weight.name + ": input width " + std::to_string(x.cols()) +
                             " != " + std::to_string(weight.value.cols()));
        Mat<T> y = x * weight.value.transpose();
        y.rowwise() += bias.value.row(0);
        return y;
    }

    /// Accumulates parameter grads; returns grad wrt the input.
    Mat<T> backward(const Mat<T>& x, const Mat<T>& dy) {
        weight.grad.noalias() += dy.transpose() * x;
        bias.grad.row(0) += dy.colwise().sum();
        return dy * weight.value;
    }
};

// ---------------------------------------------------------------------------
// Batch normalization (shared core for the 1-d and per-channel 2-d cases)
// ---------------------------------------------------------------------------

template <typename T>
struct BatchNorm {
    Param<T> gamma, beta;
    Mat<T> running_mean, running_var;  // (1, C)
    T momentum = T(0.1);
    T eps = T(1e-5);

    struct Ctx {
        Mat<T> x_hat;       // normalized input, same layout as x
        Vec<T> inv_std;     // per channel
        Eigen::Index group_width = 1;
    };

    void init(int channels, const std::string& name) {
        gamma.init_zero(1, channels, name + ".gamma");
        gamma.value.setOnes();
        beta.init_zero(1, channels, name + ".beta");
        running_mean = Mat<T>::Zero(1, channels);
        running_var = Mat<T>::Ones(1, channels);
    }

    int channels() const { return static_cast<int>(gamma.value.cols()); }

    /// x has channels laid out as contiguous column blocks of `group_width`
    /// (group_width == 1 reduces to ordinary 1-d batch norm).
    Mat<T> forward(const Mat<T>& x, Eigen::Index group_width, bool train, Ctx* ctx) {
        const int C = channels();
        if (x.cols() != static_cast<Eigen::Index>(C) * group_width)
            throw ShapeError(gamma.name + ": input width mismatch");
        Mat<T> y(x.rows(), x.cols());
        Vec<T> inv_std(C);
        Mat<T> x_hat(x.rows(), x.cols());
        const T m = static_cast<T>(x.rows() * group_width);
        for (int c = 0; c < C; ++c) {
            auto xin = x.middleCols(static_cast<Eigen::Index>(c) * group_width, group_width);
            T mean, var;
            if (train) {
                mean = xin.mean();
                var = (xin.array() - mean).square().sum() / m;
                running_mean(0, c) = (T(1) - momentum) * running_mean(0, c) + momentum * mean;
                T unbiased = m > T(1) ? var * m / (m - T(1)) : var;
                running_var(0, c) = (T(1) - momentum) * running_var(0, c) + momentum * unbiased;
            } else {
                mean = running_mean(0, c);
                var = running_var(0, c);
            }
            T istd = T(1) / std::sqrt(var + eps);
            inv_std(c) = istd;
            auto xh = x_hat.middleCols(static_cast<Eigen::Index>(c) * group_width, group_width);
            xh = (xin.array() - mean).matrix() * istd;
            y.middleCols(static_cast<Eigen::Index>(c) * group_width, group_width) =
                xh * gamma.value(0, c);
            y.middleCols(static_cast<Eigen::Index>(c) * group_width, group_width).array() +=
                beta.value(0, c);
        }
        if (ctx) {
            ctx->x_hat = std::move(x_hat);
            ctx->inv_std = std::move(inv_std);
            ctx->group_width = group_width;
        }
        return y;
    }

    Mat<T> backward(const Ctx& ctx, const Mat<T>& dy) {
        const int C = channels();
        const Eigen::Index gw = ctx.group_width;
        Mat<T> dx(dy.rows(), dy.cols());
        const T m = static_cast<T>(dy.rows() * gw);
        for (int c = 0; c < C; ++c) {
            auto dyb = dy.middleCols(static_cast<Eigen::Index>(c) * gw, gw);
            auto xhb = ctx.x_hat.middleCols(static_cast<Eigen::Index>(c) * gw, gw);
            T sum_dy = dyb.sum();
            T sum_dy_xhat = (dyb.array() * xhb.array()).sum();
            beta.grad(0, c) += sum_dy;
            gamma.grad(0, c) += sum_dy_xhat;
            T scale = gamma.value(0, c) * ctx.inv_std(c);
            dx.middleCols(static_cast<Eigen::Index>(c) * gw, gw) =
                (dyb.array() - sum_dy / m - xhb.array() * (sum_dy_xhat / m)).matrix() * scale;
        }
        return dx;
    }
};

// ---------------------------------------------------------------------------
// Leaky rectifier
// ---------------------------------------------------------------------------

template <typename T>
inline Mat<T> leaky_relu(const Mat<T>& x, T slope) {
    return x.array().max(x.array() * slope).matrix();
}

template <typename T>
inline Mat<T> leaky_relu_backward(const Mat<T>& x, const Mat<T>& dy, T slope) {
    return (x.array() > T(0)).select(dy, dy * slope);
}

// ---------------------------------------------------------------------------
// 3x3 same-padding convolution on (N, C*H*W)-packed activations
// ---------------------------------------------------------------------------

template <typename T>
struct Conv3x3 {
    Param<T> weight;  // (out_ch, in_ch*9)
    Param<T> bias;    // (1, out_ch)
    int in_ch = 0, out_ch = 0;

    void init(int in_channels, int out_channels, const std::string& name, Rng& rng) {
        in_ch = in_channels;
        out_ch = out_channels;
        weight.init_zero(out_channels, in_channels * 9, name + ".weight");
        bias.init_zero(1, out_channels, name + ".bias");
        init_kaiming(weight, in_channels * 9, rng);
    }

    struct Ctx {
        Mat<T> cols;  // (in_ch*9, N*H*W) column buffer shared by the batch
        int n = 0, h = 0, w = 0;
    };

    /// One GEMM over the whole batch: weight * im2col(batch).
    Mat<T> forward(const Mat<T>& x, int h, int w, Ctx* ctx) const {
        const int n = static_cast<int>(x.rows());
        if (x.cols() != static_cast<Eigen::Index>(in_ch) * h * w)
            throw ShapeError(weight.name + ": input shape mismatch");
        Mat<T> cols = im2col(x, h, w);
        Mat<T> prod = weight.value * cols;          // (out_ch, N*H*W)
        Mat<T> y(n, static_cast<Eigen::Index>(out_ch) * h * w);
        const Eigen::Index hw = static_cast<Eigen::Index>(h) * w;
        for (int s = 0; s < n; ++s)
            for (int oc = 0; oc < out_ch; ++oc)
                y.row(s).segment(static_cast<Eigen::Index>(oc) * hw, hw) =
                    (prod.row(oc).segment(static_cast<Eigen::Index>(s) * hw, hw).array() +
                     bias.value(0, oc))
                        .matrix();
        if (ctx) {
            ctx->cols = std::move(cols);
            ctx->n = n;
            ctx->h = h;
            ctx->w = w;
        }
        return y;
    }

    Mat<T> backward(const Ctx& ctx, const Mat<T>& dy) {
        const int n = ctx.n, h = ctx.h, w = ctx.w;
        const Eigen::Index hw = static_cast<Eigen::Index>(h) * w;
        // regroup dy into (out_ch, N*H*W) to mirror the forward product
        Mat<T> dprod(out_ch, static_cast<Eigen::Index>(n) * hw);
        for (int s = 0; s < n; ++s)
            for (int oc = 0; oc < out_ch; ++oc)
                dprod.row(oc).segment(static_cast<Eigen::Index>(s) * hw, hw) =
                    dy.row(s).segment(static_cast<Eigen::Index>(oc) * hw, hw);
        weight.grad.noalias() += dprod * ctx.cols.transpose();
        for (int oc = 0; oc < out_ch; ++oc) bias.grad(0, oc) += dprod.row(oc).sum();
        Mat<T> dcols = weight.value.transpose() * dprod;  // (in_ch*9, N*H*W)
        return col2im(dcols, n, h, w);
    }

private:
    Mat<T> im2col(const Mat<T>& x, int h, int w) const {
        const int n = static_cast<int>(x.rows());
        const Eigen::Index hw = static_cast<Eigen::Index>(h) * w;
        Mat<T> cols = Mat<T>::Zero(static_cast<Eigen::Index>(in_ch) * 9, n * hw);
        for (int s = 0; s < n; ++s) {
            const T* xs = x.data() + static_cast<std::size_t>(s) * x.cols();
            for (int ic = 0; ic < in_ch; ++ic) {
                const T* plane = xs + static_cast<std::size_t>(ic) * hw;
                for (int ky = 0; ky < 3; ++ky) {
                    for (int kx = 0; kx < 3; ++kx) {
                        Eigen::Index row = (static_cast<Eigen::Index>(ic) * 9) + ky * 3 + kx;
                        T* dst = cols.data() + static_cast<std::size_t>(row) * cols.cols() +
                                 static_cast<std::size_t>(s) * hw;
                        for (int y = 0; y < h; ++y) {
                            int sy = y + ky - 1;
                            if (sy < 0 || sy >= h) continue;
                            int x0 = std::max(0, 1 - kx), x1 = std::min(w, w + 1 - kx);
                            for (int px = x0; px < x1; ++px)
                                dst[static_cast<std::size_t>(y) * w + px] =
                                    plane[static_cast<std::size_t>(sy) * w + px + kx - 1];
                        }
                    }
                }
            }
        }
        return cols;
    }

    Mat<T> col2im(const Mat<T>& dcols, int n, int h, int w) const {
        const Eigen::Index hw = static_cast<Eigen::Index>(h) * w;
        Mat<T> dx = Mat<T>::Zero(n, static_cast<Eigen::Index>(in_ch) * hw);
        for (int s = 0; s < n; ++s) {
            T* xs = dx.data() + static_cast<std::size_t>(s) * dx.cols();
            for (int ic = 0; ic < in_ch; ++ic) {
                T* plane = xs + static_cast<std::size_t>(ic) * hw;
                for (int ky = 0; ky < 3; ++ky) {
                    for (int kx = 0; kx < 3; ++kx) {
                        Eigen::Index row = (static_cast<Eigen::Index>(ic) * 9) + ky * 3 + kx;
                        const T* src = dcols.data() +
                                       static_cast<std::size_t>(row) * dcols.cols() +
                                       static_cast<std::size_t>(s) * hw;
                        for (int y = 0; y < h; ++y) {
                            int sy = y + ky - 1;
                            if (sy < 0 || sy >= h) continue;
                            int x0 = std::max(0, 1 - kx), x1 = std::min(w, w + 1 - kx);
                            for (int px = x0; px < x1; ++px)
                                plane[static_cast<std::size_t>(sy) * w + px + kx - 1] +=
                                    src[static_cast<std::size_t>(y) * w + px];
                        }
                    }
                }
            }
        }
        return dx;
    }
};

// ---------------------------------------------------------------------------
// 2x2 max pooling (stride 2, floor) and global average pooling
// ---------------------------------------------------------------------------

template <typename T>
struct MaxPool2 {
    struct Ctx {
        std::vector<Eigen::Index> argmax;  // flat index into the input row
        int n = 0, c = 0, h_in = 0, w_in = 0;
    };

    static Mat<T> forward(const Mat<T>& x, int c, int h, int w, Ctx* ctx) {
        const int n = static_cast<int>(x.rows());
        const int ho = h / 2, wo = w / 2;
        Mat<T> y(n, static_cast<Eigen::Index>(c) * ho * wo);
        if (ctx) {
            ctx->argmax.assign(static_cast<std::size_t>(n) * c * ho * wo, 0);
            ctx->n = n;
            ctx->c = c;
            ctx->h_in = h;
            ctx->w_in = w;
        }
        for (int s = 0; s < n; ++s) {
            for (int ch = 0; ch < c; ++ch) {
                const Eigen::Index in_base = static_cast<Eigen::Index>(ch) * h * w;
                const Eigen::Index out_base = static_cast<Eigen::Index>(ch) * ho * wo;
                for (int y0 = 0; y0 < ho; ++y0)
                    for (int x0 = 0; x0 < wo; ++x0) {
                        Eigen::Index best = in_base + (2 * y0) * w + 2 * x0;
                        T bv = x(s, best);
                        for (int dy = 0; dy < 2; ++dy)
                            for (int dx = 0; dx < 2; ++dx) {
                                Eigen::Index idx = in_base + (2 * y0 + dy) * w + 2 * x0 + dx;
                                if (x(s, idx) > bv) {
                                    bv = x(s, idx);
                                    best = idx;
                                }
                            }
                        Eigen::Index out_idx = out_base + static_cast<Eigen::Index>(y0) * wo + x0;
                        y(s, out_idx) = bv;
                        if (ctx)
                            ctx->argmax[static_cast<std::size_t>(s) * c * ho * wo + out_idx] = best;
                    }
            }
        }
        return y;
    }

    static Mat<T> backward(const Ctx& ctx, const Mat<T>& dy) {
        Mat<T> dx = Mat<T>::Zero(ctx.n, static_cast<Eigen::Index>(ctx.c) * ctx.h_in * ctx.w_in);
        const Eigen::Index per_row = dy.cols();
        for (int s = 0; s < ctx.n; ++s)
            for (Eigen::Index i = 0; i < per_row; ++i)
                dx(s, ctx.argmax[static_cast<std::size_t>(s) * per_row + i]) += dy(s, i);
        return dx;
    }
};

template <typename T>
inline Mat<T> global_avg_pool(const Mat<T>& x, int c, int hw) {
    Mat<T> y(x.rows(), c);
    for (Eigen::Index s = 0; s < x.rows(); ++s)
        for (int ch = 0; ch < c; ++ch)
            y(s, ch) = x.row(s).segment(static_cast<Eigen::Index>(ch) * hw, hw).mean();
    return y;
}

template <typename T>
inline Mat<T> global_avg_pool_backward(const Mat<T>& dy, int c, int hw) {
    Mat<T> dx(dy.rows(), static_cast<Eigen::Index>(c) * hw);
    for (Eigen::Index s = 0; s < dy.rows(); ++s)
        for (int ch = 0; ch < c; ++ch)
            dx.row(s)
                .segment(static_cast<Eigen::Index>(ch) * hw, hw)
                .setConstant(dy(s, ch) / static_cast<T>(hw));
    return dx;
}

}  // namespace ros
