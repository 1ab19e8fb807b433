#pragma once

// Data-parallel kernels behind the tensor graph. Each kernel parallelizes
// over independent output elements only, so results are identical for any
// thread count. elgen::kernels::ref holds naive serial implementations used
// by the unit tests and the kernel benchmark as the ground truth.

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace elgen::kernels {

// ---------------------------------------------------------------------------
// GEMM: C = A(m x k) * B(k x n), optional transposes, C preallocated.
// ---------------------------------------------------------------------------
template <class T>
void gemm(bool ta, bool tb, int m, int n, int k, const T* A, const T* B, T* C) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        T* crow = C + static_cast<int64_t>(i) * n;
        for (int j = 0; j < n; ++j) crow[j] = T(0);
        for (int l = 0; l < k; ++l) {
            const T a = ta ? A[static_cast<int64_t>(l) * m + i] : A[static_cast<int64_t>(i) * k + l];
            if (tb) {
                for (int j = 0; j < n; ++j) crow[j] += a * B[static_cast<int64_t>(j) * k + l];
            } else {
                const T* brow = B + static_cast<int64_t>(l) * n;
                for (int j = 0; j < n; ++j) crow[j] += a * brow[j];
            }
        }
    }
}

// C += A * B (no transposes); used for gradient accumulation paths.
template <class T>
void gemm_acc(bool ta, bool tb, int m, int n, int k, const T* A, const T* B, T* C) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        T* crow = C + static_cast<int64_t>(i) * n;
        for (int l = 0; l < k; ++l) {
            const T a = ta ? A[static_cast<int64_t>(l) * m + i] : A[static_cast<int64_t>(i) * k + l];
            if (tb) {
                for (int j = 0; j < n; ++j) crow[j] += a * B[static_cast<int64_t>(j) * k + l];
            } else {
                const T* brow = B + static_cast<int64_t>(l) * n;
                for (int j = 0; j < n; ++j) crow[j] += a * brow[j];
            }
        }
    }
}

// ---------------------------------------------------------------------------
// 2-D convolution, square kernel, zero padding. x: [ic, ih, iw],
// w: [oc, ic, kh, kw], b: [oc] or nullptr, y: [oc, oh, ow].
// ---------------------------------------------------------------------------
inline int conv_out_dim(int in, int kernel, int stride, int pad) {
    return (in + 2 * pad - kernel) / stride + 1;
}

template <class T>
void conv2d_fwd(const T* x, int ic, int ih, int iw, const T* w, const T* b, int oc, int kh,
                int kw, int stride, int pad, T* y) {
    const int oh = conv_out_dim(ih, kh, stride, pad);
    const int ow = conv_out_dim(iw, kw, stride, pad);
#pragma omp parallel for collapse(2) schedule(static)
    for (int o = 0; o < oc; ++o) {
        for (int oy = 0; oy < oh; ++oy) {
            T* yrow = y + (static_cast<int64_t>(o) * oh + oy) * ow;
            const T bias = b ? b[o] : T(0);
            for (int ox = 0; ox < ow; ++ox) yrow[ox] = bias;
            for (int c = 0; c < ic; ++c) {
                const T* wbase = w + ((static_cast<int64_t>(o) * ic + c) * kh) * kw;
                for (int ky = 0; ky < kh; ++ky) {
                    const int sy = oy * stride + ky - pad;
                    if (sy < 0 || sy >= ih) continue;
                    const T* xrow = x + (static_cast<int64_t>(c) * ih + sy) * iw;
                    const T* wrow = wbase + static_cast<int64_t>(ky) * kw;
                    for (int kx = 0; kx < kw; ++kx) {
                        const T wv = wrow[kx];
                        const int x0 = kx - pad;
                        int lo = 0, hi = ow;
                        // valid output columns: 0 <= ox*stride + x0 < iw
                        while (lo < hi && lo * stride + x0 < 0) ++lo;
                        while (hi > lo && (hi - 1) * stride + x0 >= iw) --hi;
                        for (int ox = lo; ox < hi; ++ox) yrow[ox] += wv * xrow[ox * stride + x0];
                    }
                }
            }
        }
    }
}

// dx: [ic, ih, iw] accumulated from dy: [oc, oh, ow].
template <class T>
void conv2d_bwd_input(const T* dy, int oc, int oh, int ow, const T* w, int ic, int kh, int kw,
                      int stride, int pad, int ih, int iw, T* dx) {
#pragma omp parallel for schedule(static)
    for (int c = 0; c < ic; ++c) {
        T* dxc = dx + static_cast<int64_t>(c) * ih * iw;
        for (int64_t i = 0; i < static_cast<int64_t>(ih) * iw; ++i) dxc[i] = T(0);
        for (int o = 0; o < oc; ++o) {
            const T* dyo = dy + static_cast<int64_t>(o) * oh * ow;
            const T* wbase = w + ((static_cast<int64_t>(o) * ic + c) * kh) * kw;
            for (int oy = 0; oy < oh; ++oy) {
                for (int ky = 0; ky < kh; ++ky) {
                    const int sy = oy * stride + ky - pad;
                    if (sy < 0 || sy >= ih) continue;
                    T* dxrow = dxc + static_cast<int64_t>(sy) * iw;
                    const T* dyrow = dyo + static_cast<int64_t>(oy) * ow;
                    const T* wrow = wbase + static_cast<int64_t>(ky) * kw;
                    for (int kx = 0; kx < kw; ++kx) {
                        const T wv = wrow[kx];
                        const int x0 = kx - pad;
                        int lo = 0, hi = ow;
                        while (lo < hi && lo * stride + x0 < 0) ++lo;
                        while (hi > lo && (hi - 1) * stride + x0 >= iw) --hi;
                        for (int ox = lo; ox < hi; ++ox) dxrow[ox * stride + x0] += wv * dyrow[ox];
                    }
                }
            }
        }
    }
}

// dw: [oc, ic, kh, kw], db: [oc] (either may be nullptr); both accumulated (+=).
template <class T>
void conv2d_bwd_weight(const T* x, int ic, int ih, int iw, const T* dy, int oc, int oh, int ow,
                       int kh, int kw, int stride, int pad, T* dw, T* db) {
#pragma omp parallel for schedule(static)
    for (int o = 0; o < oc; ++o) {
        const T* dyo = dy + static_cast<int64_t>(o) * oh * ow;
        if (db) {
            T s = T(0);
            for (int64_t i = 0; i < static_cast<int64_t>(oh) * ow; ++i) s += dyo[i];
            db[o] += s;
        }
        if (!dw) continue;
        for (int c = 0; c < ic; ++c) {
            const T* xc = x + static_cast<int64_t>(c) * ih * iw;
            T* wbase = dw + ((static_cast<int64_t>(o) * ic + c) * kh) * kw;
            for (int ky = 0; ky < kh; ++ky) {
                for (int kx = 0; kx < kw; ++kx) {
                    T s = T(0);
                    for (int oy = 0; oy < oh; ++oy) {
                        const int sy = oy * stride + ky - pad;
                        if (sy < 0 || sy >= ih) continue;
                        const T* xrow = xc + static_cast<int64_t>(sy) * iw;
                        const T* dyrow = dyo + static_cast<int64_t>(oy) * ow;
                        const int x0 = kx - pad;
                        int lo = 0, hi = ow;
                        while (lo < hi && lo * stride + x0 < 0) ++lo;
                        while (hi > lo && (hi - 1) * stride + x0 >= iw) --hi;
                        for (int ox = lo; ox < hi; ++ox) s += dyrow[ox] * xrow[ox * stride + x0];
                    }
                    wbase[static_cast<int64_t>(ky) * kw + kx] += s;
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Row-wise softmax over [rows, cols]; max-shifted for stability.
// ---------------------------------------------------------------------------
template <class T>
void softmax_rows(const T* x, int rows, int cols, T* y) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        const T* xr = x + static_cast<int64_t>(r) * cols;
        T* yr = y + static_cast<int64_t>(r) * cols;
        T mx = xr[0];
        for (int c = 1; c < cols; ++c) mx = std::max(mx, xr[c]);
        T sum = T(0);
        for (int c = 0; c < cols; ++c) {
            yr[c] = std::exp(xr[c] - mx);
            sum += yr[c];
        }
        const T inv = T(1) / sum;
        for (int c = 0; c < cols; ++c) yr[c] *= inv;
    }
}

// dx from y = softmax(x): dx = y * (dy - sum(dy * y)).
template <class T>
void softmax_rows_bwd(const T* y, const T* dy, int rows, int cols, T* dx) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        const T* yr = y + static_cast<int64_t>(r) * cols;
        const T* dyr = dy + static_cast<int64_t>(r) * cols;
        T* dxr = dx + static_cast<int64_t>(r) * cols;
        T dot = T(0);
        for (int c = 0; c < cols; ++c) dot += dyr[c] * yr[c];
        for (int c = 0; c < cols; ++c) dxr[c] = yr[c] * (dyr[c] - dot);
    }
}

// ---------------------------------------------------------------------------
// GroupNorm over [C, H, W]; per-group mean/rstd saved for backward.
// ---------------------------------------------------------------------------
template <class T>
void group_norm_fwd(const T* x, int C, int H, int W, int groups, const T* gamma, const T* beta,
                    T eps, T* y, T* save_mean, T* save_rstd) {
    const int cpg = C / groups;
    const int64_t hw = static_cast<int64_t>(H) * W;
#pragma omp parallel for schedule(static)
    for (int g = 0; g < groups; ++g) {
        const T* xg = x + static_cast<int64_t>(g) * cpg * hw;
        T mean = T(0);
        for (int64_t i = 0; i < cpg * hw; ++i) mean += xg[i];
        mean /= static_cast<T>(cpg * hw);
        T var = T(0);
        for (int64_t i = 0; i < cpg * hw; ++i) {
            const T d = xg[i] - mean;
            var += d * d;
        }
        var /= static_cast<T>(cpg * hw);
        const T rstd = T(1) / std::sqrt(var + eps);
        save_mean[g] = mean;
        save_rstd[g] = rstd;
        for (int cc = 0; cc < cpg; ++cc) {
            const int c = g * cpg + cc;
            const T gm = gamma[c], bt = beta[c];
            const T* xr = x + static_cast<int64_t>(c) * hw;
            T* yr = y + static_cast<int64_t>(c) * hw;
            for (int64_t i = 0; i < hw; ++i) yr[i] = (xr[i] - mean) * rstd * gm + bt;
        }
    }
}

template <class T>
void group_norm_bwd(const T* x, const T* dy, int C, int H, int W, int groups, const T* gamma,
                    const T* save_mean, const T* save_rstd, T* dx, T* dgamma, T* dbeta) {
    const int cpg = C / groups;
    const int64_t hw = static_cast<int64_t>(H) * W;
#pragma omp parallel for schedule(static)
    for (int g = 0; g < groups; ++g) {
        const T mean = save_mean[g];
        const T rstd = save_rstd[g];
        const T n = static_cast<T>(cpg * hw);
        // dgamma/dbeta per channel; group statistics for dx.
        T sum_dyg = T(0);   // sum(dy * gamma)
        T sum_dygx = T(0);  // sum(dy * gamma * xhat)
        for (int cc = 0; cc < cpg; ++cc) {
            const int c = g * cpg + cc;
            const T* xr = x + static_cast<int64_t>(c) * hw;
            const T* dyr = dy + static_cast<int64_t>(c) * hw;
            T dg = T(0), db = T(0);
            for (int64_t i = 0; i < hw; ++i) {
                const T xhat = (xr[i] - mean) * rstd;
                dg += dyr[i] * xhat;
                db += dyr[i];
                sum_dyg += dyr[i] * gamma[c];
                sum_dygx += dyr[i] * gamma[c] * xhat;
            }
            if (dgamma) dgamma[c] += dg;
            if (dbeta) dbeta[c] += db;
        }
        for (int cc = 0; cc < cpg; ++cc) {
            const int c = g * cpg + cc;
            const T* xr = x + static_cast<int64_t>(c) * hw;
            const T* dyr = dy + static_cast<int64_t>(c) * hw;
            T* dxr = dx + static_cast<int64_t>(c) * hw;
            for (int64_t i = 0; i < hw; ++i) {
                const T xhat = (xr[i] - mean) * rstd;
                dxr[i] = rstd * (dyr[i] * gamma[c] - sum_dyg / n - xhat * sum_dygx / n);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// SiLU: x * sigmoid(x).
// ---------------------------------------------------------------------------
template <class T>
void silu_fwd(const T* x, int64_t n, T* y) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        const T s = T(1) / (T(1) + std::exp(-x[i]));
        y[i] = x[i] * s;
    }
}

template <class T>
void silu_bwd(const T* x, const T* dy, int64_t n, T* dx) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        const T s = T(1) / (T(1) + std::exp(-x[i]));
        dx[i] = dy[i] * (s + x[i] * s * (T(1) - s));
    }
}

// ---------------------------------------------------------------------------
// Nearest-neighbour 2x upsample over [C, H, W].
// ---------------------------------------------------------------------------
template <class T>
void upsample2_fwd(const T* x, int C, int H, int W, T* y) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int c = 0; c < C; ++c) {
        for (int oy = 0; oy < 2 * H; ++oy) {
            const T* xrow = x + (static_cast<int64_t>(c) * H + oy / 2) * W;
            T* yrow = y + (static_cast<int64_t>(c) * 2 * H + oy) * 2 * W;
            for (int ox = 0; ox < 2 * W; ++ox) yrow[ox] = xrow[ox / 2];
        }
    }
}

template <class T>
void upsample2_bwd(const T* dy, int C, int H, int W, T* dx) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int c = 0; c < C; ++c) {
        for (int iy = 0; iy < H; ++iy) {
            T* dxrow = dx + (static_cast<int64_t>(c) * H + iy) * W;
            for (int ix = 0; ix < W; ++ix) {
                T s = T(0);
                for (int dy2 = 0; dy2 < 2; ++dy2) {
                    const T* dyrow = dy + (static_cast<int64_t>(c) * 2 * H + 2 * iy + dy2) * 2 * W;
                    s += dyrow[2 * ix] + dyrow[2 * ix + 1];
                }
                dxrow[ix] = s;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Bilinear resize of a single-channel [h, w] image to [oh, ow].
// Corner-aligned sampling on pixel centers, clamped at borders.
// ---------------------------------------------------------------------------
template <class T>
void resize_bilinear(const T* x, int h, int w, T* y, int oh, int ow) {
    const double sy = static_cast<double>(h) / oh;
    const double sx = static_cast<double>(w) / ow;
#pragma omp parallel for schedule(static)
    for (int oy = 0; oy < oh; ++oy) {
        const double fy = (oy + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        const double wy = fy - y0;
        const int y1 = std::min(std::max(y0 + 1, 0), h - 1);
        y0 = std::min(std::max(y0, 0), h - 1);
        for (int ox = 0; ox < ow; ++ox) {
            const double fx = (ox + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            const double wx = fx - x0;
            const int x1 = std::min(std::max(x0 + 1, 0), w - 1);
            x0 = std::min(std::max(x0, 0), w - 1);
            const double v0 = (1.0 - wx) * x[static_cast<int64_t>(y0) * w + x0] +
                              wx * x[static_cast<int64_t>(y0) * w + x1];
            const double v1 = (1.0 - wx) * x[static_cast<int64_t>(y1) * w + x0] +
                              wx * x[static_cast<int64_t>(y1) * w + x1];
            y[static_cast<int64_t>(oy) * ow + ox] = static_cast<T>((1.0 - wy) * v0 + wy * v1);
        }
    }
}

}  // namespace elgen::kernels

// ---------------------------------------------------------------------------
// Serial reference implementations: straight textbook loops, no pragmas,
// no column-range precomputation. Unit tests and the benchmark compare the
// parallel kernels against these.
// ---------------------------------------------------------------------------
namespace elgen::kernels::ref {

template <class T>
void gemm(bool ta, bool tb, int m, int n, int k, const T* A, const T* B, T* C) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            T s = T(0);
            for (int l = 0; l < k; ++l) {
                const T a = ta ? A[static_cast<int64_t>(l) * m + i]
                               : A[static_cast<int64_t>(i) * k + l];
                const T b = tb ? B[static_cast<int64_t>(j) * k + l]
                               : B[static_cast<int64_t>(l) * n + j];
                s += a * b;
            }
            C[static_cast<int64_t>(i) * n + j] = s;
        }
    }
}

template <class T>
void conv2d_fwd(const T* x, int ic, int ih, int iw, const T* w, const T* b, int oc, int kh,
                int kw, int stride, int pad, T* y) {
    const int oh = conv_out_dim(ih, kh, stride, pad);
    const int ow = conv_out_dim(iw, kw, stride, pad);
    for (int o = 0; o < oc; ++o) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                T s = b ? b[o] : T(0);
                for (int c = 0; c < ic; ++c) {
                    for (int ky = 0; ky < kh; ++ky) {
                        for (int kx = 0; kx < kw; ++kx) {
                            const int sy = oy * stride + ky - pad;
                            const int sx = ox * stride + kx - pad;
                            if (sy < 0 || sy >= ih || sx < 0 || sx >= iw) continue;
                            s += x[(static_cast<int64_t>(c) * ih + sy) * iw + sx] *
                                 w[((static_cast<int64_t>(o) * ic + c) * kh + ky) * kw + kx];
                        }
                    }
                }
                y[(static_cast<int64_t>(o) * oh + oy) * ow + ox] = s;
            }
        }
    }
}

template <class T>
void softmax_rows(const T* x, int rows, int cols, T* y) {
    for (int r = 0; r < rows; ++r) {
        const T* xr = x + static_cast<int64_t>(r) * cols;
        T* yr = y + static_cast<int64_t>(r) * cols;
        T mx = xr[0];
        for (int c = 1; c < cols; ++c) mx = std::max(mx, xr[c]);
        T sum = T(0);
        for (int c = 0; c < cols; ++c) {
            yr[c] = std::exp(xr[c] - mx);
            sum += yr[c];
        }
        for (int c = 0; c < cols; ++c) yr[c] /= sum;
    }
}

template <class T>
void group_norm_fwd(const T* x, int C, int H, int W, int groups, const T* gamma, const T* beta,
                    T eps, T* y) {
    const int cpg = C / groups;
    const int64_t hw = static_cast<int64_t>(H) * W;
    for (int g = 0; g < groups; ++g) {
        const T* xg = x + static_cast<int64_t>(g) * cpg * hw;
        T mean = T(0), var = T(0);
        for (int64_t i = 0; i < cpg * hw; ++i) mean += xg[i];
        mean /= static_cast<T>(cpg * hw);
        for (int64_t i = 0; i < cpg * hw; ++i) var += (xg[i] - mean) * (xg[i] - mean);
        var /= static_cast<T>(cpg * hw);
        const T rstd = T(1) / std::sqrt(var + eps);
        for (int cc = 0; cc < cpg; ++cc) {
            const int c = g * cpg + cc;
            for (int64_t i = 0; i < hw; ++i) {
                y[static_cast<int64_t>(c) * hw + i] =
                    (x[static_cast<int64_t>(c) * hw + i] - mean) * rstd * gamma[c] + beta[c];
            }
        }
    }
}

template <class T>
void upsample2_fwd(const T* x, int C, int H, int W, T* y) {
    for (int c = 0; c < C; ++c)
        for (int oy = 0; oy < 2 * H; ++oy)
            for (int ox = 0; ox < 2 * W; ++ox)
                y[(static_cast<int64_t>(c) * 2 * H + oy) * 2 * W + ox] =
                    x[(static_cast<int64_t>(c) * H + oy / 2) * W + ox / 2];
}

}  // namespace elgen::kernels::ref
