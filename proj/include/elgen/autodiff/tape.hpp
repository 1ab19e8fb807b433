#pragma once

// Reverse-mode autodiff over small dense tensors. A Tape records one forward
// pass; creation order is the topological order, so backward() is a single
// reverse sweep. Values of leaves may alias external storage (parameters,
// inputs) to avoid copies; gradients are owned by the tape.

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "elgen/core/tensor.hpp"
#include "elgen/kernels/kernels.hpp"

namespace elgen {

template <class T>
class Tape {
public:
    using Id = int;
    static constexpr Id none = -1;

    struct Node {
        Tensor<T> value;            // owned value (unused when external)
        const Tensor<T>* external = nullptr;
        Tensor<T> grad;
        bool requires_grad = false;
        std::function<void()> back;  // empty for leaves / no-grad nodes
    };

    Id leaf(Tensor<T> v, bool requires_grad = false) {
        Node n;
        n.value = std::move(v);
        n.requires_grad = requires_grad;
        nodes_.push_back(std::move(n));
        return static_cast<Id>(nodes_.size() - 1);
    }

    // Leaf whose value lives outside the tape; must outlive the tape.
    Id leaf_ref(const Tensor<T>* v, bool requires_grad = false) {
        Node n;
        n.external = v;
        n.requires_grad = requires_grad;
        nodes_.push_back(std::move(n));
        return static_cast<Id>(nodes_.size() - 1);
    }

    const Tensor<T>& val(Id id) const {
        const Node& n = nodes_[static_cast<size_t>(id)];
        return n.external ? *n.external : n.value;
    }

    Tensor<T>& grad(Id id) { return nodes_[static_cast<size_t>(id)].grad; }
    bool requires_grad(Id id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }
    size_t size() const { return nodes_.size(); }

    void clear() { nodes_.clear(); }

    // Backward from a scalar root (seed 1).
    void backward(Id root) {
        Tensor<T> seed({1}, T(1));
        backward_seed(root, seed);
    }

    // Backward from any node with an explicit seed of the same shape.
    void backward_seed(Id root, const Tensor<T>& seed) {
        prepare_grads();
        Tensor<T>& g = grad(root);
        for (int64_t i = 0; i < g.numel(); ++i) g[i] += seed[i];
        for (Id id = static_cast<Id>(nodes_.size()) - 1; id >= 0; --id) {
            Node& n = nodes_[static_cast<size_t>(id)];
            if (n.requires_grad && n.back) n.back();
        }
    }

    // ---- elementwise -------------------------------------------------------

    Id add(Id a, Id b) {
        Tensor<T> out = val(a);
        const Tensor<T>& vb = val(b);
        for (int64_t i = 0; i < out.numel(); ++i) out[i] += vb[i];
        return unary_or_binary(std::move(out), a, b, [this](Id a2, Id b2, Id o) {
            accumulate(a2, grad(o));
            accumulate(b2, grad(o));
        });
    }

    Id sub(Id a, Id b) {
        Tensor<T> out = val(a);
        const Tensor<T>& vb = val(b);
        for (int64_t i = 0; i < out.numel(); ++i) out[i] -= vb[i];
        return unary_or_binary(std::move(out), a, b, [this](Id a2, Id b2, Id o) {
            accumulate(a2, grad(o));
            accumulate_neg(b2, grad(o));
        });
    }

    Id mul(Id a, Id b) {
        Tensor<T> out = val(a);
        const Tensor<T>& vb = val(b);
        for (int64_t i = 0; i < out.numel(); ++i) out[i] *= vb[i];
        Id o = push(std::move(out), requires_grad(a) || requires_grad(b));
        if (nodes_.back().requires_grad) {
            nodes_.back().back = [this, a, b, o] {
                const Tensor<T>& go = grad(o);
                if (requires_grad(a)) {
                    Tensor<T>& ga = grad(a);
                    const Tensor<T>& vb2 = val(b);
                    for (int64_t i = 0; i < go.numel(); ++i) ga[i] += go[i] * vb2[i];
                }
                if (requires_grad(b)) {
                    Tensor<T>& gb = grad(b);
                    const Tensor<T>& va = val(a);
                    for (int64_t i = 0; i < go.numel(); ++i) gb[i] += go[i] * va[i];
                }
            };
        }
        return o;
    }

    Id scale(Id a, T s) {
        Tensor<T> out = val(a);
        for (int64_t i = 0; i < out.numel(); ++i) out[i] *= s;
        Id o = push(std::move(out), requires_grad(a));
        if (nodes_.back().requires_grad) {
            nodes_.back().back = [this, a, o, s] {
                Tensor<T>& ga = grad(a);
                const Tensor<T>& go = grad(o);
                for (int64_t i = 0; i < go.numel(); ++i) ga[i] += go[i] * s;
            };
        }
        return o;
    }

    Id lincomb(Id a, Id b, T ca, T cb) {
        const Tensor<T>& va = val(a);
        const Tensor<T>& vb = val(b);
        Tensor<T> out(va.shape);
        for (int64_t i = 0; i < out.numel(); ++i) out[i] = ca * va[i] + cb * vb[i];
        Id o = push(std::move(out), requires_grad(a) || requires_grad(b));
        if (nodes_.back().requires_grad) {
            nodes_.back().back = [this, a, b, o, ca, cb] {
                const Tensor<T>& go = grad(o);
                if (requires_grad(a)) {
                    Tensor<T>& ga = grad(a);
                    for (int64_t i = 0; i < go.numel(); ++i) ga[i] += ca * go[i];
                }
                if (requires_grad(b)) {
                    Tensor<T>& gb = grad(b);
                    for (int64_t i = 0; i < go.numel(); ++i) gb[i] += cb * go[i];
                }
            };
        }
        return o;
    }

    Id silu(Id a) {
        const Tensor<T>& va = val(a);
        Tensor<T> out(va.shape);
        kernels::silu_fwd(va.ptr(), va.numel(), out.ptr());
        Id o = push(std::move(out), requires_grad(a));
        if (nodes_.back().requires_grad) {
            nodes_.back().back = [this, a, o] {
                const Tensor<T>& va2 = val(a);
                const Tensor<T>& go = grad(o);
                Tensor<T> dx(va2.shape);
                kernels::silu_bwd(va2.ptr(), go.ptr(), va2.numel(), dx.ptr());
                accumulate(a, dx);
            };
        }
        return o;
    }

    // ---- linear algebra ----------------------------------------------------

    // a: [m, k] (or [k, m] with ta), b: [k, n] (or [n, k] with tb) -> [m, n].
    Id matmul(Id a, Id b, bool ta = false, bool tb = false) {
        const Tensor<T>& va = val(a);
        const Tensor<T>& vb = val(b);
        const int m = ta ? va.shape[1] : va.shape[0];
        const int k = ta ? va.shape[0] : va.shape[1];
        const int n = tb ? vb.shape[0] : vb.shape[1];
        Tensor<T> out({m, n});
        kernels::gemm(ta, tb, m, n, k, va.ptr(), vb.ptr(), out.ptr());
        Id o = push(std::move(out), requires_grad(a) || requires_grad(b));
        if (nodes_.back().requires_grad) {
            nodes_.back().back = [this, a, b, o, ta, tb, m, n, k] {
                const Tensor<T>& go = grad(o);
                if (requires_grad(a)) {
                    // dA = dC * B^T (layout depends on ta/tb)
                    Tensor<T>& ga = grad(a);
                    if (!ta) {
                        kernels::gemm_acc(false, !tb, m, k, n, go.ptr(), val(b).ptr(), ga.ptr());
                    } else {
                        kernels::gemm_acc(tb, true, k, m, n, val(b).ptr(), go.ptr(), ga.ptr());
                    }
                }
                if (requires_grad(b)) {
                    Tensor<T>& gb = grad(b);
                    if (!tb) {
                        kernels::gemm_acc(!ta, false, k, n, m, val(a).ptr(), go.ptr(), gb.ptr());
                    } else {
                        kernels::gemm_acc(true, ta, n, k, m, go.ptr(), val(a).ptr(), gb.ptr());
                    }
                }
            };
        }
        return o;
    }

    // x: [m, k], W: [k, n], b: [n] or none.
    Id linear(Id x, Id w, Id b = none) {
        Id y = matmul(x, w, false, false);
        if (b != none) y = add_row_bias(y, b);
        return y;
    }

    // x: [R, C] + bias[C] broadcast over rows.
    Id add_row_bias(Id x, Id b) {
        const Tensor<T>& vx = val(x);
        const Tensor<T>& vb = val(b);
        Tensor<T> out = vx;
        const int rows = vx.shape[0], cols = vx.shape[1];
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) out.at(r, c) += vb[c];
        Id o = push(std::move(out), requires_grad(x) || requires_grad(b));
        if (nodes_.back().requires_grad) {
            nodes_.back().back = [this, x, b, o, rows, cols] {
                const Tensor<T>& go = grad(o);
                if (requires_grad(x)) accumulate(x, go);
                if (requires_grad(b)) {
                    Tensor<T>& gb = grad(b);
                    for (int r = 0; r < rows; ++r)
                        for (int c = 0; c < cols; ++c) gb[c] += go.at(r, c);
                }
            };
        }
        return o;
    }

    // x: [C, H, W] + bias[C] broadcast over each channel plane.
    Id add_chan_bias(Id x, Id b) {
        const Tensor<T>& vx = val(x);
        const Tensor<T>& vb = val(b);
        Tensor<T> out = vx;
        const int C = vx.shape[0];
        const int64_t hw = static_cast<int64_t>(vx.shape[1]) * vx.shape[2];
        for (int c = 0; c < C; ++c)
            for (int64_t i = 0; i < hw; ++i) out[c * hw + i] += vb[c];
        Id o = push(std::move(out), requires_grad(x) || requires_grad(b));
        if (nodes_.back().requires_grad) {
            nodes_.back().back = [this, x, b, o, C, hw] {
                const Tensor<T>& go = grad(o);
                if (requires_grad(x)) accumulate(x, go);
                if (requires_grad(b)) {
                    Tensor<T>& gb = grad(b);
                    for (int c = 0; c < C; ++c) {
                        T s = T(0);
                        for (int64_t i = 0; i < hw; ++i) s += go[c * hw + i];
                        gb[c] += s;
                    }
                }
            };
        }
        return o;
    }

    // ---- convolution & friends ---------------------------------------------

    // x: [C, H, W], w: [OC, C, kh, kw], b: [OC] or none.
    Id conv2d(Id x, Id w, Id b, int stride, int pad) {
        const Tensor<T>& vx = val(x);
        const Tensor<T>& vw = val(w);
        const int ic = vx.shape[0], ih = vx.shape[1], iw_ = vx.shape[2];
        const int oc = vw.shape[0], kh = vw.shape[2], kw = vw.shape[3];
        const int oh = kernels::conv_out_dim(ih, kh, stride, pad);
        const int ow = kernels::conv_out_dim(iw_, kw, stride, pad);
        Tensor<T> out({oc, oh, ow});
        kernels::conv2d_fwd(vx.ptr(), ic, ih, iw_, vw.ptr(), b == none ? nullptr : val(b).ptr(),
                            oc, kh, kw, stride, pad, out.ptr());
        const bool rg = requires_grad(x) || requires_grad(w) || (b != none && requires_grad(b));
        Id o = push(std::move(out), rg);
        if (rg) {
            nodes_.back().back = [this, x, w, b, o, ic, ih, iw_, oc, kh, kw, stride, pad, oh,
                                  ow] {
                const Tensor<T>& go = grad(o);
                if (requires_grad(x)) {
                    Tensor<T> dx({ic, ih, iw_});
                    kernels::conv2d_bwd_input(go.ptr(), oc, oh, ow, val(w).ptr(), ic, kh, kw,
                                              stride, pad, ih, iw_, dx.ptr());
                    accumulate(x, dx);
                }
                const bool need_w = requires_grad(w);
                const bool need_b = b != none && requires_grad(b);
                if (need_w || need_b) {
                    kernels::conv2d_bwd_weight(val(x).ptr(), ic, ih, iw_, go.ptr(), oc, oh, ow,
                                               kh, kw, stride, pad,
                                               need_w ? grad(w).ptr() : nullptr,
                                               need_b ? grad(b).ptr() : nullptr);
                }
            };
        }
        return o;
    }

    Id group_norm(Id x, Id gamma, Id beta, int groups, T eps = T(1e-5)) {
        const Tensor<T>& vx = val(x);
        const int C = vx.shape[0], H = vx.shape[1], W = vx.shape[2];
        Tensor<T> out(vx.shape);
        auto mean = std::make_shared<Tensor<T>>(std::vector<int>{groups});
        auto rstd = std::make_shared<Tensor<T>>(std::vector<int>{groups});
        kernels::group_norm_fwd(vx.ptr(), C, H, W, groups, val(gamma).ptr(), val(beta).ptr(),
                                eps, out.ptr(), mean->ptr(), rstd->ptr());
        const bool rg = requires_grad(x) || requires_grad(gamma) || requires_grad(beta);
        Id o = push(std::move(out), rg);
        if (rg) {
            nodes_.back().back = [this, x, gamma, beta, o, C, H, W, groups, mean, rstd] {
                const Tensor<T>& go = grad(o);
                Tensor<T> dx({C, H, W});
                kernels::group_norm_bwd(val(x).ptr(), go.ptr(), C, H, W, groups,
                                        val(gamma).ptr(), mean->ptr(), rstd->ptr(), dx.ptr(),
                                        requires_grad(gamma) ? grad(gamma).ptr() : nullptr,
                                        requires_grad(beta) ? grad(beta).ptr() : nullptr);
                if (requires_grad(x)) accumulate(x, dx);
            };
        }
        return o;
    }

    Id softmax_rows(Id x) {
        const Tensor<T>& vx = val(x);
        const int rows = vx.shape[0], cols = vx.shape[1];
        Tensor<T> out(vx.shape);
        kernels::softmax_rows(vx.ptr(), rows, cols, out.ptr());
        Id o = push(std::move(out), requires_grad(x));
        if (nodes_.back().requires_grad) {
            nodes_.back().back = [this, x, o, rows, cols] {
                const Tensor<T>& vo = val(o);
                const Tensor<T>& go = grad(o);
                Tensor<T> dx({rows, cols});
                kernels::softmax_rows_bwd(vo.ptr(), go.ptr(), rows, cols, dx.ptr());
                accumulate(x, dx);
            };
        }
        return o;
    }

    Id upsample2(Id x) {
        const Tensor<T>& vx = val(x);
        const int C = vx.shape[0], H = vx.shape[1], W = vx.shape[2];
        Tensor<T> out({C, 2 * H, 2 * W});
        kernels::upsample2_fwd(vx.ptr(), C, H, W, out.ptr());
        Id o = push(std::move(out), requires_grad(x));
        if (nodes_.back().requires_grad) {
            nodes_.back().back = [this, x, o, C, H, W] {
                Tensor<T> dx({C, H, W});
                kernels::upsample2_bwd(grad(o).ptr(), C, H, W, dx.ptr());
                accumulate(x, dx);
            };
        }
        return o;
    }

    // ---- shape plumbing ------------------------------------------------------

    Id reshape(Id x, std::vector<int> shape) {
        Tensor<T> out = val(x).reshaped(std::move(shape));
        Id o = push(std::move(out), requires_grad(x));
        if (nodes_.back().requires_grad) {
            nodes_.back().back = [this, x, o] {
                const Tensor<T>& go = grad(o);
                Tensor<T>& gx = grad(x);
                for (int64_t i = 0; i < go.numel(); ++i) gx[i] += go[i];
            };
        }
        return o;
    }

    // [C, H, W] -> [H*W, C] (spatial-major token layout for attention).
    Id chw_to_sc(Id x) {
        const Tensor<T>& vx = val(x);
        const int C = vx.shape[0], H = vx.shape[1], W = vx.shape[2];
        const int S = H * W;
        Tensor<T> out({S, C});
        for (int c = 0; c < C; ++c)
            for (int s = 0; s < S; ++s) out.at(s, c) = vx[static_cast<int64_t>(c) * S + s];
        Id o = push(std::move(out), requires_grad(x));
        if (nodes_.back().requires_grad) {
            nodes_.back().back = [this, x, o, C, S] {
                const Tensor<T>& go = grad(o);
                Tensor<T>& gx = grad(x);
                for (int c = 0; c < C; ++c)
                    for (int s = 0; s < S; ++s) gx[static_cast<int64_t>(c) * S + s] += go.at(s, c);
            };
        }
        return o;
    }

    Id sc_to_chw(Id x, int C, int H, int W) {
        const Tensor<T>& vx = val(x);
        const int S = H * W;
        Tensor<T> out({C, H, W});
        for (int c = 0; c < C; ++c)
            for (int s = 0; s < S; ++s) out[static_cast<int64_t>(c) * S + s] = vx.at(s, c);
        Id o = push(std::move(out), requires_grad(x));
        if (nodes_.back().requires_grad) {
            nodes_.back().back = [this, x, o, C, S] {
                const Tensor<T>& go = grad(o);
                Tensor<T>& gx = grad(x);
                for (int c = 0; c < C; ++c)
                    for (int s = 0; s < S; ++s) gx.at(s, c) += go[static_cast<int64_t>(c) * S + s];
            };
        }
        return o;
    }

    Id concat_ch(Id a, Id b) {
        const Tensor<T>& va = val(a);
        const Tensor<T>& vb = val(b);
        const int Ca = va.shape[0], Cb = vb.shape[0], H = va.shape[1], W = va.shape[2];
        Tensor<T> out({Ca + Cb, H, W});
        std::copy(va.data.begin(), va.data.end(), out.data.begin());
        std::copy(vb.data.begin(), vb.data.end(), out.data.begin() + va.numel());
        Id o = push(std::move(out), requires_grad(a) || requires_grad(b));
        if (nodes_.back().requires_grad) {
            const int64_t na = va.numel();
            nodes_.back().back = [this, a, b, o, na] {
                const Tensor<T>& go = grad(o);
                if (requires_grad(a)) {
                    Tensor<T>& ga = grad(a);
                    for (int64_t i = 0; i < na; ++i) ga[i] += go[i];
                }
                if (requires_grad(b)) {
                    Tensor<T>& gb = grad(b);
                    for (int64_t i = 0; i < gb.numel(); ++i) gb[i] += go[na + i];
                }
            };
        }
        return o;
    }

    // table: [V, d], ids into rows -> [L, d].
    Id row_gather(Id table, std::vector<int> ids) {
        const Tensor<T>& vt = val(table);
        const int d = vt.shape[1];
        const int L = static_cast<int>(ids.size());
        Tensor<T> out({L, d});
        for (int r = 0; r < L; ++r)
            for (int c = 0; c < d; ++c) out.at(r, c) = vt.at(ids[static_cast<size_t>(r)], c);
        Id o = push(std::move(out), requires_grad(table));
        if (nodes_.back().requires_grad) {
            nodes_.back().back = [this, table, o, ids = std::move(ids), L, d] {
                const Tensor<T>& go = grad(o);
                Tensor<T>& gt = grad(table);
                for (int r = 0; r < L; ++r)
                    for (int c = 0; c < d; ++c) gt.at(ids[static_cast<size_t>(r)], c) += go.at(r, c);
            };
        }
        return o;
    }

    // [R, C] -> column j as [R].
    Id select_col(Id x, int j) {
        const Tensor<T>& vx = val(x);
        const int R = vx.shape[0];
        Tensor<T> out({R});
        for (int r = 0; r < R; ++r) out[r] = vx.at(r, j);
        Id o = push(std::move(out), requires_grad(x));
        if (nodes_.back().requires_grad) {
            nodes_.back().back = [this, x, o, j, R] {
                const Tensor<T>& go = grad(o);
                Tensor<T>& gx = grad(x);
                for (int r = 0; r < R; ++r) gx.at(r, j) += go[r];
            };
        }
        return o;
    }

    // Nearest 2x upsample of a flattened spatial vector [h*w] -> [2h*2w].
    Id upsample_vec2(Id x, int h, int w) {
        const Tensor<T>& vx = val(x);
        Tensor<T> out({4 * h * w});
        for (int oy = 0; oy < 2 * h; ++oy)
            for (int ox = 0; ox < 2 * w; ++ox)
                out[static_cast<int64_t>(oy) * 2 * w + ox] = vx[(oy / 2) * w + ox / 2];
        Id o = push(std::move(out), requires_grad(x));
        if (nodes_.back().requires_grad) {
            nodes_.back().back = [this, x, o, h, w] {
                const Tensor<T>& go = grad(o);
                Tensor<T>& gx = grad(x);
                for (int oy = 0; oy < 2 * h; ++oy)
                    for (int ox = 0; ox < 2 * w; ++ox)
                        gx[(oy / 2) * w + ox / 2] += go[static_cast<int64_t>(oy) * 2 * w + ox];
            };
        }
        return o;
    }

    // [C, H, W] -> [C] spatial mean.
    Id global_mean_pool(Id x) {
        const Tensor<T>& vx = val(x);
        const int C = vx.shape[0];
        const int64_t hw = static_cast<int64_t>(vx.shape[1]) * vx.shape[2];
        Tensor<T> out({C});
        for (int c = 0; c < C; ++c) {
            T s = T(0);
            for (int64_t i = 0; i < hw; ++i) s += vx[c * hw + i];
            out[c] = s / static_cast<T>(hw);
        }
        Id o = push(std::move(out), requires_grad(x));
        if (nodes_.back().requires_grad) {
            nodes_.back().back = [this, x, o, C, hw] {
                const Tensor<T>& go = grad(o);
                Tensor<T>& gx = grad(x);
                for (int c = 0; c < C; ++c) {
                    const T g = go[c] / static_cast<T>(hw);
                    for (int64_t i = 0; i < hw; ++i) gx[c * hw + i] += g;
                }
            };
        }
        return o;
    }

    // Scalar node: max over all elements (argmax saved for backward).
    Id max_all(Id x) {
        const Tensor<T>& vx = val(x);
        int64_t arg = 0;
        for (int64_t i = 1; i < vx.numel(); ++i)
            if (vx[i] > vx[arg]) arg = i;
        Tensor<T> out({1}, vx[arg]);
        Id o = push(std::move(out), requires_grad(x));
        if (nodes_.back().requires_grad) {
            nodes_.back().back = [this, x, o, arg] { grad(x)[arg] += grad(o)[0]; };
        }
        return o;
    }

    // y = x / s where s is a scalar node.
    Id div_by_scalar(Id x, Id s) {
        const Tensor<T>& vx = val(x);
        const T sv = val(s)[0];
        Tensor<T> out(vx.shape);
        for (int64_t i = 0; i < out.numel(); ++i) out[i] = vx[i] / sv;
        Id o = push(std::move(out), requires_grad(x) || requires_grad(s));
        if (nodes_.back().requires_grad) {
            nodes_.back().back = [this, x, s, o, sv] {
                const Tensor<T>& go = grad(o);
                if (requires_grad(x)) {
                    Tensor<T>& gx = grad(x);
                    for (int64_t i = 0; i < go.numel(); ++i) gx[i] += go[i] / sv;
                }
                if (requires_grad(s)) {
                    const Tensor<T>& vo = val(o);
                    T acc = T(0);
                    for (int64_t i = 0; i < go.numel(); ++i) acc += go[i] * vo[i];
                    grad(s)[0] += -acc / sv;
                }
            };
        }
        return o;
    }

    // Scalar node: mean((a - b)^2) over all elements.
    Id mean_sq_diff(Id a, Id b) {
        const Tensor<T>& va = val(a);
        const Tensor<T>& vb = val(b);
        const int64_t n = va.numel();
        T s = T(0);
        for (int64_t i = 0; i < n; ++i) {
            const T d = va[i] - vb[i];
            s += d * d;
        }
        Tensor<T> out({1}, s / static_cast<T>(n));
        Id o = push(std::move(out), requires_grad(a) || requires_grad(b));
        if (nodes_.back().requires_grad) {
            nodes_.back().back = [this, a, b, o, n] {
                const T g = grad(o)[0] * T(2) / static_cast<T>(n);
                const Tensor<T>& va2 = val(a);
                const Tensor<T>& vb2 = val(b);
                if (requires_grad(a)) {
                    Tensor<T>& ga = grad(a);
                    for (int64_t i = 0; i < n; ++i) ga[i] += g * (va2[i] - vb2[i]);
                }
                if (requires_grad(b)) {
                    Tensor<T>& gb = grad(b);
                    for (int64_t i = 0; i < n; ++i) gb[i] -= g * (va2[i] - vb2[i]);
                }
            };
        }
        return o;
    }

private:
    std::vector<Node> nodes_;

    Id push(Tensor<T> value, bool rg) {
        Node n;
        n.value = std::move(value);
        n.requires_grad = rg;
        nodes_.push_back(std::move(n));
        return static_cast<Id>(nodes_.size() - 1);
    }

    template <class F>
    Id unary_or_binary(Tensor<T> out, Id a, Id b, F&& back) {
        Id o = push(std::move(out), requires_grad(a) || requires_grad(b));
        if (nodes_.back().requires_grad) {
            nodes_.back().back = [this, a, b, o, back = std::forward<F>(back)] {
                back(a, b, o);
            };
        }
        return o;
    }

    void accumulate(Id id, const Tensor<T>& g) {
        if (!requires_grad(id)) return;
        Tensor<T>& dst = grad(id);
        for (int64_t i = 0; i < g.numel(); ++i) dst[i] += g[i];
    }

    void accumulate_neg(Id id, const Tensor<T>& g) {
        if (!requires_grad(id)) return;
        Tensor<T>& dst = grad(id);
        for (int64_t i = 0; i < g.numel(); ++i) dst[i] -= g[i];
    }

    void prepare_grads() {
        for (Node& n : nodes_) {
            const Tensor<T>& v = n.external ? *n.external : n.value;
            if (n.grad.shape != v.shape)
                n.grad = Tensor<T>(v.shape);
            else
                n.grad.fill(T(0));
        }
    }
};

}  // namespace elgen
