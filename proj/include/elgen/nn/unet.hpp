#pragma once

// U-shaped convolutional denoiser with cross-attention at the two coarsest
// resolutions. The text branch is always present; the image-token branch
// (adaptor) is optional and shares the query projection with the text branch,
// with the two branch outputs mixed by scalars alpha (image) and beta (text).

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "elgen/autodiff/tape.hpp"
#include "elgen/nn/params.hpp"

namespace elgen {

struct UNetConfig {
    int side = 64;   // latent side; must be divisible by 8
    int base = 32;   // channel width at full resolution (doubles per level)
    int d = 64;      // token / attention width
    int t_dim = 64;  // time-embedding width
    int l_txt = 16;  // caption length
    int n_img = 4;   // image tokens
    int c1() const { return base; }
    int c2() const { return 2 * base; }
    int c3() const { return 4 * base; }
};

inline int gn_groups(int channels) {
    for (int g : {8, 4, 2})
        if (channels % g == 0) return g;
    return 1;
}

template <class T>
struct CondInput {
    typename Tape<T>::Id h_p = -1;      // [l_txt, d]
    typename Tape<T>::Id pad_bias = -1; // [l_txt]
    typename Tape<T>::Id h_z = -1;      // [n_img, d] or -1
    T alpha = T(1);
    T beta = T(1);
};

template <class T>
struct AttnSiteMaps {
    std::string site;
    int h = 0, w = 0;                    // spatial grid of the query positions
    typename Tape<T>::Id text_map = -1;  // [h*w, l_txt], rows sum to 1
    typename Tape<T>::Id img_map = -1;   // [h*w, n_img] or -1
};

// Sinusoidal features of an integer timestep.
template <class T>
Tensor<T> timestep_features(int t, int dim) {
    Tensor<T> f({1, dim});
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double omega = std::exp(-std::log(10000.0) * i / static_cast<double>(half));
        f.at(0, i) = static_cast<T>(std::sin(t * omega));
        f.at(0, half + i) = static_cast<T>(std::cos(t * omega));
    }
    return f;
}

template <class T>
class UNet {
public:
    UNetConfig cfg;

    explicit UNet(UNetConfig c) : cfg(c) {}

    // Create all base-network parameters (text branch included).
    void init_params(ParamStore<T>& ps, RandomStream& rng) const {
        add_conv(ps, rng, "unet.stem", 1, cfg.c1(), 3);
        add_linear(ps, rng, "unet.temb.l1", cfg.t_dim, cfg.t_dim);
        add_linear(ps, rng, "unet.temb.l2", cfg.t_dim, cfg.t_dim);
        add_res(ps, rng, "unet.enc1", cfg.c1(), cfg.c1());
        add_conv(ps, rng, "unet.down1", cfg.c1(), cfg.c2(), 3);
        add_res(ps, rng, "unet.enc2", cfg.c2(), cfg.c2());
        add_conv(ps, rng, "unet.down2", cfg.c2(), cfg.c3(), 3);
        add_res(ps, rng, "unet.enc3", cfg.c3(), cfg.c3());
        add_attn(ps, rng, "unet.attn_enc", cfg.c3());
        add_conv(ps, rng, "unet.down3", cfg.c3(), cfg.c3(), 3);
        add_res(ps, rng, "unet.mid1", cfg.c3(), cfg.c3());
        add_attn(ps, rng, "unet.attn_mid", cfg.c3());
        add_res(ps, rng, "unet.mid2", cfg.c3(), cfg.c3());
        add_conv(ps, rng, "unet.up3", cfg.c3(), cfg.c3(), 3);
        add_res(ps, rng, "unet.dec3", 2 * cfg.c3(), cfg.c3());
        add_attn(ps, rng, "unet.attn_dec", cfg.c3());
        add_conv(ps, rng, "unet.up2", cfg.c3(), cfg.c2(), 3);
        add_res(ps, rng, "unet.dec2", 2 * cfg.c2(), cfg.c2());
        add_conv(ps, rng, "unet.up1", cfg.c2(), cfg.c1(), 3);
        add_res(ps, rng, "unet.dec1", 2 * cfg.c1(), cfg.c1());
        ps.add("unet.out.gn.g", init::constant<T>({cfg.c1()}, T(1)));
        ps.add("unet.out.gn.b", init::constant<T>({cfg.c1()}, T(0)));
        // Zero-initialized head: the net starts by predicting zero noise.
        ps.add("unet.out.w", init::constant<T>({1, cfg.c1(), 3, 3}, T(0)));
        ps.add("unet.out.b", init::constant<T>({1}, T(0)));
    }

    // Image-branch key/value projections, created when the adaptor stage
    // first runs; absent in a pure text-conditioned checkpoint.
    void ensure_adaptor_params(ParamStore<T>& ps, RandomStream& rng) const {
        if (ps.has("unet.attn_enc.wk_z")) return;
        for (const char* site : {"unet.attn_enc", "unet.attn_mid", "unet.attn_dec"}) {
            ps.add(std::string(site) + ".wk_z", init::kaiming<T>({cfg.d, cfg.d}, rng));
            ps.add(std::string(site) + ".wv_z", init::kaiming<T>({cfg.d, cfg.d}, rng));
        }
    }

    static std::vector<std::string> attn_sites() {
        return {"unet.attn_enc", "unet.attn_mid", "unet.attn_dec"};
    }

    // Builds the denoiser graph; returns the predicted-noise node [1, side, side].
    // needs_grad selects which parameters become differentiable leaves.
    typename Tape<T>::Id forward(Tape<T>& tape, ParamStore<T>& ps, typename Tape<T>::Id z,
                                 int t, const CondInput<T>& cond,
                                 std::vector<AttnSiteMaps<T>>* maps_out,
                                 const std::function<bool(const std::string&)>& needs_grad) const {
        using Id = typename Tape<T>::Id;
        std::map<std::string, Id> leaves;
        auto P = [&](const std::string& name) -> Id {
            auto it = leaves.find(name);
            if (it != leaves.end()) return it->second;
            Id id = tape.leaf_ref(&ps.at(name), needs_grad && needs_grad(name));
            leaves[name] = id;
            return id;
        };

        auto conv = [&](Id x, const std::string& name, int stride) {
            return tape.conv2d(x, P(name + ".w"), P(name + ".b"), stride, 1);
        };

        // time embedding
        Id tf = tape.leaf(timestep_features<T>(t, cfg.t_dim));
        Id temb = tape.linear(tf, P("unet.temb.l1.w"), P("unet.temb.l1.b"));
        temb = tape.silu(temb);
        temb = tape.linear(temb, P("unet.temb.l2.w"), P("unet.temb.l2.b"));

        auto res_block = [&](Id x, int cin, int cout, const std::string& prefix) {
            Id h = tape.group_norm(x, P(prefix + ".gn1.g"), P(prefix + ".gn1.b"), gn_groups(cin));
            h = tape.silu(h);
            h = conv(h, prefix + ".conv1", 1);
            Id tb = tape.linear(temb, P(prefix + ".temb.w"), P(prefix + ".temb.b"));
            tb = tape.reshape(tb, {cout});
            h = tape.add_chan_bias(h, tb);
            h = tape.group_norm(h, P(prefix + ".gn2.g"), P(prefix + ".gn2.b"), gn_groups(cout));
            h = tape.silu(h);
            h = conv(h, prefix + ".conv2", 1);
            Id skip = x;
            if (cin != cout)
                skip = tape.conv2d(x, P(prefix + ".skip.w"), P(prefix + ".skip.b"), 1, 0);
            return tape.add(h, skip);
        };

        const T inv_sqrt_d = T(1) / static_cast<T>(std::sqrt(static_cast<double>(cfg.d)));
        auto attn_block = [&](Id x, int c, int h, int w, const std::string& prefix) {
            Id hn = tape.group_norm(x, P(prefix + ".gn.g"), P(prefix + ".gn.b"), gn_groups(c));
            Id xs = tape.chw_to_sc(hn);                       // [S, c]
            Id q = tape.matmul(xs, P(prefix + ".wq"));        // [S, d]
            Id kp = tape.matmul(cond.h_p, P(prefix + ".wk_p"));
            Id vp = tape.matmul(cond.h_p, P(prefix + ".wv_p"));
            Id sp = tape.scale(tape.matmul(q, kp, false, true), inv_sqrt_d);
            sp = tape.add_row_bias(sp, cond.pad_bias);
            Id ap = tape.softmax_rows(sp);                    // [S, l_txt]
            Id outp = tape.matmul(ap, vp);                    // [S, d]
            Id fused;
            Id az = -1;
            if (cond.h_z >= 0 && cond.alpha != T(0)) {
                Id kz = tape.matmul(cond.h_z, P(prefix + ".wk_z"));
                Id vz = tape.matmul(cond.h_z, P(prefix + ".wv_z"));
                Id sz = tape.scale(tape.matmul(q, kz, false, true), inv_sqrt_d);
                az = tape.softmax_rows(sz);                   // [S, n_img]
                Id outz = tape.matmul(az, vz);
                fused = tape.lincomb(outz, outp, cond.alpha, cond.beta);
            } else {
                fused = tape.scale(outp, cond.beta);
            }
            Id out = tape.matmul(fused, P(prefix + ".wo"));   // [S, c]
            Id out_chw = tape.sc_to_chw(out, c, h, w);
            if (maps_out) {
                AttnSiteMaps<T> m;
                m.site = prefix;
                m.h = h;
                m.w = w;
                m.text_map = ap;
                m.img_map = az;
                maps_out->push_back(m);
            }
            return tape.add(x, out_chw);
        };

        const int s = cfg.side;
        Id h0 = conv(z, "unet.stem", 1);
        Id e1 = res_block(h0, cfg.c1(), cfg.c1(), "unet.enc1");
        Id d1 = conv(e1, "unet.down1", 2);
        Id e2 = res_block(d1, cfg.c2(), cfg.c2(), "unet.enc2");
        Id d2 = conv(e2, "unet.down2", 2);
        Id e3 = res_block(d2, cfg.c3(), cfg.c3(), "unet.enc3");
        e3 = attn_block(e3, cfg.c3(), s / 4, s / 4, "unet.attn_enc");
        Id d3 = conv(e3, "unet.down3", 2);
        Id m = res_block(d3, cfg.c3(), cfg.c3(), "unet.mid1");
        m = attn_block(m, cfg.c3(), s / 8, s / 8, "unet.attn_mid");
        m = res_block(m, cfg.c3(), cfg.c3(), "unet.mid2");
        Id u3 = conv(tape.upsample2(m), "unet.up3", 1);
        u3 = res_block(tape.concat_ch(u3, e3), 2 * cfg.c3(), cfg.c3(), "unet.dec3");
        u3 = attn_block(u3, cfg.c3(), s / 4, s / 4, "unet.attn_dec");
        Id u2 = conv(tape.upsample2(u3), "unet.up2", 1);
        u2 = res_block(tape.concat_ch(u2, e2), 2 * cfg.c2(), cfg.c2(), "unet.dec2");
        Id u1 = conv(tape.upsample2(u2), "unet.up1", 1);
        u1 = res_block(tape.concat_ch(u1, e1), 2 * cfg.c1(), cfg.c1(), "unet.dec1");
        Id out = tape.group_norm(u1, P("unet.out.gn.g"), P("unet.out.gn.b"), gn_groups(cfg.c1()));
        out = tape.silu(out);
        out = tape.conv2d(out, P("unet.out.w"), P("unet.out.b"), 1, 1);
        return out;
    }

private:
    static void add_conv(ParamStore<T>& ps, RandomStream& rng, const std::string& name, int cin,
                         int cout, int k) {
        ps.add(name + ".w", init::kaiming<T>({cout, cin, k, k}, rng));
        ps.add(name + ".b", init::constant<T>({cout}, T(0)));
    }

    static void add_linear(ParamStore<T>& ps, RandomStream& rng, const std::string& name, int in,
                           int out) {
        ps.add(name + ".w", init::kaiming<T>({in, out}, rng));
        ps.add(name + ".b", init::constant<T>({out}, T(0)));
    }

    void add_res(ParamStore<T>& ps, RandomStream& rng, const std::string& prefix, int cin,
                 int cout) const {
        ps.add(prefix + ".gn1.g", init::constant<T>({cin}, T(1)));
        ps.add(prefix + ".gn1.b", init::constant<T>({cin}, T(0)));
        add_conv(ps, rng, prefix + ".conv1", cin, cout, 3);
        add_linear(ps, rng, prefix + ".temb", cfg.t_dim, cout);
        ps.add(prefix + ".gn2.g", init::constant<T>({cout}, T(1)));
        ps.add(prefix + ".gn2.b", init::constant<T>({cout}, T(0)));
        add_conv(ps, rng, prefix + ".conv2", cout, cout, 3);
        if (cin != cout) {
            ps.add(prefix + ".skip.w", init::kaiming<T>({cout, cin, 1, 1}, rng));
            ps.add(prefix + ".skip.b", init::constant<T>({cout}, T(0)));
        }
    }

    void add_attn(ParamStore<T>& ps, RandomStream& rng, const std::string& prefix, int c) const {
        ps.add(prefix + ".gn.g", init::constant<T>({c}, T(1)));
        ps.add(prefix + ".gn.b", init::constant<T>({c}, T(0)));
        ps.add(prefix + ".wq", init::kaiming<T>({c, cfg.d}, rng));
        ps.add(prefix + ".wk_p", init::kaiming<T>({cfg.d, cfg.d}, rng));
        ps.add(prefix + ".wv_p", init::kaiming<T>({cfg.d, cfg.d}, rng));
        // Zero-initialized output projection: attention starts as a no-op.
        ps.add(prefix + ".wo", init::constant<T>({cfg.d, c}, T(0)));
    }
};

}  // namespace elgen
