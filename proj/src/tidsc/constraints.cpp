#include "elgen/tidsc/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "elgen/core/error.hpp"

namespace elgen::tidsc {

void ConstraintConfig::validate() const {
    if (P < 0) throw ParameterError("constraints: P must be >= 1 (or 0 for auto)");
    if (L < 2 || L % 2 != 0) throw ParameterError("constraints: L must be even and >= 2");
    if (lambda1 < 0.0 || lambda2 < 0.0)
        throw ParameterError("constraints: smoothness weights must be >= 0");
    if (inner_iters < 0) throw ParameterError("constraints: inner_iters must be >= 0");
}

int ConstraintConfig::resolve_p(int64_t interior) const {
    const int p = P > 0 ? P : std::max(1, static_cast<int>(std::lround(0.2 * interior)));
    if (p > interior)
        throw ParameterError("constraints: P exceeds mask interior size");
    return p;
}

int ConstraintConfig::resolve_w(int axis_len) const {
    return window_halfwidth > 0 ? window_halfwidth
                                : std::max(1, static_cast<int>(std::lround(0.1 * axis_len)));
}

std::vector<BinaryMask> boxes_to_masks(const std::vector<BoxSpec>& boxes, int image_side, int S,
                                       int K) {
    std::vector<BinaryMask> out;
    out.reserve(boxes.size());
    for (size_t i = 0; i < boxes.size(); ++i) {
        const BoxSpec& b = boxes[i];
        b.validate(image_side, image_side);
        BinaryMask mask;
        mask.box_index = static_cast<int>(i);
        mask.x_lo = b.x1 * K / image_side;
        mask.x_hi = (b.x2 * K + image_side - 1) / image_side - 1;  // ceil - 1
        mask.y_lo = b.y1 * S / image_side;
        mask.y_hi = (b.y2 * S + image_side - 1) / image_side - 1;
        if (mask.x_hi < mask.x_lo || mask.y_hi < mask.y_lo)
            throw ParameterError("boxes_to_masks: box " + std::to_string(i) +
                                 " collapses to zero area on the attention grid");
        mask.m = TensorD({S, K});
        for (int y = mask.y_lo; y <= mask.y_hi; ++y)
            for (int x = mask.x_lo; x <= mask.x_hi; ++x) mask.m.at(y, x) = 1.0;
        mask.interior =
            static_cast<int64_t>(mask.x_hi - mask.x_lo + 1) * (mask.y_hi - mask.y_lo + 1);
        out.push_back(std::move(mask));
    }
    return out;
}

std::vector<int64_t> topk_indices(const std::vector<double>& values, int P) {
    std::vector<int64_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto cmp = [&](int64_t a, int64_t b) {
        if (values[static_cast<size_t>(a)] != values[static_cast<size_t>(b)])
            return values[static_cast<size_t>(a)] > values[static_cast<size_t>(b)];
        return a < b;
    };
    std::partial_sort(idx.begin(), idx.begin() + P, idx.end(), cmp);
    idx.resize(static_cast<size_t>(P));
    return idx;
}

namespace {

void check_map(const TensorD& attn, const BinaryMask& mask, const char* who) {
    if (attn.rank() != 2 || attn.shape != mask.m.shape)
        throw ParameterError(std::string(who) + ": attention/mask shape mismatch");
}

std::vector<double> masked_values(const TensorD& attn, const TensorD& m, bool invert) {
    std::vector<double> v(static_cast<size_t>(attn.numel()));
    for (int64_t i = 0; i < attn.numel(); ++i) {
        const double w = invert ? 1.0 - m[i] : m[i];
        v[static_cast<size_t>(i)] = attn[i] * w;
    }
    return v;
}

}  // namespace

double l_in(const TensorD& attn, const BinaryMask& mask, int P) {
    check_map(attn, mask, "l_in");
    if (P < 1 || P > mask.interior) throw ParameterError("l_in: P outside [1, interior]");
    const std::vector<double> v = masked_values(attn, mask.m, false);
    double s = 0.0;
    for (int64_t i : topk_indices(v, P)) s += v[static_cast<size_t>(i)];
    return 1.0 - s / P;
}

TensorD l_in_grad(const TensorD& attn, const BinaryMask& mask, int P) {
    check_map(attn, mask, "l_in_grad");
    if (P < 1 || P > mask.interior) throw ParameterError("l_in_grad: P outside [1, interior]");
    const std::vector<double> v = masked_values(attn, mask.m, false);
    TensorD g(attn.shape);
    for (int64_t i : topk_indices(v, P)) g[i] = -mask.m[i] / P;
    return g;
}

double l_out(const TensorD& attn, const BinaryMask& mask, int P) {
    check_map(attn, mask, "l_out");
    const int64_t exterior = attn.numel() - mask.interior;
    if (P < 1 || P > exterior) throw ParameterError("l_out: P outside [1, exterior]");
    const std::vector<double> v = masked_values(attn, mask.m, true);
    double s = 0.0;
    for (int64_t i : topk_indices(v, P)) s += v[static_cast<size_t>(i)];
    return s / P;
}

TensorD l_out_grad(const TensorD& attn, const BinaryMask& mask, int P) {
    check_map(attn, mask, "l_out_grad");
    const int64_t exterior = attn.numel() - mask.interior;
    if (P < 1 || P > exterior) throw ParameterError("l_out_grad: P outside [1, exterior]");
    const std::vector<double> v = masked_values(attn, mask.m, true);
    TensorD g(attn.shape);
    for (int64_t i : topk_indices(v, P)) g[i] = (1.0 - mask.m[i]) / P;
    return g;
}

std::vector<double> axis_project(const TensorD& arr, Axis axis) {
    const int S = arr.shape[0], K = arr.shape[1];
    if (axis == Axis::X) {
        std::vector<double> out(static_cast<size_t>(K));
        for (int k = 0; k < K; ++k) {
            double m = arr.at(0, k);
            for (int s = 1; s < S; ++s) m = std::max(m, arr.at(s, k));
            out[static_cast<size_t>(k)] = m;
        }
        return out;
    }
    std::vector<double> out(static_cast<size_t>(S));
    for (int s = 0; s < S; ++s) {
        double m = arr.at(s, 0);
        for (int k = 1; k < K; ++k) m = std::max(m, arr.at(s, k));
        out[static_cast<size_t>(s)] = m;
    }
    return out;
}

std::vector<int> tokp_indices(int n, int L, int c1, int c2, int window_halfwidth) {
    if (L < 2 || L % 2 != 0) throw ParameterError("tokp: L must be even and >= 2");
    if (!(0 <= c1 && c1 < c2 && c2 < n))
        throw ParameterError("tokp: need 0 <= c1 < c2 < length");
    std::vector<int> idx;
    idx.reserve(static_cast<size_t>(L));
    const int m = L / 2;
    for (int c : {c1, c2}) {
        const int lo = std::max(0, c - window_halfwidth);
        const int hi = std::min(n - 1, c + window_halfwidth);
        if (hi < lo) throw ParameterError("tokp: empty sampling window");
        for (int i = 0; i < m; ++i) {
            double f = m == 1 ? 0.5 : i / static_cast<double>(m - 1);
            idx.push_back(lo + static_cast<int>(std::lround(f * (hi - lo))));
        }
    }
    return idx;
}

double tokp_sample(const std::vector<double>& errors, int L, int c1, int c2,
                   int window_halfwidth) {
    const std::vector<int> idx =
        tokp_indices(static_cast<int>(errors.size()), L, c1, c2, window_halfwidth);
    double s = 0.0;
    for (int i : idx) s += errors[static_cast<size_t>(i)];
    return s / L;
}

namespace {

// Alignment term along one axis plus (optionally) its gradient contribution.
double axis_alignment(const TensorD& attn, const BinaryMask& mask, Axis axis, int L, int w,
                      TensorD* grad) {
    const int S = attn.shape[0], K = attn.shape[1];
    const std::vector<double> mp = axis_project(mask.m, axis);
    const std::vector<double> ap = axis_project(attn, axis);
    const int n = static_cast<int>(mp.size());
    std::vector<double> err(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) err[static_cast<size_t>(i)] = std::abs(mp[static_cast<size_t>(i)] - ap[static_cast<size_t>(i)]);
    const int c1 = axis == Axis::X ? mask.x_lo : mask.y_lo;
    const int c2 = axis == Axis::X ? mask.x_hi : mask.y_hi;
    const std::vector<int> idx = tokp_indices(n, L, c1, c2, w);
    double s = 0.0;
    for (int i : idx) s += err[static_cast<size_t>(i)];
    if (grad) {
        for (int i : idx) {
            const double diff = ap[static_cast<size_t>(i)] - mp[static_cast<size_t>(i)];
            const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
            if (sign == 0.0) continue;
            // d ap[i] / d attn = 1 at the running argmax (lowest index on ties)
            if (axis == Axis::X) {
                int arg = 0;
                for (int r = 1; r < S; ++r)
                    if (attn.at(r, i) > attn.at(arg, i)) arg = r;
                grad->at(arg, i) += sign / L;
            } else {
                int arg = 0;
                for (int c = 1; c < K; ++c)
                    if (attn.at(i, c) > attn.at(i, arg)) arg = c;
                grad->at(i, arg) += sign / L;
            }
        }
    }
    return s / L;
}

}  // namespace

double boundary_alignment(const TensorD& attn, const BinaryMask& mask, int L,
                          int window_halfwidth) {
    check_map(attn, mask, "boundary_alignment");
    return axis_alignment(attn, mask, Axis::X, L, window_halfwidth, nullptr) +
           axis_alignment(attn, mask, Axis::Y, L, window_halfwidth, nullptr);
}

TensorD boundary_alignment_grad(const TensorD& attn, const BinaryMask& mask, int L,
                                int window_halfwidth) {
    check_map(attn, mask, "boundary_alignment_grad");
    TensorD g(attn.shape);
    axis_alignment(attn, mask, Axis::X, L, window_halfwidth, &g);
    axis_alignment(attn, mask, Axis::Y, L, window_halfwidth, &g);
    return g;
}

namespace {

// Stencil offsets for |d attn| terms at cell (s, k); one-sided at borders.
// order 1: forward difference a[i+1] - a[i]; order 2: central a[i+1] - 2a[i] + a[i-1].
struct Stencil {
    int offs[3];
    double coef[3];
    int count;
};

Stencil diff_stencil(int i, int n, int order) {
    Stencil st{};
    if (order == 1) {
        const int j = (i < n - 1) ? i : n - 2;  // backward at the last cell
        st.offs[0] = j + 1;
        st.coef[0] = 1.0;
        st.offs[1] = j;
        st.coef[1] = -1.0;
        st.count = 2;
    } else {
        const int j = std::clamp(i, 1, n - 2);  // shifted stencil at borders
        st.offs[0] = j + 1;
        st.coef[0] = 1.0;
        st.offs[1] = j;
        st.coef[1] = -2.0;
        st.offs[2] = j - 1;
        st.coef[2] = 1.0;
        st.count = 3;
    }
    return st;
}

}  // namespace

double smoothness(const TensorD& attn, const BinaryMask& mask, int order) {
    check_map(attn, mask, "smoothness");
    if (order != 1 && order != 2) throw ParameterError("smoothness: order must be 1 or 2");
    const int S = attn.shape[0], K = attn.shape[1];
    if (order == 1 && (S < 2 || K < 2))
        throw ParameterError("smoothness: map too small for order 1");
    if (order == 2 && (S < 3 || K < 3))
        throw ParameterError("smoothness: map too small for order 2");
    double total = 0.0;
    for (int s = 0; s < S; ++s) {
        for (int k = 0; k < K; ++k) {
            if (mask.m.at(s, k) == 0.0) continue;
            const Stencil sx = diff_stencil(k, K, order);
            double dx = 0.0;
            for (int i = 0; i < sx.count; ++i) dx += sx.coef[i] * attn.at(s, sx.offs[i]);
            const Stencil sy = diff_stencil(s, S, order);
            double dy = 0.0;
            for (int i = 0; i < sy.count; ++i) dy += sy.coef[i] * attn.at(sy.offs[i], k);
            total += std::abs(dx) + std::abs(dy);
        }
    }
    return total / (static_cast<double>(S) * K);
}

TensorD smoothness_grad(const TensorD& attn, const BinaryMask& mask, int order) {
    check_map(attn, mask, "smoothness_grad");
    if (order != 1 && order != 2) throw ParameterError("smoothness_grad: order must be 1 or 2");
    const int S = attn.shape[0], K = attn.shape[1];
    TensorD g(attn.shape);
    const double norm = 1.0 / (static_cast<double>(S) * K);
    for (int s = 0; s < S; ++s) {
        for (int k = 0; k < K; ++k) {
            if (mask.m.at(s, k) == 0.0) continue;
            const Stencil sx = diff_stencil(k, K, order);
            double dx = 0.0;
            for (int i = 0; i < sx.count; ++i) dx += sx.coef[i] * attn.at(s, sx.offs[i]);
            const double sgx = dx > 0.0 ? 1.0 : (dx < 0.0 ? -1.0 : 0.0);
            for (int i = 0; i < sx.count; ++i) g.at(s, sx.offs[i]) += norm * sgx * sx.coef[i];
            const Stencil sy = diff_stencil(s, S, order);
            double dy = 0.0;
            for (int i = 0; i < sy.count; ++i) dy += sy.coef[i] * attn.at(sy.offs[i], k);
            const double sgy = dy > 0.0 ? 1.0 : (dy < 0.0 ? -1.0 : 0.0);
            for (int i = 0; i < sy.count; ++i) g.at(sy.offs[i], k) += norm * sgy * sy.coef[i];
        }
    }
    return g;
}

double basc(const std::vector<TensorD>& attn_per_box, const std::vector<BinaryMask>& masks,
            const ConstraintConfig& cfg) {
    cfg.validate();
    if (attn_per_box.size() != masks.size())
        throw ParameterError("basc: one attention map per mask required");
    double total = 0.0;
    for (size_t j = 0; j < masks.size(); ++j) {
        const BinaryMask& mask = masks[j];
        const TensorD& attn = attn_per_box[j];
        const int wx = cfg.resolve_w(attn.shape[1]);
        total += boundary_alignment(attn, mask, cfg.L, wx);
        if (cfg.lambda1 > 0.0) total += cfg.lambda1 * smoothness(attn, mask, 1);
        if (cfg.lambda2 > 0.0) total += cfg.lambda2 * smoothness(attn, mask, 2);
    }
    return total;
}

std::vector<TensorD> basc_grad(const std::vector<TensorD>& attn_per_box,
                               const std::vector<BinaryMask>& masks,
                               const ConstraintConfig& cfg) {
    cfg.validate();
    std::vector<TensorD> grads;
    grads.reserve(attn_per_box.size());
    for (size_t j = 0; j < masks.size(); ++j) {
        const BinaryMask& mask = masks[j];
        const TensorD& attn = attn_per_box[j];
        const int wx = cfg.resolve_w(attn.shape[1]);
        TensorD g = boundary_alignment_grad(attn, mask, cfg.L, wx);
        if (cfg.lambda1 > 0.0) {
            const TensorD g1 = smoothness_grad(attn, mask, 1);
            for (int64_t i = 0; i < g.numel(); ++i) g[i] += cfg.lambda1 * g1[i];
        }
        if (cfg.lambda2 > 0.0) {
            const TensorD g2 = smoothness_grad(attn, mask, 2);
            for (int64_t i = 0; i < g.numel(); ++i) g[i] += cfg.lambda2 * g2[i];
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

double total_loss(const std::vector<TensorD>& attn_per_box, const std::vector<BinaryMask>& masks,
                  const ConstraintConfig& cfg, ConstraintReport* report) {
    cfg.validate();
    if (attn_per_box.size() != masks.size())
        throw ParameterError("total_loss: one attention map per mask required");
    double in_sum = 0.0, out_sum = 0.0, align_sum = 0.0;
    ConstraintReport rep;
    for (size_t j = 0; j < masks.size(); ++j) {
        const BinaryMask& mask = masks[j];
        const TensorD& attn = attn_per_box[j];
        const int p = cfg.resolve_p(mask.interior);
        in_sum += l_in(attn, mask, p);
        out_sum += l_out(attn, mask, p);
        const int wx = cfg.resolve_w(attn.shape[1]);
        const double a = boundary_alignment(attn, mask, cfg.L, wx);
        const bool can1 = attn.shape[0] >= 2 && attn.shape[1] >= 2;
        const bool can2 = attn.shape[0] >= 3 && attn.shape[1] >= 3;
        const double s1 = (cfg.lambda1 > 0.0 || can1) ? smoothness(attn, mask, 1) : 0.0;
        const double s2 = (cfg.lambda2 > 0.0 || can2) ? smoothness(attn, mask, 2) : 0.0;
        align_sum += a + cfg.lambda1 * s1 + cfg.lambda2 * s2;
        rep.align.push_back(a);
        rep.sm1.push_back(s1);
        rep.sm2.push_back(s2);
    }
    rep.l_in = in_sum;
    rep.l_out = out_sum;
    rep.basc = align_sum;
    rep.total = in_sum + out_sum + align_sum;
    if (report) *report = std::move(rep);
    return in_sum + out_sum + align_sum;
}

std::vector<TensorD> total_loss_grad(const std::vector<TensorD>& attn_per_box,
                                     const std::vector<BinaryMask>& masks,
                                     const ConstraintConfig& cfg) {
    cfg.validate();
    std::vector<TensorD> grads = basc_grad(attn_per_box, masks, cfg);
    for (size_t j = 0; j < masks.size(); ++j) {
        const BinaryMask& mask = masks[j];
        const TensorD& attn = attn_per_box[j];
        const int p = cfg.resolve_p(mask.interior);
        const TensorD gi = l_in_grad(attn, mask, p);
        const TensorD go = l_out_grad(attn, mask, p);
        for (int64_t i = 0; i < grads[j].numel(); ++i) grads[j][i] += gi[i] + go[i];
    }
    return grads;
}

double in_box_mass(const TensorD& attn, const BinaryMask& mask) {
    double inside = 0.0, total = 0.0;
    for (int64_t i = 0; i < attn.numel(); ++i) {
        total += attn[i];
        inside += attn[i] * mask.m[i];
    }
    return total > 0.0 ? inside / total : 0.0;
}

}  // namespace elgen::tidsc
