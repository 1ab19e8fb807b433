#pragma once

// Attention-space box constraints evaluated on an S x K attention grid
// (S rows along y, K columns along x): masked internal/external top-k terms,
// axis-projection boundary alignment with deterministic window sampling,
// first/second-order smoothness, and their weighted total. Every operation
// has a hand-derived gradient with a fixed top-k subgradient convention:
// gradient flows only to selected cells, ties broken by lowest flat index.

#include <cstdint>
#include <string>
#include <vector>

#include "elgen/core/box.hpp"
#include "elgen/core/tensor.hpp"

namespace elgen::tidsc {

struct ConstraintConfig {
    int P = 0;                  // top-k count; 0 = max(1, round(0.2 * mask interior))
    int L = 8;                  // sampled error terms per axis, even
    double lambda1 = 0.1;       // first-order smoothness weight
    double lambda2 = 0.05;      // second-order smoothness weight
    int window_halfwidth = 0;   // 0 = max(1, round(0.1 * axis length))
    double step_size = 0.5;     // latent update rate eta_c
    int inner_iters = 1;        // latent updates per denoise step
    bool cosine_decay = true;   // decay step_size across the active window
    bool full_grad = false;     // differentiate through keys/values as well

    void validate() const;
    int resolve_p(int64_t interior) const;
    int resolve_w(int axis_len) const;
};

struct BinaryMask {
    TensorD m;                   // [S, K], entries in {0,1}
    int x_lo = 0, x_hi = 0;      // inclusive column range of the ones block
    int y_lo = 0, y_hi = 0;      // inclusive row range
    int64_t interior = 0;        // count of ones
    int box_index = 0;           // which request box produced this mask
};

// Rasterize image-space boxes onto the attention grid, rounding outward.
std::vector<BinaryMask> boxes_to_masks(const std::vector<BoxSpec>& boxes, int image_side, int S,
                                       int K);

// Indices of the P largest entries, descending value, ties by lowest index.
std::vector<int64_t> topk_indices(const std::vector<double>& values, int P);

// --- individual constraint terms (scalars) plus their gradients -------------

double l_in(const TensorD& attn, const BinaryMask& mask, int P);
TensorD l_in_grad(const TensorD& attn, const BinaryMask& mask, int P);

double l_out(const TensorD& attn, const BinaryMask& mask, int P);
TensorD l_out_grad(const TensorD& attn, const BinaryMask& mask, int P);

enum class Axis { X, Y };
std::vector<double> axis_project(const TensorD& arr, Axis axis);

// Mean of L error entries drawn at evenly spaced indices from the windows
// [c1-w, c1+w] and [c2-w, c2+w] (clamped to bounds), L/2 per edge.
double tokp_sample(const std::vector<double>& errors, int L, int c1, int c2,
                   int window_halfwidth);
std::vector<int> tokp_indices(int n, int L, int c1, int c2, int window_halfwidth);

double boundary_alignment(const TensorD& attn, const BinaryMask& mask, int L,
                          int window_halfwidth);
TensorD boundary_alignment_grad(const TensorD& attn, const BinaryMask& mask, int L,
                                int window_halfwidth);

double smoothness(const TensorD& attn, const BinaryMask& mask, int order);
TensorD smoothness_grad(const TensorD& attn, const BinaryMask& mask, int order);

double basc(const std::vector<TensorD>& attn_per_box, const std::vector<BinaryMask>& masks,
            const ConstraintConfig& cfg);
std::vector<TensorD> basc_grad(const std::vector<TensorD>& attn_per_box,
                               const std::vector<BinaryMask>& masks,
                               const ConstraintConfig& cfg);

struct ConstraintReport {
    double total = 0.0;
    double l_in = 0.0;
    double l_out = 0.0;
    double basc = 0.0;
    std::vector<double> align;  // per box: L3 + L4
    std::vector<double> sm1;
    std::vector<double> sm2;
    double mass_before = -1.0;  // in-box attention fraction before/after update
    double mass_after = -1.0;
    int step = -1;
    bool aborted_nonfinite = false;
};

double total_loss(const std::vector<TensorD>& attn_per_box, const std::vector<BinaryMask>& masks,
                  const ConstraintConfig& cfg, ConstraintReport* report = nullptr);
std::vector<TensorD> total_loss_grad(const std::vector<TensorD>& attn_per_box,
                                     const std::vector<BinaryMask>& masks,
                                     const ConstraintConfig& cfg);

// Fraction of a map's mass lying inside the mask.
double in_box_mass(const TensorD& attn, const BinaryMask& mask);

}  // namespace elgen::tidsc
