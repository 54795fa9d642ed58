// Latent-variable probing and information estimators.
//
// Everything here is pure function over plain matrices (no autodiff): linear
// probes with per-variable R² and AMSE, R²/MI dimension ranking and selection,
// Gaussian-KDE differential entropy and pairwise mutual information, the 2-NN
// intrinsic-dimension estimator, and the distractor-invariance overlap score.
//
// Estimator conventions (fixed so results are reproducible):
//  - KDE entropy is the resubstitution estimate H ≈ −(1/N)·Σ log p̂(x_i) with a
//    product-Gaussian kernel that includes the self term. Bandwidths follow
//    Silverman's rule per dimension: h = 1.06·σ·N^{−1/5} for 1-D inputs and
//    the Scott factor h_d = σ_d·N^{−1/6} per dimension for 2-D inputs.
//  - Mutual information is I(a;b) = H(a) + H(b) − H(a,b) in nats, clamped at a
//    −0.02 estimator noise floor with the raw value reported alongside. Exact
//    affine dependence between a and b would make the plug-in estimate
//    meaningless, so such pairs return a finite sentinel (10 nats) and a
//    deterministic-pair flag instead.
//  - The 2-NN estimator d̂ = [(1/N)·Σ log(r_{i,2}/r_{i,1})]^{−1} is computed on
//    the full sample (exact duplicates dropped first) and additionally on three
//    disjoint deterministic splits; log-ratios are accumulated in sorted order
//    so d_hat is bit-exactly invariant under sample reordering.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lyt/common.hpp"
#include "lyt/model.hpp"

namespace lyt {

// ---------------------------------------------------------------- linear probe

struct ProbeResult {
    Mat w;                        // d_z × d_s readout (prediction = z·w + intercept)
    std::vector<real> intercept;  // d_s
    std::vector<real> r2;         // per-variable coefficient of determination
    real amse = 0;                // (1/T)·Σ_t ‖s_t − ŝ_t‖²
    std::vector<std::size_t> ranked_dims;  // filled by probe_and_select
    std::vector<std::size_t> selected;     // filled by probe_and_select
    bool ridge_fallback = false;  // normal equations needed regularization
};

// Least squares with intercept (columns centered). Rank-deficient or
// under-determined (T ≤ d_z) systems fall back to ridge with λ = 1e-8·trace of
// the normal matrix and set ridge_fallback. A zero-variance target column gets
// R² = 1 when fit exactly and 0 otherwise.
ProbeResult fit_linear_probe(const Mat& z, const Mat& s);

enum class RankCriterion { R2, MI };

// Per-dimension ranking score: max over target columns of the pair score
// (squared correlation for R2, clamped KDE estimate for MI). Degenerate
// pairs contribute nothing; a dimension with no usable pair scores 0.
std::vector<real> dimension_scores(const Mat& z, const Mat& s, RankCriterion crit);

// Dimensions sorted descending by dimension_scores; ties break by ascending
// index (stable). Never throws on degenerate columns.
std::vector<std::size_t> rank_dimensions(const Mat& z, const Mat& s, RankCriterion crit);

// Top n_select dims of the ranking. n_select = 0 picks the count automatically
// by the largest gap in the sorted score sequence (elbow rule).
std::vector<std::size_t> select_dims(const Mat& z, const Mat& s, RankCriterion crit,
                                     std::size_t n_select);

// fit_linear_probe on the selected columns, with ranked_dims/selected filled in.
ProbeResult probe_and_select(const Mat& z, const Mat& s, RankCriterion crit,
                             std::size_t n_select);

// ---------------------------------------------------- entropy / mutual information

// Differential entropy in nats of N samples × k dims, k ∈ {1, 2}, N ≥ 50.
// Zero-variance dimensions are degenerate input (ContractError).
real kde_entropy(const Mat& x);

struct MIPair {
    real value = 0;              // clamped at −0.02 (or the 10-nat sentinel)
    real raw = 0;                // unclamped plug-in estimate
    bool deterministic = false;  // b is an exact affine image of a
};

MIPair mutual_information(const std::vector<real>& a, const std::vector<real>& b);

struct MIResult {
    Mat pairwise;                             // d_z × d_s clamped values
    Mat raw;                                  // unclamped estimates
    std::vector<std::uint8_t> deterministic;  // row-major flags
    real total = 0;                           // exact sum of pairwise entries
};

MIResult total_mi(const Mat& z, const Mat& s);

// ------------------------------------------------------------ intrinsic dimension

struct IDResult {
    real d_hat = 0;              // full-sample estimate (after duplicate removal)
    std::vector<real> ratios;    // r_{i,2}/r_{i,1} per retained sample
    std::vector<real> splits;    // three disjoint-split estimates (empty if N < 30)
    real split_mean = 0;         // mean of splits (d_hat when splits are empty)
    real split_std = 0;          // sample std of splits
    std::size_t dropped_duplicates = 0;
};

// Needs at least 3 distinct points (two neighbors per point).
IDResult intrinsic_dimension_2nn(const Mat& z);

// ------------------------------------------------------------ distractor overlap

// Mean per-step distance between affinely aligned latent trajectories of the
// same underlying state under different distractor draws, normalized by the
// first run's trajectory diameter. 0 = perfect overlap. selected = {} uses all
// columns.
real disentanglement_overlap(const std::vector<Mat>& runs,
                             const std::vector<std::size_t>& selected = {});
real disentanglement_overlap(const std::vector<LatentSequence>& runs,
                             const std::vector<std::size_t>& selected = {});

}  // namespace lyt
