#include "lyt/probe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lyt/rng.hpp"

namespace lyt {

namespace {

constexpr real kMiFloor = -0.02;
constexpr real kMiSentinel = 10.0;
constexpr real kTwoPi = 6.283185307179586476925286766559;

void require_finite(const Mat& m, const char* who) {
    for (real v : m.v)
        if (!std::isfinite(v)) throw NumericError(std::string(who) + ": non-finite input");
}

std::vector<real> col_means(const Mat& m) {
    std::vector<real> mu(m.cols, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c) mu[c] += m(r, c);
    for (real& v : mu) v /= real(m.rows);
    return mu;
}

Mat centered(const Mat& m, const std::vector<real>& mu) {
    Mat out = m;
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c) out(r, c) -= mu[c];
    return out;
}

// Solves A·X = B for symmetric positive-definite A via Cholesky; returns false
// on a non-positive pivot (rank deficiency).
bool cholesky_solve(Mat a, Mat& b) {
    const std::size_t n = a.rows;
    for (std::size_t k = 0; k < n; ++k) {
        real d = a(k, k);
        for (std::size_t j = 0; j < k; ++j) d -= a(k, j) * a(k, j);
        if (!(d > 0) || !std::isfinite(d)) return false;
        const real l = std::sqrt(d);
        a(k, k) = l;
        for (std::size_t i = k + 1; i < n; ++i) {
            real s = a(i, k);
            for (std::size_t j = 0; j < k; ++j) s -= a(i, j) * a(k, j);
            a(i, k) = s / l;
        }
    }
    // forward then backward substitution per right-hand-side column
    for (std::size_t c = 0; c < b.cols; ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            real s = b(i, c);
            for (std::size_t j = 0; j < i; ++j) s -= a(i, j) * b(j, c);
            b(i, c) = s / a(i, i);
        }
        for (std::size_t ii = n; ii-- > 0;) {
            real s = b(ii, c);
            for (std::size_t j = ii + 1; j < n; ++j) s -= a(j, ii) * b(j, c);
            b(ii, c) = s / a(ii, ii);
        }
    }
    return true;
}

// Least squares X·W ≈ Y on centered data; sets ridge flag when regularization
// was needed. X is T×p, Y is T×q, W comes back p×q.
Mat normal_solve(const Mat& x, const Mat& y, bool force_ridge, bool& ridge_used) {
    const std::size_t p = x.cols;
    Mat g(p, p);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = i; j < p; ++j) {
            real s = 0;
            for (std::size_t t = 0; t < x.rows; ++t) s += x(t, i) * x(t, j);
            g(i, j) = g(j, i) = s;
        }
    real trace = 0;
    for (std::size_t i = 0; i < p; ++i) trace += g(i, i);
    if (trace <= 0) {  // constant regressors: no signal, zero weights
        ridge_used = true;
        return Mat(p, y.cols);
    }
    Mat b(p, y.cols);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t c = 0; c < y.cols; ++c) {
            real s = 0;
            for (std::size_t t = 0; t < x.rows; ++t) s += x(t, i) * y(t, c);
            b(i, c) = s;
        }
    if (!force_ridge) {
        Mat sol = b;
        Mat gc = g;
        if (cholesky_solve(gc, sol)) return sol;
    }
    ridge_used = true;
    const real lambda = 1e-8 * trace;
    for (std::size_t i = 0; i < p; ++i) g(i, i) += lambda;
    if (!cholesky_solve(g, b)) throw NumericError("probe: normal equations unsolvable");
    return b;
}

real column_sd(const std::vector<real>& x) {
    const std::size_t n = x.size();
    real mu = 0;
    for (real v : x) mu += v;
    mu /= real(n);
    real ss = 0;
    for (real v : x) ss += (v - mu) * (v - mu);
    return std::sqrt(ss / real(n - 1));
}

real twonn_from_points(const Mat& pts) {
    const std::size_t n = pts.rows;
    std::vector<real> logs(n);
    for (std::size_t i = 0; i < n; ++i) {
        real r1 = std::numeric_limits<real>::infinity();
        real r2 = std::numeric_limits<real>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            real d2 = 0;
            for (std::size_t c = 0; c < pts.cols; ++c) {
                const real d = pts(i, c) - pts(j, c);
                d2 += d * d;
            }
            if (d2 < r1) {
                r2 = r1;
                r1 = d2;
            } else if (d2 < r2) {
                r2 = d2;
            }
        }
        logs[i] = 0.5 * (std::log(r2) - std::log(r1));  // distances enter as ratios
    }
    std::sort(logs.begin(), logs.end());  // canonical order: permutation-exact sum
    real sum = 0;
    for (real v : logs) sum += v;
    if (!(sum > 0)) throw NumericError("2-NN: degenerate neighbor-ratio distribution");
    return real(n) / sum;
}

}  // namespace

// ---------------------------------------------------------------- linear probe

ProbeResult fit_linear_probe(const Mat& z, const Mat& s) {
    if (z.rows != s.rows) throw DimensionError("probe: Z and S row counts differ");
    if (z.rows < 2 || z.cols < 1 || s.cols < 1)
        throw DimensionError("probe: need at least 2 samples and 1 column");
    require_finite(z, "probe");
    require_finite(s, "probe");

    ProbeResult out;
    const auto mu_z = col_means(z);
    const auto mu_s = col_means(s);
    const Mat zc = centered(z, mu_z);
    const Mat sc = centered(s, mu_s);
    out.w = normal_solve(zc, sc, /*force_ridge=*/z.rows <= z.cols, out.ridge_fallback);

    out.intercept.resize(s.cols);
    for (std::size_t c = 0; c < s.cols; ++c) {
        real dot = 0;
        for (std::size_t i = 0; i < z.cols; ++i) dot += mu_z[i] * out.w(i, c);
        out.intercept[c] = mu_s[c] - dot;
    }

    out.r2.resize(s.cols);
    std::vector<real> ss_res(s.cols, 0.0), ss_tot(s.cols, 0.0);
    real total_res = 0;
    for (std::size_t t = 0; t < z.rows; ++t)
        for (std::size_t c = 0; c < s.cols; ++c) {
            real pred = 0;
            for (std::size_t i = 0; i < z.cols; ++i) pred += zc(t, i) * out.w(i, c);
            const real r = sc(t, c) - pred;
            ss_res[c] += r * r;
            ss_tot[c] += sc(t, c) * sc(t, c);
            total_res += r * r;
        }
    for (std::size_t c = 0; c < s.cols; ++c)
        out.r2[c] = ss_tot[c] > 0 ? 1.0 - ss_res[c] / ss_tot[c]
                                  : (ss_res[c] < 1e-18 ? 1.0 : 0.0);
    out.amse = total_res / real(z.rows);
    return out;
}

// ------------------------------------------------------------------- ranking

namespace {

// max-over-targets score of one latent dimension
real dim_score(const Mat& z, const Mat& s, std::size_t dim, RankCriterion crit) {
    std::vector<real> a(z.rows);
    for (std::size_t t = 0; t < z.rows; ++t) a[t] = z(t, dim);
    real best = 0;
    bool any = false;
    for (std::size_t j = 0; j < s.cols; ++j) {
        std::vector<real> b(s.rows);
        for (std::size_t t = 0; t < s.rows; ++t) b[t] = s(t, j);
        real score;
        if (crit == RankCriterion::R2) {
            // single-regressor R² with intercept = squared correlation
            real ma = 0, mb = 0;
            for (std::size_t t = 0; t < a.size(); ++t) {
                ma += a[t];
                mb += b[t];
            }
            ma /= real(a.size());
            mb /= real(b.size());
            real saa = 0, sbb = 0, sab = 0;
            for (std::size_t t = 0; t < a.size(); ++t) {
                saa += (a[t] - ma) * (a[t] - ma);
                sbb += (b[t] - mb) * (b[t] - mb);
                sab += (a[t] - ma) * (b[t] - mb);
            }
            if (saa <= 0 || sbb <= 0) continue;  // degenerate pair: no evidence
            score = (sab * sab) / (saa * sbb);
        } else {
            real saa = column_sd(a), sbb = column_sd(b);
            if (!(saa > 0) || !(sbb > 0)) continue;
            score = mutual_information(a, b).value;
        }
        if (!any || score > best) best = score;
        any = true;
    }
    return any ? best : 0.0;
}

}  // namespace

std::vector<real> dimension_scores(const Mat& z, const Mat& s, RankCriterion crit) {
    if (z.rows != s.rows) throw DimensionError("rank_dimensions: row counts differ");
    if (z.rows < 2) throw DimensionError("rank_dimensions: need at least 2 samples");
    require_finite(z, "rank_dimensions");
    require_finite(s, "rank_dimensions");
    std::vector<real> scores(z.cols);
    for (std::size_t d = 0; d < z.cols; ++d) scores[d] = dim_score(z, s, d, crit);
    return scores;
}

std::vector<std::size_t> rank_dimensions(const Mat& z, const Mat& s, RankCriterion crit) {
    const auto scores = dimension_scores(z, s, crit);
    std::vector<std::size_t> order(z.cols);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

std::vector<std::size_t> select_dims(const Mat& z, const Mat& s, RankCriterion crit,
                                     std::size_t n_select) {
    if (n_select > z.cols) throw ContractError("select_dims: n_select exceeds latent width");
    const auto scores = dimension_scores(z, s, crit);
    std::vector<std::size_t> order(z.cols);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::size_t n = n_select;
    if (n == 0) {  // elbow: cut at the largest drop in the sorted score sequence
        n = 1;
        real best_gap = -1;
        for (std::size_t i = 0; i + 1 < order.size(); ++i) {
            const real gap = scores[order[i]] - scores[order[i + 1]];
            if (gap > best_gap) {
                best_gap = gap;
                n = i + 1;
            }
        }
    }
    return std::vector<std::size_t>(order.begin(), order.begin() + n);
}

ProbeResult probe_and_select(const Mat& z, const Mat& s, RankCriterion crit,
                             std::size_t n_select) {
    std::vector<std::size_t> ranked = rank_dimensions(z, s, crit);
    std::vector<std::size_t> sel = select_dims(z, s, crit, n_select);
    ProbeResult out = fit_linear_probe(z.select_cols(sel), s);
    out.ranked_dims = std::move(ranked);
    out.selected = std::move(sel);
    return out;
}

// ----------------------------------------------------- entropy / mutual information

real kde_entropy(const Mat& x) {
    if (x.rows < 50) throw ContractError("kde_entropy: need at least 50 samples");
    if (x.cols < 1 || x.cols > 2) throw ContractError("kde_entropy: k must be 1 or 2");
    require_finite(x, "kde_entropy");

    const std::size_t n = x.rows, k = x.cols;
    std::vector<real> h(k);
    real log_norm = 0;  // Σ_d log(h_d·√(2π))
    for (std::size_t d = 0; d < k; ++d) {
        std::vector<real> col(n);
        for (std::size_t t = 0; t < n; ++t) col[t] = x(t, d);
        const real sd = column_sd(col);
        if (!(sd > 0)) throw ContractError("kde_entropy: zero-variance dimension");
        h[d] = (k == 1) ? 1.06 * sd * std::pow(real(n), -0.2)
                        : sd * std::pow(real(n), -1.0 / 6.0);
        log_norm += std::log(h[d] * std::sqrt(kTwoPi));
    }

    std::vector<real> le(n);
    real acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
        real mx = -std::numeric_limits<real>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            real q = 0;
            for (std::size_t d = 0; d < k; ++d) {
                const real u = (x(i, d) - x(j, d)) / h[d];
                q += u * u;
            }
            le[j] = -0.5 * q;
            if (le[j] > mx) mx = le[j];
        }
        real s = 0;
        for (std::size_t j = 0; j < n; ++j) s += std::exp(le[j] - mx);
        acc += mx + std::log(s) - std::log(real(n)) - log_norm;
    }
    return -acc / real(n);
}

MIPair mutual_information(const std::vector<real>& a, const std::vector<real>& b) {
    if (a.size() != b.size()) throw DimensionError("mutual_information: length mismatch");
    const std::size_t n = a.size();
    Mat ma(n, 1), mb(n, 1), joint(n, 2);
    for (std::size_t t = 0; t < n; ++t) {
        ma(t, 0) = a[t];
        mb(t, 0) = b[t];
        joint(t, 0) = a[t];
        joint(t, 1) = b[t];
    }
    MIPair out;
    out.raw = kde_entropy(ma) + kde_entropy(mb) - kde_entropy(joint);

    // exact affine dependence makes the plug-in estimate meaningless
    real sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    for (std::size_t t = 0; t < n; ++t) {
        sa += a[t];
        sb += b[t];
    }
    sa /= real(n);
    sb /= real(n);
    for (std::size_t t = 0; t < n; ++t) {
        saa += (a[t] - sa) * (a[t] - sa);
        sbb += (b[t] - sb) * (b[t] - sb);
        sab += (a[t] - sa) * (b[t] - sb);
    }
    // residual accumulated directly: the sbb − sab²/saa form cancels away all
    // significant digits for exact affine pairs
    real res = 0;
    if (saa > 0) {
        const real beta = sab / saa;
        for (std::size_t t = 0; t < n; ++t) {
            const real r = (b[t] - sb) - beta * (a[t] - sa);
            res += r * r;
        }
    }
    out.deterministic = saa > 0 && sbb > 0 && res <= 1e-18 * sbb;
    out.value = out.deterministic ? kMiSentinel : std::max(out.raw, kMiFloor);
    return out;
}

MIResult total_mi(const Mat& z, const Mat& s) {
    if (z.rows != s.rows) throw DimensionError("total_mi: row counts differ");
    MIResult out;
    out.pairwise = Mat(z.cols, s.cols);
    out.raw = Mat(z.cols, s.cols);
    out.deterministic.assign(z.cols * s.cols, 0);
    std::vector<real> a(z.rows), b(z.rows);
    for (std::size_t i = 0; i < z.cols; ++i)
        for (std::size_t j = 0; j < s.cols; ++j) {
            for (std::size_t t = 0; t < z.rows; ++t) {
                a[t] = z(t, i);
                b[t] = s(t, j);
            }
            const MIPair p = mutual_information(a, b);
            out.pairwise(i, j) = p.value;
            out.raw(i, j) = p.raw;
            out.deterministic[i * s.cols + j] = p.deterministic ? 1 : 0;
        }
    real total = 0;
    for (real v : out.pairwise.v) total += v;
    out.total = total;
    return out;
}

// ------------------------------------------------------------ intrinsic dimension

IDResult intrinsic_dimension_2nn(const Mat& z) {
    if (z.rows < 3) throw ContractError("2-NN: need at least 3 points");
    if (z.cols < 1) throw DimensionError("2-NN: empty points");
    require_finite(z, "2-NN");

    // drop exact duplicates, keeping first occurrences
    Mat pts(0, z.cols);
    pts.v.reserve(z.v.size());
    std::size_t dropped = 0;
    for (std::size_t i = 0; i < z.rows; ++i) {
        bool dup = false;
        for (std::size_t u = 0; u < pts.rows && !dup; ++u) {
            dup = true;
            for (std::size_t c = 0; c < z.cols; ++c)
                if (pts(u, c) != z(i, c)) {
                    dup = false;
                    break;
                }
        }
        if (dup) {
            ++dropped;
        } else {
            pts.v.insert(pts.v.end(), z.row(i), z.row(i) + z.cols);
            ++pts.rows;
        }
    }
    if (pts.rows < 3)
        throw ContractError("2-NN: fewer than 3 distinct points");

    IDResult out;
    out.dropped_duplicates = dropped;
    out.d_hat = twonn_from_points(pts);

    out.ratios.resize(pts.rows);
    for (std::size_t i = 0; i < pts.rows; ++i) {
        real r1 = std::numeric_limits<real>::infinity();
        real r2 = std::numeric_limits<real>::infinity();
        for (std::size_t j = 0; j < pts.rows; ++j) {
            if (j == i) continue;
            real d2 = 0;
            for (std::size_t c = 0; c < pts.cols; ++c) {
                const real d = pts(i, c) - pts(j, c);
                d2 += d * d;
            }
            if (d2 < r1) {
                r2 = r1;
                r1 = d2;
            } else if (d2 < r2) {
                r2 = d2;
            }
        }
        out.ratios[i] = std::sqrt(r2 / r1);
    }

    if (pts.rows >= 30) {
        std::vector<std::size_t> idx(pts.rows);
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        Rng rng = Rng::keyed(0, {TAG_SPLIT});
        for (std::size_t i = idx.size(); i-- > 1;)  // Fisher-Yates
            std::swap(idx[i], idx[rng.below(i + 1)]);
        for (std::size_t part = 0; part < 3; ++part) {
            const std::size_t lo = part * pts.rows / 3;
            const std::size_t hi = (part + 1) * pts.rows / 3;
            Mat sub(hi - lo, pts.cols);
            for (std::size_t r = lo; r < hi; ++r)
                for (std::size_t c = 0; c < pts.cols; ++c) sub(r - lo, c) = pts(idx[r], c);
            out.splits.push_back(twonn_from_points(sub));
        }
        real mu = (out.splits[0] + out.splits[1] + out.splits[2]) / 3.0;
        real ss = 0;
        for (real v : out.splits) ss += (v - mu) * (v - mu);
        out.split_mean = mu;
        out.split_std = std::sqrt(ss / 2.0);
    } else {
        out.split_mean = out.d_hat;
        out.split_std = 0;
    }
    return out;
}

// ------------------------------------------------------------ distractor overlap

real disentanglement_overlap(const std::vector<Mat>& runs,
                             const std::vector<std::size_t>& selected) {
    if (runs.size() < 2) throw ContractError("overlap: need at least 2 runs");
    for (const Mat& r : runs) {
        if (r.rows != runs[0].rows || r.cols != runs[0].cols)
            throw DimensionError("overlap: runs have mismatched shapes");
        require_finite(r, "overlap");
    }
    std::vector<std::size_t> sel = selected;
    if (sel.empty())
        for (std::size_t c = 0; c < runs[0].cols; ++c) sel.push_back(c);
    for (std::size_t c : sel)
        if (c >= runs[0].cols) throw ContractError("overlap: selected dim out of range");

    const Mat ref = runs[0].select_cols(sel);
    const std::size_t t_len = ref.rows, m = ref.cols;
    real diam = 0;
    for (std::size_t i = 0; i < t_len; ++i)
        for (std::size_t j = i + 1; j < t_len; ++j) {
            real d2 = 0;
            for (std::size_t c = 0; c < m; ++c) {
                const real d = ref(i, c) - ref(j, c);
                d2 += d * d;
            }
            diam = std::max(diam, d2);
        }
    diam = std::sqrt(diam);
    if (!(diam > 0)) throw ContractError("overlap: reference trajectory has zero diameter");

    real acc = 0;
    for (std::size_t r = 1; r < runs.size(); ++r) {
        const Mat cur = runs[r].select_cols(sel);
        Mat design(t_len, m + 1);  // [run | 1] for affine alignment
        for (std::size_t t = 0; t < t_len; ++t) {
            for (std::size_t c = 0; c < m; ++c) design(t, c) = cur(t, c);
            design(t, m) = 1.0;
        }
        bool ridge = false;
        const Mat b = normal_solve(design, ref, false, ridge);
        real mean_dist = 0;
        for (std::size_t t = 0; t < t_len; ++t) {
            real d2 = 0;
            for (std::size_t c = 0; c < m; ++c) {
                real pred = 0;
                for (std::size_t i = 0; i <= m; ++i) pred += design(t, i) * b(i, c);
                const real d = pred - ref(t, c);
                d2 += d * d;
            }
            mean_dist += std::sqrt(d2);
        }
        acc += mean_dist / real(t_len);
    }
    return acc / (real(runs.size() - 1) * diam);
}

real disentanglement_overlap(const std::vector<LatentSequence>& runs,
                             const std::vector<std::size_t>& selected) {
    std::vector<Mat> mats;
    mats.reserve(runs.size());
    for (const LatentSequence& r : runs) mats.push_back(r.z);
    return disentanglement_overlap(mats, selected);
}

}  // namespace lyt
