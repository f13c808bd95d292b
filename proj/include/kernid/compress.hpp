#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "kernid/errors.hpp"
#include "kernid/geometry.hpp"
#include "kernid/kernel.hpp"
#include "kernid/lowrank.hpp"
#include "kernid/sampling.hpp"
#include "kernid/util.hpp"

namespace kernid {

/// Rank selection for a compression run: either the epsilon-rank of the
/// subsample's spectrum (optionally measured against a fixed reference
/// sigma_1, e.g. that of the full matrix) or a fixed rank.
struct RankRule {
    std::optional<double> eps;
    std::optional<Eigen::Index> fixed_r;
    std::optional<double> reference_sigma1;

    static RankRule from_eps(double eps) { return {eps, std::nullopt, std::nullopt}; }
    static RankRule from_fixed(Eigen::Index r) { return {std::nullopt, r, std::nullopt}; }

    Eigen::Index resolve(const Eigen::VectorXd& sv) const {
        if (fixed_r) {
            if (*fixed_r < 0) throw RangeError("rank rule: fixed rank must be nonnegative");
            return std::min<Eigen::Index>(*fixed_r, sv.size());
        }
        if (!eps) throw ConfigError("rank rule: either eps or fixed_r must be set");
        return epsilon_rank(sv, *eps, reference_sigma1);
    }
};

/// How spectral norms are evaluated during error measurement: exactly (via the
/// SVD of a materialized matrix) while min(m, n) <= 1000 and the entry count
/// stays within the memory budget, by power iteration (relative tolerance
/// 1e-6, capped) otherwise.
struct NormPolicy {
    double memory_budget_values = 2e8;
    double power_tol = 1e-6;
    int power_cap = 1000;

    bool exact_allowed(Eigen::Index rows, Eigen::Index cols) const {
        return std::min(rows, cols) <= 1000 &&
               static_cast<double>(rows) * static_cast<double>(cols) <= memory_budget_values;
    }
};

struct StageTimings {
    double sample_ms = 0.0;
    double factor_ms = 0.0;
    double error_ms = 0.0;
};

enum class CompressionMethod { ID, SVD };

/// Single-trial record of a compression run.
struct CompressionReport {
    CompressionMethod method = CompressionMethod::ID;
    SamplingScheme scheme;
    double fraction = 0.0;
    Eigen::Index rank = 0;
    double rel_error = 0.0;
    std::optional<double> mc_error;
    std::optional<double> bound_id;       // sqrt(1 + n r (n-r)) sigma_{r+1}(Ksub)
    std::optional<double> bound_sampling; // reconstruction bound, when sigma_{r+1}(K) is known
    std::uint64_t seed = 0;
    StageTimings timings;
    bool rank_zero = false;               // everything fell below tolerance; K_hat = 0
    double sigma_r1_sample = 0.0;         // sigma_{r+1} of the subsample (0 past its rank)
    double sigma1_sample = 0.0;
};

/// Extra inputs for report enrichment; the full matrix's spectrum, when
/// supplied, enables the sampling-bound column at the resolved rank.
/// theorem_eps is the epsilon the bound is evaluated at.
struct CompressOptions {
    NormPolicy norms;
    std::optional<Eigen::VectorXd> full_spectrum;
    std::optional<double> k_norm; // precomputed ||K||_2, reused across runs
    double theorem_eps = 0.5;
};

/// Source charges with a cached Euclidean norm.
struct ChargeVector {
    Eigen::VectorXd q;
    double norm = 0.0;

    static ChargeVector from(Eigen::VectorXd values) {
        ChargeVector cv;
        cv.norm = values.norm();
        cv.q = std::move(values);
        return cv;
    }
};

/// ID error bound sqrt(1 + n r (n - r)) * sigma_{r+1}.
inline double bound_id_value(Eigen::Index n, Eigen::Index r, double sigma_r1) {
    if (r < 0 || r > n) throw RangeError("bound_id_value: requires 0 <= r <= n");
    const double nn = static_cast<double>(n), rr = static_cast<double>(r);
    return std::sqrt(1.0 + nn * rr * (nn - rr)) * sigma_r1;
}

/// Total matvec error bound ||q|| [ sigma_{r+1}(K) +
///   sqrt(1 + (1+eps) X m/s) sigma_{r+1}(K) + sqrt(1 + n r (n-r)) sigma_{r+1}(Ksub) ],
/// where X = (1-eps)^2 as printed; corrected_middle = true uses (1-eps)^-2,
/// consistent with the one-sided reconstruction bound.
inline double bound_full_error(Eigen::Index m, Eigen::Index n, Eigen::Index s_count, Eigen::Index r,
                               double eps, double sigma_r1_K, double sigma_r1_Ks, double q_norm,
                               bool corrected_middle = false) {
    if (s_count < 1) throw RangeError("bound_full_error: requires s_count >= 1");
    if (!(eps > 0.0 && eps < 1.0)) throw RangeError("bound_full_error: requires eps in (0, 1)");
    const double ratio = static_cast<double>(m) / static_cast<double>(s_count);
    const double one_minus = 1.0 - eps;
    const double x = corrected_middle ? 1.0 / (one_minus * one_minus) : one_minus * one_minus;
    const double middle = std::sqrt(1.0 + (1.0 + eps) * x * ratio) * sigma_r1_K;
    return q_norm * (sigma_r1_K + middle + bound_id_value(n, r, sigma_r1_Ks));
}

namespace detail {

inline Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& K, const std::vector<Eigen::Index>& rows) {
    Eigen::MatrixXd sub(static_cast<Eigen::Index>(rows.size()), K.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] < 0 || rows[i] >= K.rows()) throw RangeError("row sample index out of range");
        sub.row(static_cast<Eigen::Index>(i)) = K.row(rows[i]);
    }
    return sub;
}

/// ||K - Khat||_2 where Khat = C * P, never forming Khat when the policy
/// forbids materialization.
inline double reconstruction_error_norm(const Eigen::MatrixXd& K, const Eigen::MatrixXd& C,
                                        const Eigen::MatrixXd& P, const NormPolicy& policy) {
    if (policy.exact_allowed(K.rows(), K.cols())) {
        Eigen::MatrixXd diff = C * P;
        diff -= K;
        return spectral_norm_exact(diff);
    }
    return power_iteration_norm(
        [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(C * (P * x) - K * x); },
        [&](const Eigen::VectorXd& y) {
            return Eigen::VectorXd(P.transpose() * (C.transpose() * y) - K.transpose() * y);
        },
        K.cols(), policy.power_tol, policy.power_cap);
}

inline double matrix_norm(const Eigen::MatrixXd& K, const NormPolicy& policy) {
    if (policy.exact_allowed(K.rows(), K.cols())) return spectral_norm_exact(K);
    return power_iteration_norm(K, policy.power_tol, policy.power_cap);
}

} // namespace detail

/// Subsample rows of K, factor the subsample with an ID, and measure the
/// reconstruction error of K (using the full columns K[:, skeleton]) in the
/// relative spectral norm. A rank-0 outcome (all singular values below the
/// tolerance) reports rel_error = 1 against the zero reconstruction and is
/// flagged, not thrown.
inline std::pair<IDFactorization, CompressionReport> compress_id(const Eigen::MatrixXd& K,
                                                                 const RowSample& sample,
                                                                 const RankRule& rule,
                                                                 const CompressOptions& opts = {}) {
    if (sample.indices.empty()) throw RangeError("compress_id: empty row sample");
    CompressionReport rep;
    rep.method = CompressionMethod::ID;
    rep.fraction = sample.fraction;
    rep.seed = sample.seed;

    double t0 = now_ms();
    const Eigen::MatrixXd sub = detail::gather_rows(K, sample.indices);
    rep.timings.sample_ms = now_ms() - t0;

    t0 = now_ms();
    const Eigen::VectorXd sv = singular_values(sub);
    const Eigen::Index r = rule.resolve(sv);
    rep.rank = r;
    rep.sigma1_sample = sv(0);
    rep.sigma_r1_sample = (r < sv.size()) ? sv(r) : 0.0;
    rep.bound_id = bound_id_value(K.cols(), r, rep.sigma_r1_sample);

    IDFactorization id;
    if (r == 0) {
        rep.rank_zero = true;
        rep.timings.factor_ms = now_ms() - t0;
        rep.rel_error = 1.0; // zero-matrix reconstruction
    } else {
        id = interpolative_decomposition(sub, r);
        rep.timings.factor_ms = now_ms() - t0;
        t0 = now_ms();
        const Eigen::MatrixXd C = [&] {
            Eigen::MatrixXd cols(K.rows(), r);
            for (Eigen::Index j = 0; j < r; ++j) cols.col(j) = K.col(id.skeleton[static_cast<std::size_t>(j)]);
            return cols;
        }();
        const double num = detail::reconstruction_error_norm(K, C, id.projection, opts.norms);
        const double den = opts.k_norm ? *opts.k_norm : detail::matrix_norm(K, opts.norms);
        rep.rel_error = (den > 0.0) ? num / den : 0.0;
        rep.timings.error_ms = now_ms() - t0;
    }
    if (opts.full_spectrum) {
        const double sig = (r < opts.full_spectrum->size()) ? (*opts.full_spectrum)(r) : 0.0;
        rep.bound_sampling = reconstruction_bound(
            K.rows(), static_cast<Eigen::Index>(sample.indices.size()), opts.theorem_eps, sig);
    }
    return {std::move(id), std::move(rep)};
}

/// SVD comparison path: the right singular basis V_r of the subsample, with
/// rel_error = ||K - K V_r V_r^T||_2 / ||K||_2.
inline std::pair<Eigen::MatrixXd, CompressionReport> compress_svd(const Eigen::MatrixXd& K,
                                                                  const RowSample& sample,
                                                                  const RankRule& rule,
                                                                  const CompressOptions& opts = {}) {
    if (sample.indices.empty()) throw RangeError("compress_svd: empty row sample");
    CompressionReport rep;
    rep.method = CompressionMethod::SVD;
    rep.fraction = sample.fraction;
    rep.seed = sample.seed;

    double t0 = now_ms();
    const Eigen::MatrixXd sub = detail::gather_rows(K, sample.indices);
    rep.timings.sample_ms = now_ms() - t0;

    t0 = now_ms();
    RightFactor rf = right_factor(sub);
    const Eigen::Index r = rule.resolve(rf.singular_values);
    rep.rank = r;
    rep.sigma1_sample = rf.singular_values(0);
    rep.sigma_r1_sample = (r < rf.singular_values.size()) ? rf.singular_values(r) : 0.0;
    rep.timings.factor_ms = now_ms() - t0;

    Eigen::MatrixXd Vr;
    t0 = now_ms();
    if (r == 0) {
        rep.rank_zero = true;
        Vr = Eigen::MatrixXd::Zero(K.cols(), 0);
        rep.rel_error = 1.0;
    } else {
        Vr = rf.V.leftCols(r);
        const Eigen::MatrixXd B = K * Vr; // m x r
        double num;
        if (opts.norms.exact_allowed(K.rows(), K.cols())) {
            Eigen::MatrixXd diff = B * Vr.transpose();
            diff -= K;
            num = spectral_norm_exact(diff);
        } else {
            num = power_iteration_norm(
                [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(B * (Vr.transpose() * x) - K * x); },
                [&](const Eigen::VectorXd& y) {
                    return Eigen::VectorXd(Vr * (B.transpose() * y) - K.transpose() * y);
                },
                K.cols(), opts.norms.power_tol, opts.norms.power_cap);
        }
        const double den = opts.k_norm ? *opts.k_norm : detail::matrix_norm(K, opts.norms);
        rep.rel_error = (den > 0.0) ? num / den : 0.0;
    }
    rep.timings.error_ms = now_ms() - t0;
    if (opts.full_spectrum) {
        const double sig = (r < opts.full_spectrum->size()) ? (*opts.full_spectrum)(r) : 0.0;
        rep.bound_sampling = reconstruction_bound(
            K.rows(), static_cast<Eigen::Index>(sample.indices.size()), opts.theorem_eps, sig);
    }
    return {std::move(Vr), std::move(rep)};
}

/// Monte Carlo error estimates: for each repetition, Bernoulli(s_mc)-select
/// rows, evaluate the same rows of the reconstruction through `khat_row`, and
/// return the relative spectral-norm error on that row subset. An empty draw
/// is retried once with a derived seed.
inline std::vector<double> mc_error(const Eigen::MatrixXd& K,
                                    const std::function<Eigen::VectorXd(Eigen::Index)>& khat_row,
                                    double s_mc, int n_mc, std::uint64_t seed,
                                    const NormPolicy& policy = {}) {
    if (!(s_mc > 0.0 && s_mc <= 1.0)) throw RangeError("mc_error: requires s_mc in (0, 1]");
    if (n_mc < 1) throw RangeError("mc_error: requires n_mc >= 1");
    std::vector<double> estimates;
    estimates.reserve(static_cast<std::size_t>(n_mc));
    SamplingScheme bern{SchemeKind::Bernoulli};
    SampleContext ctx;
    ctx.m = K.rows();
    for (int rep = 0; rep < n_mc; ++rep) {
        RowSample rows = sample_rows(bern, ctx, s_mc, derive_seed(seed, static_cast<std::uint64_t>(rep)));
        if (rows.indices.empty())
            rows = sample_rows(bern, ctx, s_mc, derive_seed(seed, static_cast<std::uint64_t>(rep), 1));
        if (rows.indices.empty())
            throw Error("mc_error: Bernoulli draw empty twice; s_mc is too small for this matrix");
        Eigen::MatrixXd ks = detail::gather_rows(K, rows.indices);
        Eigen::MatrixXd diff(ks.rows(), ks.cols());
        for (Eigen::Index i = 0; i < ks.rows(); ++i)
            diff.row(i) = khat_row(rows.indices[static_cast<std::size_t>(i)]).transpose() - ks.row(i);
        const double den = detail::matrix_norm(ks, policy);
        const double num = detail::matrix_norm(diff, policy);
        estimates.push_back(den > 0.0 ? num / den : (num > 0.0 ? std::numeric_limits<double>::infinity() : 0.0));
    }
    return estimates;
}

/// Evaluates the skeleton matvec u_i = sum_j Ker(y_i, xskel_j) (P q)_j at
/// O(nr + mr) kernel cost, never materializing K.
inline Eigen::VectorXd apply_skeleton(const IDFactorization& id, const ChargeVector& charges,
                                      const KernelSpec& spec, const PointSet& targets,
                                      const PointSet& skeleton_points) {
    if (skeleton_points.rows() != id.rank)
        throw DimensionError("apply_skeleton: skeleton point count disagrees with the ID rank");
    if (charges.q.size() != id.projection.cols())
        throw DimensionError("apply_skeleton: charge count disagrees with the projection width");
    const Eigen::VectorXd q_skel = id.projection * charges.q;
    Eigen::VectorXd u = Eigen::VectorXd::Zero(targets.rows());
    for (Eigen::Index i = 0; i < targets.rows(); ++i) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < skeleton_points.rows(); ++j)
            acc += eval_kernel(spec, targets.row(i), skeleton_points.row(j)) * q_skel(j);
        u(i) = acc;
    }
    return u;
}

struct InteractionFractions {
    double self_frac = 0.0;
    double nn_frac = 0.0;
    double far_frac = 0.0;
};

/// Spectral-norm fractions of the source-source, neighbor-source and
/// far-field-source blocks of the N x n matrix of all points against the n
/// sources closest to x_c (the next n closest are the neighbors).
inline InteractionFractions interaction_fractions(const PointSet& ps, const KernelSpec& spec,
                                                  const Eigen::VectorXd& x_c, Eigen::Index n,
                                                  const NormPolicy& policy = {}) {
    const Eigen::Index N = ps.rows();
    if (N < 2 * n) throw RangeError("interaction_fractions: requires N >= 2n");
    Eigen::VectorXd dist(N);
    for (Eigen::Index i = 0; i < N; ++i) dist(i) = (ps.row(i).transpose() - x_c).norm();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(N));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        if (dist(a) != dist(b)) return dist(a) < dist(b);
        return a < b;
    });

    auto take = [&](Eigen::Index from, Eigen::Index count) {
        PointSet block(count, ps.cols());
        for (Eigen::Index i = 0; i < count; ++i) block.row(i) = ps.row(order[static_cast<std::size_t>(from + i)]);
        return block;
    };
    const PointSet sources = take(0, n);
    const PointSet neighbors = take(n, n);
    const PointSet far = take(2 * n, N - 2 * n);

    const Eigen::MatrixXd K_S = kernel_matrix(spec, sources, sources);
    const Eigen::MatrixXd K_N = kernel_matrix(spec, neighbors, sources);
    const Eigen::MatrixXd K_F = (far.rows() > 0) ? kernel_matrix(spec, far, sources) : Eigen::MatrixXd();

    // ||K||_2 of the stacked matrix without holding all blocks at once is not
    // worth the complication at these sizes; stack and measure.
    Eigen::MatrixXd K(N, n);
    K.topRows(n) = K_S;
    K.middleRows(n, n) = K_N;
    if (far.rows() > 0) K.bottomRows(N - 2 * n) = K_F;

    const double total = detail::matrix_norm(K, policy);
    InteractionFractions f;
    if (total > 0.0) {
        f.self_frac = detail::matrix_norm(K_S, policy) / total;
        f.nn_frac = detail::matrix_norm(K_N, policy) / total;
        f.far_frac = (far.rows() > 0) ? detail::matrix_norm(K_F, policy) / total : 0.0;
    }
    return f;
}

} // namespace kernid
