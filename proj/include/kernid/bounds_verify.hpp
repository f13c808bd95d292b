#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "kernid/datagen.hpp"
#include "kernid/errors.hpp"
#include "kernid/lowrank.hpp"
#include "kernid/rng.hpp"
#include "kernid/sampling.hpp"

namespace kernid {

/// One bound-verification trial. `skipped` marks instances whose hypotheses
/// could not be checked (e.g. a rank-deficient sketch), which is distinct
/// from a violated bound.
struct BoundTrialResult {
    std::uint64_t trial_seed = 0;
    double observed = 0.0;
    double bound = 0.0;
    bool satisfied = false;
    double slack_ratio = 0.0;
    bool skipped = false;
};

namespace detail {

inline bool bound_holds(double observed, double bound, double scale) {
    // relative slack plus a floating-point floor for exactly-zero bounds
    return observed <= bound * (1.0 + 1e-8) + 1e-14 * scale;
}

inline Eigen::MatrixXd orthonormal_gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd g(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) g(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
    const Eigen::MatrixXd r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < cols; ++j)
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    return q;
}

/// Orthonormal basis of the column span of B, trimmed to numerical rank.
inline Eigen::MatrixXd range_basis(const Eigen::MatrixXd& B) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(B);
    const Eigen::Index rank = qr.rank();
    if (rank == 0) return Eigen::MatrixXd::Zero(B.rows(), 0);
    return qr.householderQ() * Eigen::MatrixXd::Identity(B.rows(), rank);
}

inline Eigen::MatrixXd synthetic_spectrum_matrix(Eigen::Index m, Eigen::Index n, Eigen::Index r,
                                                 double decay, double tail_scale,
                                                 std::uint64_t seed) {
    if (r < 1 || r > std::min(m, n)) throw RangeError("low-coherence fixture: requires 1 <= r <= min(m, n)");
    const Eigen::Index k = std::min(m, n);
    const Eigen::MatrixXd U = orthonormal_gaussian(m, k, derive_seed(seed, 1));
    const Eigen::MatrixXd V = orthonormal_gaussian(n, k, derive_seed(seed, 2));
    Eigen::VectorXd sv(k);
    for (Eigen::Index i = 0; i < k; ++i)
        sv(i) = (i < r) ? std::pow(decay, static_cast<double>(i))
                        : tail_scale * std::pow(decay, static_cast<double>(r));
    return U * sv.asDiagonal() * V.transpose();
}

} // namespace detail

/// Synthetic test matrix with a prescribed spectrum and Gaussian-orthogonal
/// factors (hence near-minimal coherence with high probability):
/// sigma_i = decay^(i-1) for i <= r, then a flat 1e-8 * decay^r tail.
inline Eigen::MatrixXd make_low_coherence_matrix(Eigen::Index m, Eigen::Index n, Eigen::Index r,
                                                 double decay, std::uint64_t seed) {
    return detail::synthetic_spectrum_matrix(m, n, r, decay, 1e-8, seed);
}

/// Checks the deterministic projection bound: with Omega_1 = V_r^T Omega of
/// full row rank and Pi the orthogonal projector onto range(A Omega),
///   ||(I - Pi) A||^2 <= ||Sigma_2||^2 + ||Sigma_2 Omega_2 pinv(Omega_1)||^2.
/// Rank-deficient Omega_1 marks the trial skipped rather than failed.
inline BoundTrialResult verify_deterministic_bound(const Eigen::MatrixXd& A,
                                                   const Eigen::MatrixXd& Omega, Eigen::Index r,
                                                   std::uint64_t trial_seed = 0) {
    if (Omega.rows() != A.cols()) throw DimensionError("verify_deterministic_bound: Omega must be m x s");
    if (r < 0 || r > std::min(A.rows(), A.cols()))
        throw RangeError("verify_deterministic_bound: requires 0 <= r <= min dims");
    BoundTrialResult res;
    res.trial_seed = trial_seed;

    SVDFactors f = svd(A);
    const Eigen::Index k = f.singular_values.size();
    const double sigma1 = f.singular_values(0);

    if (r > 0) {
        const Eigen::MatrixXd omega1 = f.V.leftCols(r).transpose() * Omega;
        const Eigen::VectorXd osv = singular_values(omega1);
        if (osv.size() < r || osv(r - 1) <= 1e-12 * osv(0)) {
            res.skipped = true;
            res.satisfied = true;
            return res;
        }
    }

    const Eigen::MatrixXd Q = detail::range_basis(A * Omega);
    const Eigen::MatrixXd resid = A - Q * (Q.transpose() * A);
    const double observed = spectral_norm_exact(resid);
    res.observed = observed * observed;

    double bound = 0.0;
    if (r < k) {
        const Eigen::VectorXd tail = f.singular_values.tail(k - r);
        bound = tail(0) * tail(0);
        const Eigen::MatrixXd omega2 = f.V.rightCols(k - r).transpose() * Omega;
        Eigen::MatrixXd pinv_omega1(Omega.cols(), r);
        if (r > 0) {
            Eigen::JacobiSVD<Eigen::MatrixXd> ps(f.V.leftCols(r).transpose() * Omega,
                                                 Eigen::ComputeThinU | Eigen::ComputeThinV);
            Eigen::VectorXd inv = ps.singularValues();
            for (Eigen::Index i = 0; i < inv.size(); ++i)
                inv(i) = (inv(i) > 1e-13 * ps.singularValues()(0)) ? 1.0 / inv(i) : 0.0;
            pinv_omega1 = ps.matrixV() * inv.asDiagonal() * ps.matrixU().transpose();
            const double cross = spectral_norm_exact(tail.asDiagonal() * omega2 * pinv_omega1);
            bound += cross * cross;
        }
    }
    res.bound = bound;
    res.satisfied = detail::bound_holds(res.observed, res.bound, sigma1 * sigma1);
    res.slack_ratio = (res.bound > 0.0) ? res.observed / res.bound : 0.0;
    return res;
}

enum class ReplacementMode { Auto, With, Without };

struct UniformTheoremResult {
    double failure_rate = 0.0;
    int trials_run = 0;
    int violations = 0;
    int infeasible = 0;         // trials where s_required > m in without-replacement mode
    bool used_replacement = false;
    long long s_required_last = 0;
    double gamma_last = 0.0;
};

struct UniformTheoremOptions {
    double decay = 0.6;
    double tail_scale = 1e-8;   // 0 gives exactly rank-r fixtures
    ReplacementMode mode = ReplacementMode::Auto;
};

/// Monte Carlo check of the uniform column-sampling reconstruction theorem on
/// low-coherence fixtures (A is n x m with m > n, sampled by columns). Each
/// trial draws s columns with s from the sample-complexity formula at the
/// matrix's measured coherence and tests the spectral reconstruction bound.
/// When s exceeds m, sampling without replacement is impossible (the theorem
/// is vacuous there) and the trial either switches to with-replacement
/// sampling (Auto: the regime the tail inequality is proved in first) or is
/// reported infeasible.
inline UniformTheoremResult verify_uniform_sampling_theorem(Eigen::Index m, Eigen::Index n,
                                                            Eigen::Index r, double eps, double delta,
                                                            int trials, std::uint64_t seed,
                                                            const UniformTheoremOptions& opts = {}) {
    if (m <= n) throw RangeError("verify_uniform_sampling_theorem: requires m > n (theorem orientation)");
    UniformTheoremResult out;
    for (int t = 0; t < trials; ++t) {
        const std::uint64_t trial_seed = derive_seed(seed, static_cast<std::uint64_t>(t));
        const Eigen::MatrixXd A =
            detail::synthetic_spectrum_matrix(n, m, r, opts.decay, opts.tail_scale, trial_seed);
        const double gamma = coherence(A, r);
        const long long s_req = sample_complexity(m, gamma, r, delta, eps);
        out.gamma_last = gamma;
        out.s_required_last = s_req;

        bool replace = false;
        if (s_req > m) {
            if (opts.mode == ReplacementMode::Without) {
                ++out.infeasible;
                continue;
            }
            replace = true;
        } else {
            replace = (opts.mode == ReplacementMode::With);
        }
        out.used_replacement = out.used_replacement || replace;

        RowSample cols;
        cols.fraction = std::min(1.0, static_cast<double>(s_req) / static_cast<double>(m));
        cols.seed = derive_seed(trial_seed, 7);
        Rng rng(cols.seed);
        if (replace) {
            for (long long k = 0; k < s_req; ++k)
                cols.indices.push_back(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(m))));
        } else {
            std::vector<Eigen::Index> pool(static_cast<std::size_t>(m));
            std::iota(pool.begin(), pool.end(), Eigen::Index{0});
            for (long long k = 0; k < s_req; ++k) {
                const std::size_t j = static_cast<std::size_t>(k) +
                                      static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(m - k)));
                std::swap(pool[static_cast<std::size_t>(k)], pool[j]);
                cols.indices.push_back(pool[static_cast<std::size_t>(k)]);
            }
        }

        Eigen::MatrixXd B(n, static_cast<Eigen::Index>(cols.indices.size()));
        for (std::size_t j = 0; j < cols.indices.size(); ++j) B.col(static_cast<Eigen::Index>(j)) = A.col(cols.indices[j]);
        const Eigen::MatrixXd Q = detail::range_basis(B);
        const double observed = spectral_norm_exact(A - Q * (Q.transpose() * A));

        const Eigen::VectorXd sv = singular_values(A);
        const double sigma_r1 = (r < sv.size()) ? sv(r) : 0.0;
        const double bound = reconstruction_bound(m, static_cast<Eigen::Index>(cols.indices.size()),
                                                  eps, sigma_r1);
        ++out.trials_run;
        if (!detail::bound_holds(observed, bound, sv(0))) ++out.violations;
    }
    out.failure_rate = (out.trials_run > 0)
                           ? static_cast<double>(out.violations) / static_cast<double>(out.trials_run)
                           : 0.0;
    return out;
}

struct ChernoffTailsResult {
    double empirical_lower = 0.0;
    double empirical_upper = 0.0;
    double bound_lower = 0.0;
    double bound_upper = 0.0;
    double L = 0.0; // (m/s) * coherence of the orthonormal factor
};

struct ChernoffBounds {
    double lower = 0.0;
    double upper = 0.0;
};

/// Closed-form matrix Chernoff tail bounds for E[Y] = I and summand cap L:
///   P{lmin(Y) <= 1-eps} <= r [e^-eps / (1-eps)^(1-eps)]^(1/L)
///   P{lmax(Y) >= 1+eps} <= r [e^+eps / (1+eps)^(1+eps)]^(1/L)
inline ChernoffBounds chernoff_tail_bounds(Eigen::Index r, double eps, double L) {
    if (!(eps >= 0.0 && eps < 1.0))
        throw RangeError("chernoff_tail_bounds: requires eps in [0, 1) (shared by both tails)");
    if (!(L > 0.0)) throw RangeError("chernoff_tail_bounds: requires L > 0");
    const double low_exp = -eps - ((1.0 - eps) > 0.0 ? (1.0 - eps) * std::log(1.0 - eps) : 0.0);
    const double up_exp = eps - (1.0 + eps) * std::log1p(eps);
    return {static_cast<double>(r) * std::exp(low_exp / L),
            static_cast<double>(r) * std::exp(up_exp / L)};
}

/// Empirical tails of Y = sum_k (m/s) V_r^T e_j e_j^T V_r (uniform j, E[Y] = I)
/// against the matrix Chernoff bounds r [e^{-+eps}/(1-+eps)^(1-+eps)]^(1/L).
inline ChernoffTailsResult verify_chernoff_tails(Eigen::Index r, Eigen::Index m, Eigen::Index s_count,
                                                 int trials, std::uint64_t seed, double eps,
                                                 bool with_replacement = true) {
    if (r < 1 || m < r) throw RangeError("verify_chernoff_tails: requires 1 <= r <= m");
    if (s_count < 1) throw RangeError("verify_chernoff_tails: requires s_count >= 1");
    if (!with_replacement && s_count > m)
        throw RangeError("verify_chernoff_tails: without replacement requires s <= m");
    if (!(eps >= 0.0 && eps < 1.0))
        throw RangeError("verify_chernoff_tails: requires eps in [0, 1) (shared by both tails)");

    const Eigen::MatrixXd V = detail::orthonormal_gaussian(m, r, derive_seed(seed, 0x564Dull));
    const double gamma = V.rowwise().squaredNorm().maxCoeff();
    const double ratio = static_cast<double>(m) / static_cast<double>(s_count);

    ChernoffTailsResult res;
    res.L = ratio * gamma;
    const ChernoffBounds bounds = chernoff_tail_bounds(r, eps, res.L);
    res.bound_lower = bounds.lower;
    res.bound_upper = bounds.upper;

    int low_hits = 0, up_hits = 0;
    for (int t = 0; t < trials; ++t) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t), 0x54ull));
        std::vector<Eigen::Index> idx;
        idx.reserve(static_cast<std::size_t>(s_count));
        if (with_replacement) {
            for (Eigen::Index k = 0; k < s_count; ++k)
                idx.push_back(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(m))));
        } else {
            std::vector<Eigen::Index> pool(static_cast<std::size_t>(m));
            std::iota(pool.begin(), pool.end(), Eigen::Index{0});
            for (Eigen::Index k = 0; k < s_count; ++k) {
                const std::size_t j = static_cast<std::size_t>(k) +
                                      static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(m - k)));
                std::swap(pool[static_cast<std::size_t>(k)], pool[j]);
                idx.push_back(pool[static_cast<std::size_t>(k)]);
            }
        }
        Eigen::MatrixXd B(s_count, r);
        for (Eigen::Index k = 0; k < s_count; ++k) B.row(k) = V.row(idx[static_cast<std::size_t>(k)]);
        const Eigen::MatrixXd Y = ratio * (B.transpose() * B);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Y);
        const double lmin = eig.eigenvalues().minCoeff();
        const double lmax = eig.eigenvalues().maxCoeff();
        if (lmin <= 1.0 - eps) ++low_hits;
        if (lmax >= 1.0 + eps) ++up_hits;
    }
    res.empirical_lower = static_cast<double>(low_hits) / static_cast<double>(trials);
    res.empirical_upper = static_cast<double>(up_hits) / static_cast<double>(trials);
    return res;
}

/// Checks ||A - Atilde||_2 <= sigma_{r+1}(A) + ||(I - Pi) A||_2, with Atilde
/// the best rank-r approximation of Pi A and Pi the projector onto the span
/// of the sampled columns. Deterministic inequality; holds on every instance.
inline BoundTrialResult verify_projection_lemma(const Eigen::MatrixXd& A, const RowSample& sample,
                                                Eigen::Index r, std::uint64_t trial_seed = 0) {
    if (sample.indices.empty()) throw RangeError("verify_projection_lemma: empty sample");
    if (r < 1 || r > std::min(A.rows(), A.cols()))
        throw RangeError("verify_projection_lemma: requires 1 <= r <= min dims");
    BoundTrialResult res;
    res.trial_seed = trial_seed;
    Eigen::MatrixXd B(A.rows(), static_cast<Eigen::Index>(sample.indices.size()));
    for (std::size_t j = 0; j < sample.indices.size(); ++j) {
        if (sample.indices[j] < 0 || sample.indices[j] >= A.cols())
            throw RangeError("verify_projection_lemma: column index out of range");
        B.col(static_cast<Eigen::Index>(j)) = A.col(sample.indices[j]);
    }
    const Eigen::MatrixXd Q = detail::range_basis(B);
    const Eigen::MatrixXd PiA = Q * (Q.transpose() * A);
    SVDFactors f = svd(PiA);
    const Eigen::Index rr = std::min(r, f.singular_values.size());
    const Eigen::MatrixXd approx = f.U.leftCols(rr) * f.singular_values.head(rr).asDiagonal() *
                                   f.V.leftCols(rr).transpose();
    res.observed = spectral_norm_exact(A - approx);
    const Eigen::VectorXd sv = singular_values(A);
    const double sigma_r1 = (r < sv.size()) ? sv(r) : 0.0;
    res.bound = sigma_r1 + spectral_norm_exact(A - PiA);
    res.satisfied = detail::bound_holds(res.observed, res.bound, sv(0));
    res.slack_ratio = (res.bound > 0.0) ? res.observed / res.bound : 0.0;
    return res;
}

/// Arithmetic direction of the claimed improvement over the prior result:
/// sqrt(1 + 6 t) <= 1 + 2 t for every t = m/s >= 1.
inline bool sampling_bound_improvement_holds(double m_over_s) {
    return std::sqrt(1.0 + 6.0 * m_over_s) <= 1.0 + 2.0 * m_over_s;
}

} // namespace kernid
